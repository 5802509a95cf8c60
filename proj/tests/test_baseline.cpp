#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <random>

#include "formant/baseline.hpp"
#include "formant/synth.hpp"
#include "support.hpp"

using namespace formant;

namespace {

std::vector<double> white_noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

}  // namespace

TEST_CASE("AR(2) coefficients are recovered") {
  // A(z) = 1 - 1.5 z^-1 + 0.7 z^-2
  auto e = white_noise(10000, 1);
  std::vector<double> x(e.size(), 0.0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    x[n] = e[n] + (n >= 1 ? 1.5 * x[n - 1] : 0.0) - (n >= 2 ? 0.7 * x[n - 2] : 0.0);
  }
  auto r = lpc_coefficients(x, 2);
  CHECK(std::abs(r.coefficients[0] - 1.5) < 1e-2);
  CHECK(std::abs(r.coefficients[1] + 0.7) < 1e-2);
}

TEST_CASE("white noise gives stable reflection coefficients") {
  auto r = lpc_coefficients(white_noise(4000, 2), 16);
  CHECK((r.reflection.array().abs() < 1.0).all());
  CHECK(r.error > 0.0);
}

TEST_CASE("Levinson-Durbin agrees with a dense Toeplitz solve") {
  auto x = white_noise(600, 3);
  for (std::size_t i = 1; i < x.size(); ++i) x[i] += 0.8 * x[i - 1];
  for (int order : {1, 4, 10}) {
    Eigen::VectorXd r(order + 1);
    for (int lag = 0; lag <= order; ++lag) {
      double acc = 0.0;
      for (std::size_t i = lag; i < x.size(); ++i) acc += x[i] * x[i - lag];
      r[lag] = acc;
    }
    Eigen::MatrixXd R(order, order);
    for (int i = 0; i < order; ++i)
      for (int j = 0; j < order; ++j) R(i, j) = r[std::abs(i - j)];
    const Eigen::VectorXd direct = R.ldlt().solve(r.tail(order));
    const auto lev = lpc_coefficients(x, order).coefficients;
    CHECK((lev - direct).norm() / direct.norm() < 1e-8);
  }
}

TEST_CASE("a pure tone yields a root pair at its frequency") {
  auto w = formant::testing::tone(1200.0, 0.064);
  auto r = lpc_coefficients(w.samples, 2);
  auto c = formants_from_lpc(r.coefficients, 16000, 1, RootPicking{0.0, 1e9});
  REQUIRE(c[0].valid);
  CHECK(std::abs(c[0].frequency - 1200.0) < 12.0);
}

TEST_CASE("root to formant arithmetic") {
  const double radius = 0.99;
  const double theta = 2.0 * std::numbers::pi * 1000.0 / 16000.0;
  Eigen::VectorXd a(2);
  a << 2.0 * radius * std::cos(theta), -radius * radius;
  auto c = formants_from_lpc(a, 16000, 3);
  CHECK(c[0].valid);
  CHECK(c[0].frequency == doctest::Approx(1000.0).epsilon(1e-9));
  CHECK(c[0].bandwidth == doctest::Approx(-std::log(0.99) * 16000 / std::numbers::pi).epsilon(1e-9));
  CHECK(c[0].bandwidth == doctest::Approx(51.2).epsilon(1e-3));
  CHECK_FALSE(c[1].valid);
  CHECK_FALSE(c[2].valid);

  // Real roots only: A(z) = (1 - 0.5 z^-1)(1 + 0.3 z^-1)
  Eigen::VectorXd real(2);
  real << 0.2, 0.15;
  for (const auto& f : formants_from_lpc(real, 16000, 2)) CHECK_FALSE(f.valid);
}

TEST_CASE("candidate filters") {
  const double theta = 2.0 * std::numbers::pi * 1000.0 / 16000.0;
  Eigen::VectorXd wide(2);
  const double radius = std::exp(-std::numbers::pi * 500.0 / 16000.0);
  wide << 2.0 * radius * std::cos(theta), -radius * radius;
  CHECK_FALSE(formants_from_lpc(wide, 16000, 1)[0].valid);
  CHECK(formants_from_lpc(wide, 16000, 1, RootPicking{90.0, 600.0})[0].valid);
}

TEST_CASE("silent frame") {
  std::vector<double> zeros(100, 0.0);
  CHECK_THROWS_WITH(lpc_coefficients(zeros, 12), "silent frame");
}

TEST_CASE("synthetic vowel is tracked within 30 Hz") {
  SyntheticSpec spec;
  spec.f0 = 100.0;
  spec.formants = {500.0, 1500.0, 2500.0};
  spec.duration = 0.3;
  auto [w, gold] = synthesize(spec);
  auto est = lpc_track(w, FrameGeometry{});
  REQUIRE(est.num_frames() == spectrogram(w, SpectrogramConfig{}).num_frames());
  for (int k = 0; k < 3; ++k) {
    double sum = 0.0, sq = 0.0;
    for (int t = 0; t < est.num_frames(); ++t) {
      REQUIRE(est.valid(t, k));
      CHECK(std::abs(est.values(t, k) - gold.values(t, k)) < 30.0);
      sum += est.values(t, k);
      sq += est.values(t, k) * est.values(t, k);
    }
    const double n = est.num_frames();
    CHECK(std::sqrt(std::max(0.0, sq / n - (sum / n) * (sum / n))) < 20.0);
  }
}

TEST_CASE("estimates ascend inside the Nyquist band") {
  auto x = white_noise(8000, 9);
  Waveform w{x, 16000};
  auto est = lpc_track(w, FrameGeometry{});
  for (int t = 0; t < est.num_frames(); ++t) {
    for (int k = 0; k < 3; ++k) {
      if (!est.valid(t, k)) continue;
      CHECK(est.values(t, k) > 0.0);
      CHECK(est.values(t, k) < 8000.0);
      if (k > 0 && est.valid(t, k - 1)) CHECK(est.values(t, k) > est.values(t, k - 1));
    }
  }
  CHECK(lpc_track(w, FrameGeometry{}) == est);
}

TEST_CASE("silence is all invalid") {
  Waveform w{std::vector<double>(3200, 0.0), 16000};
  auto est = lpc_track(w, FrameGeometry{});
  CHECK(est.num_frames() == FrameGeometry{}.num_frames(3200));
  CHECK_FALSE(est.valid.any());
}
