#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>

#include "formant/synth.hpp"
#include "support.hpp"

using namespace formant;

TEST_CASE("a single impulse through one resonator matches the closed form") {
  SyntheticSpec spec;
  spec.f0 = 10.0;  // one impulse in 50 ms
  spec.duration = 0.05;
  spec.formants = {1000.0};
  spec.bandwidths = {80.0};
  auto [w, tr] = synthesize(spec);
  const double r = std::exp(-std::numbers::pi * 80.0 / 16000.0);
  const double theta = 2.0 * std::numbers::pi * 1000.0 / 16000.0;
  std::vector<double> h(w.size());
  double peak = 0.0;
  for (std::size_t n = 0; n < h.size(); ++n) {
    h[n] = std::pow(r, static_cast<double>(n)) * std::sin((n + 1) * theta) / std::sin(theta);
    peak = std::max(peak, std::abs(h[n]));
  }
  for (std::size_t n = 0; n < h.size(); ++n) CHECK(std::abs(w.samples[n] - 0.5 * h[n] / peak) < 1e-9);
}

TEST_CASE("labels follow the formant trajectory at frame starts") {
  SyntheticSpec spec;
  spec.duration = 0.3;
  spec.end_formants = std::vector<double>{600.0, 1800.0, 2700.0};
  auto [w, tr] = synthesize(spec);
  CHECK(w.size() == 4800);
  CHECK(tr.num_frames() == FrameGeometry{}.num_frames(4800));
  for (int t = 0; t < tr.num_frames(); ++t) {
    const double frac = t * 160.0 / 4800.0;
    CHECK(tr.values(t, 0) == doctest::Approx(500.0 + 100.0 * frac));
    CHECK(tr.values(t, 2) == doctest::Approx(2500.0 + 200.0 * frac));
    CHECK(tr.valid.row(t).all());
  }
  CHECK(std::abs(*std::max_element(w.samples.begin(), w.samples.end(), [](double a, double b) {
          return std::abs(a) < std::abs(b);
        })) == doctest::Approx(0.5));
}

TEST_CASE("spectral envelope peaks near each formant") {
  SyntheticSpec spec;
  spec.f0 = 100.0;
  spec.formants = {500.0, 1500.0, 2500.0};
  spec.duration = 0.3;
  auto [w, tr] = synthesize(spec);
  auto s = spectrogram(w, formant::testing::raw_spectrogram_config());
  const Eigen::VectorXd mean = s.values.rowwise().mean();
  for (double f : {500.0, 1500.0, 2500.0}) {
    const int c = static_cast<int>(f / 31.25);
    Eigen::Index at = 0;
    mean.segment(c - 5, 11).maxCoeff(&at);
    CHECK(std::abs((c - 5 + at) * 31.25 - f) <= 62.5);
  }
}

TEST_CASE("spec validation") {
  SyntheticSpec spec;
  spec.formants = {1500.0, 500.0, 2500.0};
  CHECK_THROWS(spec.validate(16000));
  spec.formants = {500.0, 1500.0, 8500.0};
  CHECK_THROWS(spec.validate(16000));
  spec.formants = {500.0, 1500.0};
  CHECK_THROWS(spec.validate(16000));
  spec = SyntheticSpec{};
  spec.f0 = 0.0;
  CHECK_THROWS(spec.validate(16000));
  CHECK(cohort_from_string(to_string(Cohort::children)) == Cohort::children);
  CHECK_THROWS(cohort_from_string("elders"));
}

TEST_CASE("corpus generation is seeded and order independent") {
  auto a = generate_corpus(6, {{Cohort::men, 1.0}, {Cohort::women, 1.0}}, 7);
  auto b = generate_corpus(3, {{Cohort::men, 1.0}, {Cohort::women, 1.0}}, 7);
  auto c = generate_corpus(3, {{Cohort::men, 1.0}, {Cohort::women, 1.0}}, 8);
  for (int i = 0; i < 3; ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].wave.samples == b[i].wave.samples);
    CHECK(a[i].track == b[i].track);
    CHECK(a[i].seed == b[i].seed);
    CHECK(a[i].wave.samples != c[i].wave.samples);
  }
  CHECK(a[0].id == "syn00000");
  CHECK_THROWS(generate_corpus(0, {{Cohort::men, 1.0}}, 1));
  CHECK_THROWS(generate_corpus(2, {{Cohort::men, 0.0}}, 1));
}

TEST_CASE("sampled vowels respect the cohort priors") {
  for (Cohort cohort : {Cohort::men, Cohort::women, Cohort::children}) {
    const auto& p = cohort_prior(cohort);
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      const auto spec = sample_spec(cohort, seed);
      CHECK(spec.f0 >= p.f0.first);
      CHECK(spec.f0 <= p.f0.second);
      CHECK(spec.formants[0] >= p.f1.first);
      CHECK(spec.formants[0] <= p.f1.second);
      CHECK(spec.formants[1] - spec.formants[0] >= kMinFormantGap);
      CHECK(spec.formants[2] - spec.formants[1] >= kMinFormantGap);
      for (double b : spec.bandwidths) CHECK(b <= 110.0);
    }
  }
}

TEST_CASE("cohort mix selects only weighted cohorts") {
  auto kids = generate_corpus(20, {{Cohort::children, 1.0}}, 3);
  for (const auto& u : kids) CHECK(u.group == "children");
  auto mixed = generate_corpus(200, {{Cohort::men, 1.0}, {Cohort::women, 1.0}}, 3);
  const auto men = std::count_if(mixed.begin(), mixed.end(), [](const auto& u) { return u.group == "men"; });
  CHECK(men > 70);
  CHECK(men < 130);
}

TEST_CASE("nearest vowel prototype") {
  CHECK(nearest_vowel(270, 2290, Cohort::men) == "iy");
  CHECK(nearest_vowel(730, 1090, Cohort::men) == "aa");
  CHECK(nearest_vowel(300, 870, Cohort::men) == "uw");
}
