#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <complex>
#include <random>

#include "formant/dsp.hpp"
#include "support.hpp"

using namespace formant;
using formant::testing::tone;

namespace {

int argmax_bin(const Eigen::MatrixXd& values, int column) {
  Eigen::Index r = 0;
  values.col(column).maxCoeff(&r);
  return static_cast<int>(r);
}

// Direct O(N^2) DFT magnitude of one windowed frame.
std::vector<double> dft_magnitude(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  std::vector<double> mag(n / 2 + 1);
  for (int k = 0; k <= n / 2; ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (int i = 0; i < n; ++i) acc += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * k * i / n);
    mag[k] = std::abs(acc);
  }
  return mag;
}

}  // namespace

TEST_CASE("pre-emphasis of a constant signal") {
  Waveform w{{1, 1, 1, 1}, 16000};
  auto out = pre_emphasize(w, 0.97);
  REQUIRE(out.size() == 4);
  CHECK(out.samples[0] == doctest::Approx(1.0));
  for (int i = 1; i < 4; ++i) CHECK(out.samples[i] == doctest::Approx(0.03).epsilon(1e-12));
  CHECK(out.sample_rate == 16000);
}

TEST_CASE("pre-emphasis impulse response and identity") {
  auto imp = pre_emphasize(Waveform{{1, 0, 0}, 16000}, 0.97);
  CHECK(imp.samples == std::vector<double>{1.0, -0.97, 0.0});

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  Waveform x{std::vector<double>(100), 16000};
  for (auto& s : x.samples) s = n(rng);
  CHECK(pre_emphasize(x, 0.0).samples == x.samples);
}

TEST_CASE("pre-emphasis is linear") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  Waveform x{std::vector<double>(257), 16000}, y{std::vector<double>(257), 16000};
  for (auto& s : x.samples) s = n(rng);
  for (auto& s : y.samples) s = n(rng);
  const double a = 1.7, b = -0.3;
  Waveform mix{std::vector<double>(257), 16000};
  for (int i = 0; i < 257; ++i) mix.samples[i] = a * x.samples[i] + b * y.samples[i];
  auto px = pre_emphasize(x), py = pre_emphasize(y), pm = pre_emphasize(mix);
  for (int i = 0; i < 257; ++i) CHECK(std::abs(pm.samples[i] - (a * px.samples[i] + b * py.samples[i])) < 1e-9);
}

TEST_CASE("pre-emphasis rejects empty input") {
  CHECK_THROWS_WITH(pre_emphasize(Waveform{}, 0.97), "empty input");
  CHECK_THROWS(pre_emphasize(Waveform{{1.0}, 16000}, 1.0));
}

TEST_CASE("spectrogram matches a brute-force DFT") {
  auto w = tone(440.0, 0.05);
  for (std::size_t i = 0; i < w.size(); ++i) w.samples[i] += 0.1 * std::cos(0.37 * static_cast<double>(i * i % 97));
  SpectrogramConfig cfg = formant::testing::raw_spectrogram_config();
  auto s = spectrogram(w, cfg);
  const auto win = make_window(WindowType::hann, 512);
  for (int t : {0, 1, s.num_frames() - 1}) {
    std::vector<double> frame(512);
    for (int i = 0; i < 512; ++i) frame[i] = w.samples[t * 160 + i] * win[i];
    auto mag = dft_magnitude(frame);
    for (int d = 0; d < 257; ++d) CHECK(std::abs(s.values(d, t) - std::log(mag[d] + 1e-10)) < 1e-9);
  }
}

TEST_CASE("spectrogram peak of a 1 kHz tone is bin 32") {
  auto s = spectrogram(tone(1000.0, 0.1), formant::testing::raw_spectrogram_config());
  for (int t = 0; t < s.num_frames(); ++t) CHECK(argmax_bin(s.values, t) == 32);
}

TEST_CASE("pure tones land within one bin of f / 31.25") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> f(60.0, 7750.0);
  for (int i = 0; i < 40; ++i) {
    const double hz = f(rng);
    auto s = spectrogram(tone(hz, 0.04), formant::testing::raw_spectrogram_config());
    const int expect = static_cast<int>(std::lround(hz / 31.25));
    for (int t = 0; t < s.num_frames(); ++t) CHECK(std::abs(argmax_bin(s.values, t) - expect) <= 1);
  }
}

TEST_CASE("silence gives log(floor) everywhere") {
  Waveform w{std::vector<double>(2000, 0.0), 16000};
  auto s = spectrogram(w, formant::testing::raw_spectrogram_config());
  CHECK((s.values.array() == std::log(1e-10)).all());
}

TEST_CASE("frame count and bin count") {
  auto s = spectrogram(tone(300.0, 1.0), formant::testing::raw_spectrogram_config());
  CHECK(s.num_bins() == 257);
  CHECK(s.num_frames() == 97);
  FrameGeometry g;
  for (std::size_t n : {512u, 513u, 671u, 672u, 5000u}) {
    CHECK(g.num_frames(n) == 1 + static_cast<int>((n - 512) / 160));
  }
  CHECK(g.num_frames(511) == 0);
  CHECK_THROWS_WITH(spectrogram(tone(300.0, 0.01), formant::testing::raw_spectrogram_config()), "utterance too short");
}

TEST_CASE("standardized spectrogram has zero mean and unit variance") {
  auto s = spectrogram(tone(700.0, 0.2), SpectrogramConfig{});
  CHECK(std::abs(s.values.mean()) < 1e-9);
  CHECK(std::abs(s.values.squaredNorm() / static_cast<double>(s.values.size()) - 1.0) < 1e-9);
}

TEST_CASE("speed-up halves the length and doubles the frequency") {
  Waveform w{std::vector<double>(11, 1.0), 16000};
  CHECK(speed_up_by_two(w).size() == 6);
  CHECK(speed_up_by_two(Waveform{std::vector<double>(10, 1.0), 16000}).size() == 5);

  auto fast = speed_up_by_two(tone(500.0, 0.2));
  CHECK(fast.sample_rate == 16000);
  auto s = spectrogram(fast, formant::testing::raw_spectrogram_config());
  for (int t = 0; t < s.num_frames(); ++t) CHECK(argmax_bin(s.values, t) == 32);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> f(80.0, 3990.0);
  for (int i = 0; i < 20; ++i) {
    const double hz = f(rng);
    auto sp = spectrogram(speed_up_by_two(tone(hz, 0.1)), formant::testing::raw_spectrogram_config());
    const int expect = static_cast<int>(std::lround(2.0 * hz / 31.25));
    CHECK(std::abs(argmax_bin(sp.values, 0) - expect) <= 1);
  }
}

TEST_CASE("wav roundtrip and rate check") {
  formant::testing::TempDir dir("dsp");
  auto w = tone(250.0, 0.05);
  write_wav(dir / "a.wav", w);
  auto back = read_wav(dir / "a.wav");
  REQUIRE(back.size() == w.size());
  CHECK(wav_num_samples(dir / "a.wav") == w.size());
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(std::abs(back.samples[i] - w.samples[i]) <= 1.0 / 32768.0);

  Waveform slow = w;
  slow.sample_rate = 8000;
  write_wav(dir / "b.wav", slow);
  CHECK_THROWS_AS(read_wav(dir / "b.wav"), std::invalid_argument);
  CHECK(read_wav(dir / "b.wav", 0).sample_rate == 8000);
}

TEST_CASE("window and geometry validation") {
  CHECK(window_from_string(to_string(WindowType::hamming)) == WindowType::hamming);
  CHECK_THROWS(window_from_string("blackman"));
  FrameGeometry bad;
  bad.hop = 600;
  CHECK_THROWS(bad.validate());
  auto hann = make_window(WindowType::hann, 8);
  CHECK(hann[0] == 0.0);
  CHECK(hann[4] == doctest::Approx(1.0));
}
