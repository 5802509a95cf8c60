#include "formant/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace formant {

void Waveform::validate() const {
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  for (double s : samples) {
    if (!std::isfinite(s)) throw std::invalid_argument("waveform contains non-finite samples");
  }
}

std::string to_string(WindowType w) {
  switch (w) {
    case WindowType::hann: return "hann";
    case WindowType::hamming: return "hamming";
    case WindowType::rectangular: return "rectangular";
  }
  return "unknown";
}

WindowType window_from_string(const std::string& name) {
  if (name == "hann") return WindowType::hann;
  if (name == "hamming") return WindowType::hamming;
  if (name == "rectangular") return WindowType::rectangular;
  throw std::invalid_argument("unknown window type '" + name + "'");
}

int FrameGeometry::num_frames(std::size_t num_samples) const {
  if (num_samples < static_cast<std::size_t>(window_length)) return 0;
  return 1 + static_cast<int>((num_samples - window_length) / hop);
}

void FrameGeometry::validate() const {
  if (fft_size < 2 || fft_size % 2 != 0) throw std::invalid_argument("fft_size must be even and >= 2");
  if (hop <= 0) throw std::invalid_argument("hop must be positive");
  if (!(hop <= window_length && window_length <= fft_size)) {
    throw std::invalid_argument("frame geometry requires hop <= window_length <= fft_size");
  }
}

void SpectrogramConfig::validate() const {
  geometry.validate();
  if (!(floor_epsilon > 0.0)) throw std::invalid_argument("floor_epsilon must be positive");
  if (preemphasis < 0.0 || preemphasis >= 1.0) throw std::invalid_argument("pre-emphasis coefficient must be in [0, 1)");
}

Waveform pre_emphasize(const Waveform& w, double coefficient) {
  if (w.empty()) throw std::invalid_argument("empty input");
  if (coefficient < 0.0 || coefficient >= 1.0) throw std::invalid_argument("pre-emphasis coefficient must be in [0, 1)");
  Waveform out{std::vector<double>(w.size()), w.sample_rate};
  out.samples[0] = w.samples[0];
  for (std::size_t t = 1; t < w.size(); ++t) {
    out.samples[t] = w.samples[t] - coefficient * w.samples[t - 1];
  }
  return out;
}

std::vector<double> make_window(WindowType type, int length) {
  std::vector<double> win(length, 1.0);
  if (length <= 1 || type == WindowType::rectangular) return win;
  // Periodic form, matching common STFT front ends.
  const double step = 2.0 * std::numbers::pi / length;
  for (int n = 0; n < length; ++n) {
    const double c = std::cos(step * n);
    win[n] = type == WindowType::hann ? 0.5 - 0.5 * c : 0.54 - 0.46 * c;
  }
  return win;
}

Spectrogram spectrogram(const Waveform& w, const SpectrogramConfig& cfg) {
  cfg.validate();
  const FrameGeometry& g = cfg.geometry;
  const int frames = g.num_frames(w.size());
  if (frames == 0) throw std::invalid_argument("utterance too short");

  const int bins = g.num_bins();
  const std::vector<double> window = make_window(cfg.window, g.window_length);
  Eigen::FFT<double> fft;
  std::vector<double> buffer(g.fft_size, 0.0);
  std::vector<std::complex<double>> spectrum;

  Spectrogram out;
  out.geometry = g;
  out.source_sample_rate = w.sample_rate;
  out.values.resize(bins, frames);
  for (int t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * g.hop;
    std::fill(buffer.begin(), buffer.end(), 0.0);
    for (int n = 0; n < g.window_length; ++n) buffer[n] = w.samples[start + n] * window[n];
    fft.fwd(spectrum, buffer);
    for (int d = 0; d < bins; ++d) {
      out.values(d, t) = std::log(std::abs(spectrum[d]) + cfg.floor_epsilon);
    }
  }

  if (cfg.standardize) {
    const double mean = out.values.mean();
    out.values.array() -= mean;
    const double stddev = std::sqrt(out.values.squaredNorm() / static_cast<double>(out.values.size()));
    if (stddev > 1e-12) out.values /= stddev;
  }
  return out;
}

Spectrogram front_end(const Waveform& w, const SpectrogramConfig& cfg) {
  return spectrogram(pre_emphasize(w, cfg.preemphasis), cfg);
}

Waveform speed_up_by_two(const Waveform& w) {
  if (w.size() < 2) throw std::invalid_argument("speed-up needs at least two samples");
  Waveform out{{}, w.sample_rate};
  out.samples.reserve((w.size() + 1) / 2);
  for (std::size_t i = 0; i < w.size(); i += 2) out.samples.push_back(w.samples[i]);
  return out;
}

namespace {

struct WavInfo {
  int sample_rate = 0;
  std::size_t num_samples = 0;
  std::streamoff data_offset = 0;
};

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
  out.write(b, 4);
}

void write_u16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
  out.write(b, 2);
}

WavInfo parse_header(std::istream& in, const std::filesystem::path& path) {
  auto fail = [&](const std::string& what) {
    return std::invalid_argument(path.string() + ": " + what);
  };
  char tag[4];
  in.read(tag, 4);
  if (!in || std::string(tag, 4) != "RIFF") throw fail("not a RIFF file");
  read_u32(in);
  in.read(tag, 4);
  if (!in || std::string(tag, 4) != "WAVE") throw fail("not a WAVE file");

  WavInfo info;
  bool have_fmt = false;
  while (in.read(tag, 4)) {
    const std::uint32_t size = read_u32(in);
    const std::string id(tag, 4);
    if (id == "fmt ") {
      const std::uint16_t format = read_u16(in);
      const std::uint16_t channels = read_u16(in);
      info.sample_rate = static_cast<int>(read_u32(in));
      read_u32(in);
      read_u16(in);
      const std::uint16_t bits = read_u16(in);
      if (format != 1) throw fail("only PCM WAVE files are supported");
      if (channels != 1) throw fail("only mono audio is supported");
      if (bits != 16) throw fail("only 16-bit samples are supported");
      in.seekg(static_cast<std::streamoff>(size) - 16 + (size & 1), std::ios::cur);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw fail("data chunk before fmt chunk");
      info.num_samples = size / 2;
      info.data_offset = in.tellg();
      return info;
    } else {
      in.seekg(static_cast<std::streamoff>(size) + (size & 1), std::ios::cur);
    }
  }
  throw fail("missing data chunk");
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path, int expected_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const WavInfo info = parse_header(in, path);
  if (expected_rate > 0 && info.sample_rate != expected_rate) {
    throw std::invalid_argument(path.string() + ": sample rate " + std::to_string(info.sample_rate) +
                             " Hz is not supported (expected " + std::to_string(expected_rate) + " Hz)");
  }
  std::vector<std::int16_t> raw(info.num_samples);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 2));
  if (!in) throw std::runtime_error(path.string() + ": truncated data chunk");
  Waveform w{std::vector<double>(raw.size()), info.sample_rate};
  std::transform(raw.begin(), raw.end(), w.samples.begin(), [](std::int16_t s) { return s / 32768.0; });
  return w;
}

std::size_t wav_num_samples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_header(in, path).num_samples;
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  w.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(w.size() * 2);
  out.write("RIFF", 4);
  write_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 1);
  write_u16(out, 1);
  write_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  write_u32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  write_u16(out, 2);
  write_u16(out, 16);
  out.write("data", 4);
  write_u32(out, data_bytes);
  for (double s : w.samples) {
    const double clipped = std::clamp(s, -1.0, 1.0);
    const auto v = static_cast<std::int16_t>(std::lround(std::clamp(clipped * 32768.0, -32768.0, 32767.0)));
    write_u16(out, static_cast<std::uint16_t>(v));
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace formant
