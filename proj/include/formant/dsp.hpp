#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace formant {

/// Mono PCM signal. Samples are real amplitudes (16-bit files map to [-1, 1)).
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  void validate() const;
};

enum class WindowType { hann, hamming, rectangular };

std::string to_string(WindowType w);
WindowType window_from_string(const std::string& name);

/// STFT framing. `num_bins()` is D = fft_size / 2 + 1.
struct FrameGeometry {
  int fft_size = 512;
  int hop = 160;
  int window_length = 512;

  int num_bins() const { return fft_size / 2 + 1; }
  /// Frames produced for `num_samples` samples, 0 when shorter than one window.
  int num_frames(std::size_t num_samples) const;
  void validate() const;

  bool operator==(const FrameGeometry&) const = default;
};

struct SpectrogramConfig {
  FrameGeometry geometry;
  WindowType window = WindowType::hann;
  double floor_epsilon = 1e-10;
  // Zero mean / unit variance over the whole matrix.
  bool standardize = true;
  double preemphasis = 0.97;

  void validate() const;
};

/// D x T log-magnitude matrix; column t is frame t.
struct Spectrogram {
  Eigen::MatrixXd values;
  FrameGeometry geometry;
  int source_sample_rate = 16000;

  int num_bins() const { return static_cast<int>(values.rows()); }
  int num_frames() const { return static_cast<int>(values.cols()); }
};

Waveform pre_emphasize(const Waveform& w, double coefficient = 0.97);

std::vector<double> make_window(WindowType type, int length);

/// Log-magnitude STFT. Applies the window and floor from `cfg` and, when
/// enabled, standardizes the result. Does not pre-emphasize.
Spectrogram spectrogram(const Waveform& w, const SpectrogramConfig& cfg);

/// Model front end: pre-emphasis followed by `spectrogram`.
Spectrogram front_end(const Waveform& w, const SpectrogramConfig& cfg);

/// Keeps every second sample. The rate is left untouched so every
/// frequency in the signal appears doubled.
Waveform speed_up_by_two(const Waveform& w);

/// Reads a 16-bit PCM mono RIFF/WAVE file. Rates other than
/// `expected_rate` are rejected; pass 0 to accept any rate.
Waveform read_wav(const std::filesystem::path& path, int expected_rate = 16000);

/// Number of sample frames in a 16-bit mono WAVE file without decoding it.
std::size_t wav_num_samples(const std::filesystem::path& path);

/// Writes 16-bit PCM mono. Samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const Waveform& w);

}  // namespace formant
