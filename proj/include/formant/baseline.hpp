#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "formant/dsp.hpp"
#include "formant/quantizer.hpp"

namespace formant {

struct LpcResult {
  /// Predictor coefficients a_1..a_p: x[n] ~ sum_i a_i x[n - i]. The
  /// prediction-error filter is A(z) = 1 - sum_i a_i z^-i.
  Eigen::VectorXd coefficients;
  Eigen::VectorXd reflection;
  double error = 0.0;
};

/// Autocorrelation-method LPC solved with the Levinson-Durbin recursion.
/// Throws "silent frame" when the frame has no energy.
LpcResult lpc_coefficients(std::span<const double> frame, int order);

struct FormantCandidate {
  double frequency = 0.0;
  double bandwidth = 0.0;
  bool valid = false;
};

struct RootPicking {
  double min_frequency = 90.0;
  double max_bandwidth = 400.0;
};

/// Roots of A(z) via companion-matrix eigenvalues; upper-half-plane roots
/// become (frequency, bandwidth) candidates, filtered by `rules`, and the
/// `k` lowest are returned ascending. Missing slots are flagged invalid.
std::vector<FormantCandidate> formants_from_lpc(const Eigen::VectorXd& coefficients, int sample_rate, int k,
                                                const RootPicking& rules = {});

struct LpcTrackConfig {
  int order = 10;
  int num_formants = 3;
  double preemphasis = 0.0;
  WindowType window = WindowType::hann;
  RootPicking rules;
  // Frames whose RMS is below this are treated as silent.
  double silence_rms = 1e-6;
};

/// Per-frame LPC estimates on the same framing as `spectrogram`.
FormantTrack lpc_track(const Waveform& w, const FrameGeometry& geometry, const LpcTrackConfig& cfg = {});

}  // namespace formant
