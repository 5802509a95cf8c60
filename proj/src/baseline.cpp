#include "formant/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace formant {

LpcResult lpc_coefficients(std::span<const double> frame, int order) {
  const int n = static_cast<int>(frame.size());
  if (order <= 0 || order >= n) throw std::invalid_argument("LPC order must be in [1, frame length)");
  std::vector<double> r(order + 1, 0.0);
  for (int lag = 0; lag <= order; ++lag) {
    double acc = 0.0;
    for (int i = lag; i < n; ++i) acc += frame[i] * frame[i - lag];
    r[lag] = acc;
  }
  if (!(r[0] > 0.0) || !std::isfinite(r[0])) throw std::invalid_argument("silent frame");

  LpcResult out;
  out.coefficients = Eigen::VectorXd::Zero(order);
  out.reflection = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd& a = out.coefficients;
  Eigen::VectorXd previous(order);
  double error = r[0];
  for (int i = 1; i <= order; ++i) {
    double acc = r[i];
    for (int j = 1; j < i; ++j) acc -= a[j - 1] * r[i - j];
    const double k = acc / error;
    out.reflection[i - 1] = k;
    previous.head(i - 1) = a.head(i - 1);
    a[i - 1] = k;
    for (int j = 1; j < i; ++j) a[j - 1] = previous[j - 1] - k * previous[i - j - 1];
    error *= 1.0 - k * k;
    if (error <= 0.0) {
      // Perfectly predictable signal; higher orders add nothing.
      error = 0.0;
      break;
    }
  }
  out.error = error;
  return out;
}

std::vector<FormantCandidate> formants_from_lpc(const Eigen::VectorXd& coefficients, int sample_rate, int k,
                                                const RootPicking& rules) {
  const int p = static_cast<int>(coefficients.size());
  std::vector<FormantCandidate> found;
  if (p > 0) {
    // Companion matrix of z^p - a_1 z^{p-1} - ... - a_p.
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
    companion.row(0) = coefficients.transpose();
    for (int i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
    const Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    if (solver.info() != Eigen::Success) throw std::runtime_error("LPC root finding failed");
    for (const std::complex<double>& root : solver.eigenvalues()) {
      if (root.imag() <= 0.0) continue;
      const double radius = std::abs(root);
      if (!(radius > 0.0)) continue;
      const double frequency = std::arg(root) * sample_rate / (2.0 * std::numbers::pi);
      const double bandwidth = -std::log(radius) * sample_rate / std::numbers::pi;
      if (frequency < rules.min_frequency || bandwidth > rules.max_bandwidth) continue;
      found.push_back({frequency, bandwidth, true});
    }
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.frequency < b.frequency; });
  found.resize(static_cast<std::size_t>(k));
  return found;
}

FormantTrack lpc_track(const Waveform& w, const FrameGeometry& geometry, const LpcTrackConfig& cfg) {
  geometry.validate();
  const int frames = geometry.num_frames(w.size());
  FormantTrack track(frames, cfg.num_formants);
  if (frames == 0) return track;
  const Waveform emphasized = pre_emphasize(w, cfg.preemphasis);
  const std::vector<double> window = make_window(cfg.window, geometry.window_length);
  std::vector<double> frame(geometry.window_length);
  for (int t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * geometry.hop;
    double energy = 0.0;
    for (int i = 0; i < geometry.window_length; ++i) {
      const double s = w.samples[start + i];
      energy += s * s;
      frame[i] = emphasized.samples[start + i] * window[i];
    }
    if (std::sqrt(energy / geometry.window_length) < cfg.silence_rms) continue;
    LpcResult lpc;
    try {
      lpc = lpc_coefficients(frame, cfg.order);
    } catch (const std::invalid_argument&) {
      continue;
    }
    const auto candidates = formants_from_lpc(lpc.coefficients, w.sample_rate, cfg.num_formants, cfg.rules);
    for (int k = 0; k < cfg.num_formants; ++k) {
      track.values(t, k) = candidates[k].frequency;
      track.valid(t, k) = candidates[k].valid;
    }
  }
  return track;
}

}  // namespace formant
