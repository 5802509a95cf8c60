#include "formant/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace formant {

BinSpec BinSpec::from_geometry(int sample_rate, const FrameGeometry& geometry) {
  return BinSpec{static_cast<double>(sample_rate) / geometry.fft_size, geometry.num_bins(), sample_rate / 2.0};
}

void BinSpec::validate() const {
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin_width must be positive");
  if (num_bins < 2) throw std::invalid_argument("num_bins must be at least 2");
  if (!(max_hz > 0.0)) throw std::invalid_argument("max_hz must be positive");
  // The top bin center must reach max_hz.
  if ((num_bins - 1) * bin_width + 1e-9 < max_hz) {
    throw std::invalid_argument("bins do not cover max_hz");
  }
}

void FormantTrack::validate(double max_hz) const {
  if (valid.rows() != values.rows() || valid.cols() != values.cols()) {
    throw std::invalid_argument("formant track values and mask disagree in shape");
  }
  for (int t = 0; t < num_frames(); ++t) {
    bool all_valid = true;
    for (int k = 0; k < num_formants(); ++k) {
      if (!valid(t, k)) {
        all_valid = false;
        continue;
      }
      const double f = values(t, k);
      if (!(f > 0.0 && f <= max_hz)) {
        throw std::invalid_argument("frame " + std::to_string(t) + ": formant " + std::to_string(k + 1) +
                                    " value " + std::to_string(f) + " Hz out of range");
      }
    }
    if (!all_valid) continue;
    for (int k = 1; k < num_formants(); ++k) {
      if (!(values(t, k - 1) < values(t, k))) {
        throw std::invalid_argument("frame " + std::to_string(t) + ": formants not strictly increasing");
      }
    }
  }
}

bool FormantTrack::operator==(const FormantTrack& other) const {
  if (values.rows() != other.values.rows() || values.cols() != other.values.cols()) return false;
  return (valid == other.valid).all() && (values.array() == other.values.array()).all();
}

int quantize(double hz, const BinSpec& spec) {
  if (!(hz >= 0.0 && hz <= spec.max_hz)) throw std::out_of_range("frequency out of range");
  const long bin = std::lround(hz / spec.bin_width);
  return static_cast<int>(std::clamp<long>(bin, 0, spec.num_bins - 1));
}

double dequantize(int bin, const BinSpec& spec) {
  if (bin < 0 || bin >= spec.num_bins) throw std::out_of_range("bin index out of range");
  return bin * spec.bin_width;
}

TargetHeatmapSet make_targets(const FormantTrack& track, const BinSpec& spec, double epsilon) {
  if (epsilon < 0.0 || epsilon >= 1.0) throw std::invalid_argument("smoothing epsilon must be in [0, 1)");
  const int frames = track.num_frames();
  const int formants = track.num_formants();
  const int bins = spec.num_bins;
  const double floor_mass = epsilon / bins;

  TargetHeatmapSet out;
  out.smoothing_epsilon = epsilon;
  out.included = BoolMatrix::Constant(frames, formants, false);
  out.targets.assign(formants, Eigen::MatrixXd::Zero(bins, frames));
  out.bins.assign(formants, Eigen::VectorXi::Constant(frames, -1));
  for (int k = 0; k < formants; ++k) {
    for (int t = 0; t < frames; ++t) {
      if (!track.valid(t, k)) continue;
      const double f = track.values(t, k);
      if (!(f >= 0.0 && f <= spec.max_hz)) continue;
      const int b = quantize(f, spec);
      out.targets[k].col(t).setConstant(floor_mass);
      out.targets[k](b, t) += 1.0 - epsilon;
      out.included(t, k) = true;
      out.bins[k](t) = b;
    }
  }
  return out;
}

}  // namespace formant
