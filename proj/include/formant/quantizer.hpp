#pragma once

#include <vector>

#include <Eigen/Dense>

#include "formant/dsp.hpp"

namespace formant {

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Frequency axis of the heatmaps. Bin b is centered on b * bin_width and
/// covers [(b - 0.5) * bin_width, (b + 0.5) * bin_width).
struct BinSpec {
  double bin_width = 31.25;
  int num_bins = 257;
  double max_hz = 8000.0;

  static BinSpec from_geometry(int sample_rate, const FrameGeometry& geometry);
  void validate() const;

  bool operator==(const BinSpec&) const = default;
};

/// Per-frame formant frequencies (T x K, Hz) with a validity mask.
struct FormantTrack {
  Eigen::MatrixXd values;
  BoolMatrix valid;

  FormantTrack() = default;
  FormantTrack(int frames, int formants)
      : values(Eigen::MatrixXd::Zero(frames, formants)), valid(BoolMatrix::Constant(frames, formants, false)) {}

  int num_frames() const { return static_cast<int>(values.rows()); }
  int num_formants() const { return static_cast<int>(values.cols()); }

  /// Checks shape agreement, range of valid entries and F1 < F2 < F3 on
  /// fully annotated frames.
  void validate(double max_hz) const;

  bool operator==(const FormantTrack& other) const;
};

int quantize(double hz, const BinSpec& spec);
double dequantize(int bin, const BinSpec& spec);

/// Label-smoothed classification targets, one D x T map per formant.
struct TargetHeatmapSet {
  std::vector<Eigen::MatrixXd> targets;
  // T x K; true where the column takes part in the loss.
  BoolMatrix included;
  std::vector<Eigen::VectorXi> bins;  // per formant, quantized label per frame (-1 when excluded)
  double smoothing_epsilon = 0.0;

  int num_formants() const { return static_cast<int>(targets.size()); }
};

TargetHeatmapSet make_targets(const FormantTrack& track, const BinSpec& spec, double epsilon);

}  // namespace formant
