#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "formant/dsp.hpp"
#include "formant/model.hpp"
#include "formant/quantizer.hpp"

namespace formant {

struct TrackResult {
  FormantTrack track;
  HeatmapSet heatmaps;
};

/// Index of the largest entry of `column` in rows [lo, hi]; the lowest index
/// wins ties. Returns -1 for an empty range.
int argmax_in_range(const Eigen::Ref<const Eigen::VectorXd>& column, int lo, int hi);

/// Greedy sequential decoding: head 1 on the full latent, then each
/// following head on the latent masked at and below the previous
/// prediction. Values are bin centers from `bins`.
TrackResult track(const Spectrogram& s, const FormantModel& model, const BinSpec& bins);

/// Batched form of `track`; all spectrograms go through one forward pass.
std::vector<TrackResult> track_batch(std::span<const Spectrogram> spectrograms, const FormantModel& model,
                                     const BinSpec& bins);

/// Element-wise maximum over the heads.
Eigen::MatrixXd aggregate_heatmaps(const HeatmapSet& h);

/// Writes `frame,time_sec,f1_hz,...,valid`; `valid` is 1 when every formant
/// of the frame is valid. Invalid rows keep whatever values are available.
void write_track_csv(const std::filesystem::path& path, const FormantTrack& track, const FrameGeometry& geometry,
                     int sample_rate);
FormantTrack read_track_csv(const std::filesystem::path& path);

/// Wide CSV: `bin,hz,frame_0,...,frame_{T-1}`, one row per bin.
void write_heatmap_csv(const std::filesystem::path& path, const Eigen::MatrixXd& map, const BinSpec& bins);

}  // namespace formant
