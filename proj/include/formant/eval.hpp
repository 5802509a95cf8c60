#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "formant/data.hpp"
#include "formant/quantizer.hpp"
#include "formant/segmentation.hpp"

namespace formant {

/// Running absolute-error sums per formant. A formant with no samples has
/// no MAE (never 0).
struct MaeAccumulator {
  std::vector<double> sum;
  std::vector<int> count;

  MaeAccumulator() = default;
  explicit MaeAccumulator(int formants) : sum(formants, 0.0), count(formants, 0) {}

  int num_formants() const { return static_cast<int>(sum.size()); }
  void add(int formant, double abs_error);
  void merge(const MaeAccumulator& other);
  std::optional<double> mae(int formant) const;
};

struct TrackingResult {
  std::map<BroadClass, MaeAccumulator> by_class;  // silence never appears
  MaeAccumulator overall;                         // every scored frame
  // Gold-valid frames the tracker left without a value; not scored.
  int missing_predictions = 0;

  void merge(const TrackingResult& other);
};

/// Frame MAE grouped by broad class over frames where the gold formant is
/// valid. Silence frames and frames outside every interval are skipped.
/// Without a segmentation every frame counts towards `overall` only.
TrackingResult tracking_mae(const FormantTrack& pred, const FormantTrack& gold,
                            const std::optional<PhoneSegmentation>& segmentation);

/// |mean prediction over [start, end) - gold| per formant. Formants without
/// a gold value, or without any valid prediction in the interval, yield
/// nullopt.
std::vector<std::optional<double>> estimation_error(const FormantTrack& pred,
                                                    std::span<const std::optional<double>> gold, int start_frame,
                                                    int end_frame);

/// Single gold value per formant for a multi-point vowel table entry: the
/// 50% point.
std::array<std::optional<double>, 3> gold_point(const VowelTableRecord& record);

struct TransitionResult {
  MaeAccumulator cv;
  MaeAccumulator vc;
  int cv_windows = 0;
  int vc_windows = 0;
  int skipped = 0;  // boundaries too close to an utterance edge

  void merge(const TransitionResult& other);
};

/// Six-frame windows (three frames either side) around every boundary
/// where a consonant interval directly abuts a vowel interval. The boundary
/// frame b is the first frame of the right interval; the window is
/// b-3 .. b+2. Scored like `tracking_mae`.
TransitionResult transition_mae(const FormantTrack& pred, const FormantTrack& gold, const PhoneSegmentation& segmentation);

struct PolygonSample {
  std::string group;
  std::string vowel;
  const FormantTrack* track = nullptr;
  // Frames to average; the whole track when absent.
  std::optional<std::pair<int, int>> frames;
};

struct PolygonRow {
  std::string group;
  std::string vowel;
  double mean_f1 = 0.0;
  double mean_f2 = 0.0;
  int count = 0;  // utterances
};

/// Per (group, vowel): mean over utterances of each utterance's mean F1/F2
/// on frames where both are valid. Groups or vowels with no usable
/// utterance are omitted. Rows are sorted by group then vowel.
std::vector<PolygonRow> vowel_polygon(std::span<const PolygonSample> samples);

/// `group,vowel,mean_f1,mean_f2,count`.
std::string polygon_csv(std::span<const PolygonRow> rows);

struct EvalReport {
  TrackingResult tracking;
  MaeAccumulator estimation;
  TransitionResult transitions;
  int utterances = 0;

  explicit EvalReport(int formants = 3);
  void merge(const EvalReport& other);
};

/// Scores one utterance with all protocols. Estimation uses every vowel
/// interval with the gold value at its middle frame, or the whole utterance
/// (gold middle frame) when there is no segmentation.
EvalReport evaluate_utterance(const FormantTrack& pred, const FormantTrack& gold,
                              const std::optional<PhoneSegmentation>& segmentation);

/// Aligned text tables.
std::string format_report(const EvalReport& report);
/// `protocol,row,formant,mae_hz,count`; empty cells have a blank mae_hz.
std::string report_csv(const EvalReport& report);

}  // namespace formant
