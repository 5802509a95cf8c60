#include "formant/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "formant/csv.hpp"

namespace formant {

void MaeAccumulator::add(int formant, double abs_error) {
  sum.at(formant) += abs_error;
  ++count.at(formant);
}

void MaeAccumulator::merge(const MaeAccumulator& other) {
  if (sum.empty()) {
    *this = other;
    return;
  }
  if (other.num_formants() != num_formants()) throw std::invalid_argument("formant count mismatch");
  for (int k = 0; k < num_formants(); ++k) {
    sum[k] += other.sum[k];
    count[k] += other.count[k];
  }
}

std::optional<double> MaeAccumulator::mae(int formant) const {
  if (count.at(formant) == 0) return std::nullopt;
  return sum[formant] / count[formant];
}

void TrackingResult::merge(const TrackingResult& other) {
  for (const auto& [c, acc] : other.by_class) by_class[c].merge(acc);
  overall.merge(other.overall);
  missing_predictions += other.missing_predictions;
}

void TransitionResult::merge(const TransitionResult& other) {
  cv.merge(other.cv);
  vc.merge(other.vc);
  cv_windows += other.cv_windows;
  vc_windows += other.vc_windows;
  skipped += other.skipped;
}

namespace {

void check_aligned(const FormantTrack& pred, const FormantTrack& gold) {
  if (pred.num_frames() != gold.num_frames()) {
    throw std::invalid_argument("prediction has " + std::to_string(pred.num_frames()) + " frames, gold has " +
                                std::to_string(gold.num_frames()));
  }
  if (pred.num_formants() != gold.num_formants()) throw std::invalid_argument("formant count mismatch");
}

// Scores frame t into `acc`; returns the number of gold-valid formants
// without a prediction.
int score_frame(const FormantTrack& pred, const FormantTrack& gold, int t, MaeAccumulator& acc) {
  int missing = 0;
  for (int k = 0; k < gold.num_formants(); ++k) {
    if (!gold.valid(t, k)) continue;
    if (!pred.valid(t, k)) {
      ++missing;
      continue;
    }
    acc.add(k, std::abs(pred.values(t, k) - gold.values(t, k)));
  }
  return missing;
}

}  // namespace

TrackingResult tracking_mae(const FormantTrack& pred, const FormantTrack& gold,
                            const std::optional<PhoneSegmentation>& segmentation) {
  check_aligned(pred, gold);
  const int T = gold.num_frames();
  const int K = gold.num_formants();
  TrackingResult out;
  out.overall = MaeAccumulator(K);
  if (!segmentation) {
    for (int t = 0; t < T; ++t) out.missing_predictions += score_frame(pred, gold, t, out.overall);
    return out;
  }
  segmentation->validate(T);
  for (const auto& interval : segmentation->intervals) {
    if (interval.broad_class == BroadClass::silence) continue;
    auto [it, inserted] = out.by_class.try_emplace(interval.broad_class, K);
    for (int t = interval.start_frame; t < interval.end_frame; ++t) {
      out.missing_predictions += score_frame(pred, gold, t, it->second);
      score_frame(pred, gold, t, out.overall);
    }
  }
  return out;
}

std::vector<std::optional<double>> estimation_error(const FormantTrack& pred,
                                                    std::span<const std::optional<double>> gold, int start_frame,
                                                    int end_frame) {
  if (start_frame >= end_frame) throw std::invalid_argument("empty vowel interval");
  if (start_frame < 0 || end_frame > pred.num_frames()) throw std::out_of_range("vowel interval outside the track");
  const int K = std::min(pred.num_formants(), static_cast<int>(gold.size()));
  std::vector<std::optional<double>> out(gold.size());
  for (int k = 0; k < K; ++k) {
    if (!gold[k]) continue;
    double sum = 0.0;
    int n = 0;
    for (int t = start_frame; t < end_frame; ++t) {
      if (!pred.valid(t, k)) continue;
      sum += pred.values(t, k);
      ++n;
    }
    if (n > 0) out[k] = std::abs(sum / n - *gold[k]);
  }
  return out;
}

std::array<std::optional<double>, 3> gold_point(const VowelTableRecord& record) { return record.at50; }

TransitionResult transition_mae(const FormantTrack& pred, const FormantTrack& gold,
                                const PhoneSegmentation& segmentation) {
  check_aligned(pred, gold);
  const int T = gold.num_frames();
  segmentation.validate(T);
  TransitionResult out;
  out.cv = MaeAccumulator(gold.num_formants());
  out.vc = MaeAccumulator(gold.num_formants());
  const auto& iv = segmentation.intervals;
  for (std::size_t i = 0; i + 1 < iv.size(); ++i) {
    const PhoneInterval& left = iv[i];
    const PhoneInterval& right = iv[i + 1];
    if (left.end_frame != right.start_frame) continue;
    const bool cv = is_consonant(left.broad_class) && right.broad_class == BroadClass::vowel;
    const bool vc = left.broad_class == BroadClass::vowel && is_consonant(right.broad_class);
    if (!cv && !vc) continue;
    const int b = right.start_frame;
    if (b - 3 < 0 || b + 3 > T) {
      ++out.skipped;
      continue;
    }
    MaeAccumulator& acc = cv ? out.cv : out.vc;
    ++(cv ? out.cv_windows : out.vc_windows);
    for (int t = b - 3; t < b + 3; ++t) score_frame(pred, gold, t, acc);
  }
  return out;
}

std::vector<PolygonRow> vowel_polygon(std::span<const PolygonSample> samples) {
  struct Sums {
    double f1 = 0.0;
    double f2 = 0.0;
    int count = 0;
  };
  std::map<std::pair<std::string, std::string>, Sums> cells;
  for (const auto& s : samples) {
    if (s.track == nullptr) throw std::invalid_argument("polygon sample without a track");
    const FormantTrack& tr = *s.track;
    if (tr.num_formants() < 2) throw std::invalid_argument("polygon needs F1 and F2");
    const auto [start, end] = s.frames.value_or(std::pair{0, tr.num_frames()});
    double f1 = 0.0;
    double f2 = 0.0;
    int n = 0;
    for (int t = std::max(0, start); t < std::min(end, tr.num_frames()); ++t) {
      if (!tr.valid(t, 0) || !tr.valid(t, 1)) continue;
      f1 += tr.values(t, 0);
      f2 += tr.values(t, 1);
      ++n;
    }
    if (n == 0) continue;
    Sums& cell = cells[{s.group, s.vowel}];
    cell.f1 += f1 / n;
    cell.f2 += f2 / n;
    ++cell.count;
  }
  std::vector<PolygonRow> rows;
  for (const auto& [key, cell] : cells) {
    rows.push_back({key.first, key.second, cell.f1 / cell.count, cell.f2 / cell.count, cell.count});
  }
  return rows;
}

std::string polygon_csv(std::span<const PolygonRow> rows) {
  std::string out = "group,vowel,mean_f1,mean_f2,count\n";
  for (const auto& r : rows) {
    out += r.group + "," + r.vowel + "," + csv::format_number(r.mean_f1) + "," + csv::format_number(r.mean_f2) + "," +
           std::to_string(r.count) + "\n";
  }
  return out;
}

EvalReport::EvalReport(int formants) : estimation(formants) {
  tracking.overall = MaeAccumulator(formants);
  transitions.cv = MaeAccumulator(formants);
  transitions.vc = MaeAccumulator(formants);
}

void EvalReport::merge(const EvalReport& other) {
  tracking.merge(other.tracking);
  estimation.merge(other.estimation);
  transitions.merge(other.transitions);
  utterances += other.utterances;
}

EvalReport evaluate_utterance(const FormantTrack& pred, const FormantTrack& gold,
                              const std::optional<PhoneSegmentation>& segmentation) {
  const int K = gold.num_formants();
  EvalReport report(K);
  report.utterances = 1;
  report.tracking = tracking_mae(pred, gold, segmentation);

  auto estimate = [&](int start, int end) {
    const int mid = (start + end - 1) / 2;
    std::vector<std::optional<double>> points(K);
    for (int k = 0; k < K; ++k) {
      if (gold.valid(mid, k)) points[k] = gold.values(mid, k);
    }
    const auto errors = estimation_error(pred, points, start, end);
    for (int k = 0; k < K; ++k) {
      if (errors[k]) report.estimation.add(k, *errors[k]);
    }
  };
  if (segmentation) {
    for (const auto& iv : segmentation->intervals) {
      if (iv.broad_class == BroadClass::vowel) estimate(iv.start_frame, iv.end_frame);
    }
    report.transitions = transition_mae(pred, gold, *segmentation);
  } else if (gold.num_frames() > 0) {
    estimate(0, gold.num_frames());
  }
  return report;
}

namespace {

std::string cell_text(const MaeAccumulator& acc, int k) {
  if (acc.sum.empty()) return "-";
  const auto v = acc.mae(k);
  if (!v) return "-";
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << *v << " (" << acc.count[k] << ")";
  return s.str();
}

void table(std::ostringstream& out, const std::string& title,
           const std::vector<std::pair<std::string, const MaeAccumulator*>>& rows, int K) {
  out << title << '\n';
  out << std::left << std::setw(12) << "";
  for (int k = 1; k <= K; ++k) out << std::right << std::setw(18) << ("F" + std::to_string(k) + " MAE Hz (n)");
  out << '\n';
  for (const auto& [name, acc] : rows) {
    out << std::left << std::setw(12) << name;
    for (int k = 0; k < K; ++k) out << std::right << std::setw(18) << cell_text(*acc, k);
    out << '\n';
  }
  out << '\n';
}

}  // namespace

std::string format_report(const EvalReport& r) {
  const int K = r.estimation.num_formants();
  std::ostringstream out;
  out << "utterances: " << r.utterances << '\n' << '\n';
  std::vector<std::pair<std::string, const MaeAccumulator*>> rows;
  for (const auto& [c, acc] : r.tracking.by_class) rows.emplace_back(to_string(c), &acc);
  rows.emplace_back("all", &r.tracking.overall);
  table(out, "Frame tracking", rows, K);
  if (r.tracking.missing_predictions > 0) {
    out << "gold formants without a prediction: " << r.tracking.missing_predictions << "\n\n";
  }
  table(out, "Segment estimation", {{"vowel", &r.estimation}}, K);
  table(out, "Transitions (6-frame windows)", {{"CV", &r.transitions.cv}, {"VC", &r.transitions.vc}}, K);
  out << "windows: CV " << r.transitions.cv_windows << ", VC " << r.transitions.vc_windows << ", skipped "
      << r.transitions.skipped << '\n';
  return out.str();
}

std::string report_csv(const EvalReport& r) {
  const int K = r.estimation.num_formants();
  std::string out = "protocol,row,formant,mae_hz,count\n";
  auto emit = [&](const std::string& protocol, const std::string& row, const MaeAccumulator& acc) {
    for (int k = 0; k < K; ++k) {
      const auto v = acc.sum.empty() ? std::nullopt : acc.mae(k);
      out += protocol + "," + row + ",F" + std::to_string(k + 1) + "," + (v ? csv::format_number(*v) : "") + "," +
             std::to_string(acc.sum.empty() ? 0 : acc.count[k]) + "\n";
    }
  };
  for (const auto& [c, acc] : r.tracking.by_class) emit("tracking", to_string(c), acc);
  emit("tracking", "all", r.tracking.overall);
  emit("estimation", "vowel", r.estimation);
  emit("transition", "CV", r.transitions.cv);
  emit("transition", "VC", r.transitions.vc);
  return out;
}

}  // namespace formant
