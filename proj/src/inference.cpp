#include "formant/inference.hpp"

#include <sstream>
#include <stdexcept>

#include "formant/csv.hpp"

namespace formant {

int argmax_in_range(const Eigen::Ref<const Eigen::VectorXd>& column, int lo, int hi) {
  lo = std::max(lo, 0);
  hi = std::min(hi, static_cast<int>(column.size()) - 1);
  if (lo > hi) return -1;
  int best = lo;
  for (int d = lo + 1; d <= hi; ++d) {
    if (column[d] > column[best]) best = d;
  }
  return best;
}

std::vector<TrackResult> track_batch(std::span<const Spectrogram> spectrograms, const FormantModel& model,
                                     const BinSpec& bins) {
  if (bins.num_bins != model.num_bins()) throw std::invalid_argument("bin spec does not match the model");
  if (spectrograms.empty()) return {};
  const int D = model.num_bins();
  const int K = model.num_heads();
  std::vector<int> frames;
  for (const auto& s : spectrograms) {
    if (s.num_bins() != D) {
      throw std::invalid_argument("spectrogram has " + std::to_string(s.num_bins()) + " bins, model expects " +
                                  std::to_string(D));
    }
    frames.push_back(s.num_frames());
  }
  const auto layout = nn::GridLayout::from_frames(D, frames);
  const auto frame_layout = layout.frames_only();
  const int F = layout.total_frames();

  nn::Matrix<float> input(1, layout.positions());
  for (std::size_t u = 0; u < spectrograms.size(); ++u) {
    const auto& v = spectrograms[u].values;
    input.middleCols(static_cast<Eigen::Index>(layout.offsets[u]) * D, v.size()) = v.cast<float>().reshaped(1, v.size());
  }
  const nn::Matrix<float> latent = model.encode(input, layout);

  std::vector<int> lower(F, -1);
  std::vector<Eigen::MatrixXd> maps(K);
  Eigen::MatrixXi chosen(F, K);
  BoolMatrix degenerate = BoolMatrix::Constant(F, K, false);
  for (int k = 0; k < K; ++k) {
    nn::Matrix<float> z = latent;
    mask_lower_inplace(z, lower);
    const nn::Matrix<float> logits = model.head_logits(k, z, frame_layout);
    maps[k] = model.head_probabilities(k, logits, lower).cast<double>();
    for (int f = 0; f < F; ++f) {
      int b = argmax_in_range(maps[k].col(f), lower[f] + 1, model.upper_bin(k));
      if (b < 0) {
        b = D - 1;
        degenerate(f, k) = true;
      }
      chosen(f, k) = b;
      lower[f] = b;
    }
  }

  std::vector<TrackResult> out(spectrograms.size());
  for (std::size_t u = 0; u < spectrograms.size(); ++u) {
    const int T = frames[u];
    const int off = layout.offsets[u];
    auto& r = out[u];
    r.track = FormantTrack(T, K);
    for (int t = 0; t < T; ++t) {
      for (int k = 0; k < K; ++k) {
        r.track.values(t, k) = dequantize(chosen(off + t, k), bins);
        r.track.valid(t, k) = !degenerate(off + t, k);
      }
    }
    r.heatmaps.maps.resize(K);
    for (int k = 0; k < K; ++k) r.heatmaps.maps[k] = maps[k].middleCols(off, T);
  }
  return out;
}

TrackResult track(const Spectrogram& s, const FormantModel& model, const BinSpec& bins) {
  return std::move(track_batch(std::span(&s, 1), model, bins).front());
}

Eigen::MatrixXd aggregate_heatmaps(const HeatmapSet& h) {
  if (h.maps.empty()) throw std::invalid_argument("empty heatmap set");
  Eigen::MatrixXd out = h.maps.front();
  for (std::size_t k = 1; k < h.maps.size(); ++k) {
    if (h.maps[k].rows() != out.rows() || h.maps[k].cols() != out.cols()) {
      throw std::invalid_argument("heatmaps differ in shape");
    }
    out = out.cwiseMax(h.maps[k]);
  }
  return out;
}

void write_track_csv(const std::filesystem::path& path, const FormantTrack& track, const FrameGeometry& geometry,
                     int sample_rate) {
  std::ostringstream out;
  out << "frame,time_sec";
  for (int k = 0; k < track.num_formants(); ++k) out << ",f" << k + 1 << "_hz";
  out << ",valid\n";
  for (int t = 0; t < track.num_frames(); ++t) {
    out << t << ',' << csv::format_number(static_cast<double>(t) * geometry.hop / sample_rate);
    for (int k = 0; k < track.num_formants(); ++k) out << ',' << csv::format_number(track.values(t, k));
    out << ',' << (track.valid.row(t).all() ? 1 : 0) << '\n';
  }
  csv::write_atomically(path, out.str());
}

FormantTrack read_track_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  std::vector<int> cols;
  for (int k = 1;; ++k) {
    const int c = table.column("f" + std::to_string(k) + "_hz");
    if (c < 0) break;
    cols.push_back(c);
  }
  if (cols.empty()) throw csv::ParseError(path, 1, "no formant columns");
  const int frame_col = table.require_column("frame");
  const int valid_col = table.require_column("valid");
  FormantTrack track(static_cast<int>(table.rows.size()), static_cast<int>(cols.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (csv::parse_int(table.rows[r][frame_col], table, r) != static_cast<long>(r)) {
      throw csv::ParseError(path, table.lines[r], "frames must be consecutive from 0");
    }
    const bool valid = csv::parse_flag(table.rows[r][valid_col], table, r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      track.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
          csv::parse_double(table.rows[r][cols[k]], table, r);
      track.valid(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = valid;
    }
  }
  return track;
}

void write_heatmap_csv(const std::filesystem::path& path, const Eigen::MatrixXd& map, const BinSpec& bins) {
  std::ostringstream out;
  out << "bin,hz";
  for (Eigen::Index t = 0; t < map.cols(); ++t) out << ",frame_" << t;
  out << '\n';
  for (Eigen::Index d = 0; d < map.rows(); ++d) {
    out << d << ',' << csv::format_number(d * bins.bin_width);
    for (Eigen::Index t = 0; t < map.cols(); ++t) out << ',' << csv::format_number(map(d, t));
    out << '\n';
  }
  csv::write_atomically(path, out.str());
}

}  // namespace formant
