#include "formant/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "formant/csv.hpp"
#include "formant/inference.hpp"

namespace formant {

std::string to_string(MaskSource m) {
  return m == MaskSource::ground_truth ? "ground_truth" : "scheduled";
}

MaskSource mask_source_from_string(const std::string& name) {
  if (name == "ground_truth") return MaskSource::ground_truth;
  if (name == "scheduled") return MaskSource::scheduled;
  throw std::invalid_argument("unknown mask source '" + name + "' (expected ground_truth or scheduled)");
}

void TrainConfig::validate() const {
  std::vector<std::string> problems;
  auto check = [&](bool ok, const char* what) {
    if (!ok) problems.emplace_back(what);
  };
  auto probability = [](double p) { return p >= 0.0 && p <= 1.0; };
  check(initial_lr > 0.0, "initial_lr must be positive");
  check(anneal_factor > 0.0, "anneal_factor must be positive");
  check(std::is_sorted(anneal_epochs.begin(), anneal_epochs.end()) &&
            std::all_of(anneal_epochs.begin(), anneal_epochs.end(), [](int e) { return e >= 0; }),
        "anneal_epochs must be non-negative and ascending");
  check(smoothing_epsilon >= 0.0 && smoothing_epsilon < 1.0, "smoothing_epsilon must be in [0, 1)");
  check(probability(speedup_probability), "speedup_probability must be in [0, 1]");
  check(batch_size > 0, "batch_size must be positive");
  check(max_epochs >= 0, "max_epochs must be non-negative");
  check(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1 must be in [0, 1)");
  check(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2 must be in [0, 1)");
  check(adam_epsilon > 0.0, "adam_epsilon must be positive");
  check(probability(scheduled_sampling), "scheduled_sampling must be in [0, 1]");
  check(probability(noise_probability), "noise_probability must be in [0, 1]");
  check(std::isfinite(noise_snr_db), "noise_snr_db must be finite");
  check(probability(crop_probability), "crop_probability must be in [0, 1]");
  check(crop_min_frames >= 1, "crop_min_frames must be at least 1");
  check(probability(reversal_probability), "reversal_probability must be in [0, 1]");
  check(max_minutes >= 0.0, "max_minutes must be non-negative");
  check(checkpoint_every >= 0, "checkpoint_every must be non-negative");
  if (!problems.empty()) {
    std::string msg = "invalid training config:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw std::invalid_argument(msg);
  }
  spectrogram.validate();
}

double learning_rate(const TrainConfig& cfg, int epoch) {
  if (epoch < 0) throw std::invalid_argument("epoch must be non-negative");
  const auto passed = std::count_if(cfg.anneal_epochs.begin(), cfg.anneal_epochs.end(), [&](int e) { return e <= epoch; });
  return cfg.initial_lr / std::pow(cfg.anneal_factor, static_cast<double>(passed));
}

double loss(const HeatmapSet& heatmaps, const TargetHeatmapSet& targets) {
  if (heatmaps.num_heads() != targets.num_formants()) throw std::invalid_argument("head count does not match targets");
  const int K = targets.num_formants();
  double total = 0.0;
  int columns = 0;
  for (int k = 0; k < K; ++k) {
    const auto& p = heatmaps.maps[k];
    const auto& q = targets.targets[k];
    if (p.rows() != q.rows() || p.cols() != q.cols() || targets.included.rows() != p.cols()) {
      throw std::invalid_argument("heatmap shape does not match targets");
    }
    for (Eigen::Index t = 0; t < p.cols(); ++t) {
      if (!targets.included(t, k)) continue;
      double ce = 0.0;
      for (Eigen::Index d = 0; d < p.rows(); ++d) {
        if (q(d, t) > 0.0) ce -= q(d, t) * std::log(std::max(p(d, t), std::numeric_limits<double>::min()));
      }
      total += ce;
      ++columns;
    }
  }
  if (columns == 0) throw std::invalid_argument("no supervised frames");
  return total / columns;
}

namespace {

bool coin(std::mt19937_64& rng, double p) {
  return p > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

LabeledUtterance augment(const LabeledUtterance& u, const TrainConfig& cfg, const BinSpec& bins, std::mt19937_64& rng,
                         bool& changed) {
  changed = false;
  LabeledUtterance out = u;
  const FrameGeometry& g = cfg.spectrogram.geometry;
  if (coin(rng, cfg.speedup_probability)) {
    changed = true;
    out.wave = speed_up_by_two(u.wave);
    const int frames = g.num_frames(out.wave.size());
    const int K = u.track.num_formants();
    FormantTrack track(frames, K);
    for (int j = 0; j < frames; ++j) {
      const int old = 2 * j;
      if (old >= u.track.num_frames()) break;
      for (int k = 0; k < K; ++k) {
        const double doubled = 2.0 * u.track.values(old, k);
        track.values(j, k) = doubled;
        track.valid(j, k) = u.track.valid(old, k) && doubled <= bins.max_hz;
      }
    }
    out.track = std::move(track);
    out.segmentation.reset();
  }
  if (coin(rng, cfg.noise_probability)) {
    changed = true;
    double energy = 0.0;
    for (double s : out.wave.samples) energy += s * s;
    const double rms = std::sqrt(energy / std::max<std::size_t>(1, out.wave.size()));
    std::normal_distribution<double> noise(0.0, rms * std::pow(10.0, -cfg.noise_snr_db / 20.0));
    for (double& s : out.wave.samples) s += noise(rng);
  }
  const int T = out.track.num_frames();
  if (T > cfg.crop_min_frames && coin(rng, cfg.crop_probability)) {
    changed = true;
    const int len = std::uniform_int_distribution<int>(cfg.crop_min_frames, T)(rng);
    const int start = std::uniform_int_distribution<int>(0, T - len)(rng);
    const std::size_t first = static_cast<std::size_t>(start) * g.hop;
    const std::size_t last = static_cast<std::size_t>(start + len - 1) * g.hop + g.window_length;
    out.wave.samples.assign(out.wave.samples.begin() + static_cast<std::ptrdiff_t>(first),
                            out.wave.samples.begin() + static_cast<std::ptrdiff_t>(last));
    FormantTrack track;
    track.values = out.track.values.middleRows(start, len);
    track.valid = out.track.valid.middleRows(start, len);
    out.track = std::move(track);
    out.segmentation.reset();
  }
  return out;
}

// Frame labels as bins; -1 where missing or outside the bin axis.
Eigen::MatrixXi label_bins(const std::vector<const FormantTrack*>& tracks, const std::vector<int>& offsets,
                           int K, const BinSpec& bins) {
  Eigen::MatrixXi out = Eigen::MatrixXi::Constant(offsets.back(), K, -1);
  for (std::size_t u = 0; u < tracks.size(); ++u) {
    const FormantTrack& tr = *tracks[u];
    for (int t = 0; t < tr.num_frames(); ++t) {
      for (int k = 0; k < K; ++k) {
        const double hz = tr.values(t, k);
        if (tr.valid(t, k) && hz >= 0.0 && hz <= bins.max_hz) out(offsets[u] + t, k) = quantize(hz, bins);
      }
    }
  }
  return out;
}

template <typename S>
BatchOutcome run_batch(FormantNet<S>& net, const Batch& batch, const BatchOptions& options, nn::Rng& rng,
                       bool backward) {
  using Matrix = nn::Matrix<S>;
  if (batch.spectrograms.empty() || batch.spectrograms.size() != batch.tracks.size()) {
    throw std::invalid_argument("batch needs one track per spectrogram");
  }
  const int D = net.num_bins();
  const int K = net.num_heads();
  std::vector<int> frames;
  for (std::size_t u = 0; u < batch.spectrograms.size(); ++u) {
    const Spectrogram& s = *batch.spectrograms[u];
    if (s.num_bins() != D) throw std::invalid_argument("spectrogram bin count does not match the model");
    if (batch.tracks[u]->num_frames() != s.num_frames()) {
      throw std::invalid_argument("track frames do not align with spectrogram frames");
    }
    if (batch.tracks[u]->num_formants() != K) throw std::invalid_argument("track formant count does not match heads");
    frames.push_back(s.num_frames());
  }
  const auto layout = nn::GridLayout::from_frames(D, frames);
  const auto frame_layout = layout.frames_only();
  const int F = layout.total_frames();

  Matrix input(1, layout.positions());
  for (std::size_t u = 0; u < frames.size(); ++u) {
    const auto& v = batch.spectrograms[u]->values;
    input.middleCols(static_cast<Eigen::Index>(layout.offsets[u]) * D, v.size()) =
        v.template cast<S>().reshaped(1, v.size());
  }
  typename FormantNet<S>::EncoderCache encoder_cache;
  const Matrix latent = net.encode_train(input, layout, rng, encoder_cache);
  const Eigen::MatrixXi labels = label_bins(batch.tracks, layout.offsets, K, net.config().bins);

  const S base = static_cast<S>(options.smoothing_epsilon / D);
  const S peak = static_cast<S>(1.0 - options.smoothing_epsilon);
  std::vector<std::vector<int>> lowers(K);
  std::vector<typename FormantNet<S>::HeadCache> caches(K);
  std::vector<Matrix> dlogits(K);
  std::vector<int> lower(F, -1);
  double total = 0.0;
  int columns = 0;
  for (int k = 0; k < K; ++k) {
    lowers[k] = lower;
    Matrix z = latent;
    mask_lower_inplace(z, lower);
    const Matrix logits = net.head_logits_train(k, z, frame_layout, rng, caches[k]);
    const Matrix p = net.head_probabilities(k, logits, lower);
    const int hi = net.upper_bin(k);
    Matrix grad = Matrix::Zero(D, F);
    for (int f = 0; f < F; ++f) {
      const int lo = lower[f] + 1;
      const int b = labels(f, k);
      if (b < lo || b > hi) continue;
      // Smoothed target renormalized over the admissible bins.
      const int n = hi - lo + 1;
      const S norm = base * n + peak;
      auto g = grad.col(f).segment(lo, n);
      g = p.col(f).segment(lo, n);
      g.array() -= base / norm;
      g[b - lo] -= peak / norm;
      double ce = 0.0;
      for (int d = lo; d <= hi; ++d) {
        const double q = (base + (d == b ? peak : S(0))) / norm;
        if (q > 0.0) ce -= q * std::log(std::max<double>(p(d, f), std::numeric_limits<S>::min()));
      }
      total += ce;
      ++columns;
    }
    dlogits[k] = std::move(grad);

    if (k + 1 < K) {
      for (int f = 0; f < F; ++f) {
        int predicted = lower[f] + 1;
        for (int d = lower[f] + 2; d <= hi; ++d) {
          if (p(d, f) > p(predicted, f)) predicted = d;
        }
        int chosen = labels(f, k);
        if (chosen < 0) chosen = predicted;
        if (options.mask_source == MaskSource::scheduled && coin(rng, options.scheduled_sampling)) chosen = predicted;
        lower[f] = std::min(std::max(chosen, lower[f] + 1), hi);
      }
    }
  }
  BatchOutcome out;
  out.columns = columns;
  out.loss = columns > 0 ? total / columns : 0.0;
  if (!backward || columns == 0) return out;

  Matrix dlatent = Matrix::Zero(D, F);
  for (int k = 0; k < K; ++k) {
    dlogits[k] /= static_cast<S>(columns);
    Matrix dz = net.head_backward(k, dlogits[k], frame_layout, caches[k]);
    mask_lower_inplace(dz, lowers[k]);
    dlatent += dz;
  }
  net.encode_backward(dlatent, layout, encoder_cache);
  return out;
}

}  // namespace

LabeledUtterance augment_sample(const LabeledUtterance& u, const TrainConfig& cfg, const BinSpec& bins,
                                std::mt19937_64& rng) {
  bool changed = false;
  return augment(u, cfg, bins, rng, changed);
}

HeatmapSet teacher_forced_forward(const FormantModel& model, const Spectrogram& s, const FormantTrack& track) {
  if (track.num_frames() != s.num_frames()) throw std::invalid_argument("track frames do not align with spectrogram");
  const int K = model.num_heads();
  if (track.num_formants() != K) throw std::invalid_argument("track formant count does not match heads");
  const Eigen::MatrixXd z = encode(model, s);
  const int T = s.num_frames();
  const Eigen::MatrixXi labels = label_bins({&track}, {0, T}, K, model.config().bins);
  HeatmapSet out;
  std::vector<int> lower(T, -1);
  for (int k = 0; k < K; ++k) {
    out.maps.push_back(decode_head(model, k, mask_lower(z, lower), lower));
    const int hi = model.upper_bin(k);
    for (int t = 0; t < T; ++t) {
      int chosen = labels(t, k);
      if (chosen < 0) chosen = argmax_in_range(out.maps[k].col(t), lower[t] + 1, hi);
      lower[t] = std::min(std::max(chosen, lower[t] + 1), hi);
    }
  }
  return out;
}

template <typename S>
BatchOutcome forward_backward(FormantNet<S>& net, const Batch& batch, const BatchOptions& options, nn::Rng& rng) {
  return run_batch(net, batch, options, rng, true);
}

template <typename S>
double batch_loss(FormantNet<S>& net, const Batch& batch, const BatchOptions& options, nn::Rng& rng) {
  const BatchOutcome out = run_batch(net, batch, options, rng, false);
  if (out.columns == 0) throw std::invalid_argument("no supervised frames");
  return out.loss;
}

template BatchOutcome forward_backward<float>(FormantNet<float>&, const Batch&, const BatchOptions&, nn::Rng&);
template BatchOutcome forward_backward<double>(FormantNet<double>&, const Batch&, const BatchOptions&, nn::Rng&);
template double batch_loss<float>(FormantNet<float>&, const Batch&, const BatchOptions&, nn::Rng&);
template double batch_loss<double>(FormantNet<double>&, const Batch&, const BatchOptions&, nn::Rng&);

std::vector<double> probe_mae(const FormantModel& model, std::span<const LabeledUtterance> probe,
                              const SpectrogramConfig& spectrogram) {
  const int K = model.num_heads();
  std::vector<double> sum(K, 0.0);
  std::vector<int> count(K, 0);
  constexpr std::size_t chunk = 16;
  for (std::size_t start = 0; start < probe.size(); start += chunk) {
    std::vector<Spectrogram> specs;
    std::vector<const FormantTrack*> tracks;
    for (std::size_t i = start; i < std::min(probe.size(), start + chunk); ++i) {
      if (spectrogram.geometry.num_frames(probe[i].wave.size()) == 0) continue;
      specs.push_back(front_end(probe[i].wave, spectrogram));
      tracks.push_back(&probe[i].track);
    }
    if (specs.empty()) continue;
    const auto results = track_batch(specs, model, model.config().bins);
    for (std::size_t i = 0; i < results.size(); ++i) {
      const FormantTrack& gold = *tracks[i];
      const FormantTrack& pred = results[i].track;
      for (int t = 0; t < std::min(gold.num_frames(), pred.num_frames()); ++t) {
        for (int k = 0; k < K; ++k) {
          if (!gold.valid(t, k) || !pred.valid(t, k)) continue;
          sum[k] += std::abs(pred.values(t, k) - gold.values(t, k));
          ++count[k];
        }
      }
    }
  }
  std::vector<double> out(K);
  for (int k = 0; k < K; ++k) out[k] = count[k] ? sum[k] / count[k] : std::numeric_limits<double>::quiet_NaN();
  return out;
}

Trainer::Trainer(FormantModel& model, TrainConfig cfg) : model_(model), cfg_(std::move(cfg)), rng_(cfg_.seed) {
  cfg_.validate();
  if (cfg_.spectrogram.geometry.num_bins() != model_.num_bins()) {
    throw std::invalid_argument("spectrogram geometry does not match the model's bin count");
  }
  for (auto* p : model_.parameters()) {
    m_.push_back(nn::Matrix<float>::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(nn::Matrix<float>::Zero(p->value.rows(), p->value.cols()));
  }
}

const Spectrogram& Trainer::cached_spectrogram(const LabeledUtterance& u) {
  auto it = cache_.find(&u);
  if (it == cache_.end()) it = cache_.emplace(&u, front_end(u.wave, cfg_.spectrogram)).first;
  return it->second;
}

double Trainer::step(const Batch& batch, double lr) {
  model_.zero_grad();
  const BatchOptions options{cfg_.smoothing_epsilon, cfg_.mask_source, cfg_.scheduled_sampling};
  const BatchOutcome outcome = forward_backward(model_, batch, options, rng_);
  if (outcome.columns == 0) return 0.0;
  if (!std::isfinite(outcome.loss)) {
    throw std::runtime_error("training diverged: non-finite loss at step " + std::to_string(step_ + 1) +
                             " (lr " + csv::format_number(lr) + ")");
  }
  ++step_;
  const double b1 = cfg_.adam_beta1;
  const double b2 = cfg_.adam_beta2;
  const auto c1 = static_cast<float>(1.0 - std::pow(b1, static_cast<double>(step_)));
  const auto c2 = static_cast<float>(1.0 - std::pow(b2, static_cast<double>(step_)));
  const auto eps = static_cast<float>(cfg_.adam_epsilon);
  const auto rate = static_cast<float>(lr);
  auto params = model_.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = params[i]->grad.array();
    m_[i].array() = static_cast<float>(b1) * m_[i].array() + static_cast<float>(1.0 - b1) * g;
    v_[i].array() = static_cast<float>(b2) * v_[i].array() + static_cast<float>(1.0 - b2) * g.square();
    params[i]->value.array() -= rate * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
  }
  return outcome.loss;
}

EpochMetrics Trainer::train_epoch(std::span<const LabeledUtterance> data, int epoch,
                                  std::span<const LabeledUtterance> probe) {
  if (data.empty()) throw std::invalid_argument("training set is empty");
  const auto started = std::chrono::steady_clock::now();
  EpochMetrics metrics;
  metrics.epoch = epoch;
  metrics.lr = learning_rate(cfg_, epoch);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_);
  const auto& geometry = cfg_.spectrogram.geometry;

  double weighted = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg_.batch_size));
    std::vector<Spectrogram> owned_specs;
    std::vector<FormantTrack> owned_tracks;
    owned_specs.reserve(end - start);
    owned_tracks.reserve(end - start);
    Batch batch;
    for (std::size_t i = start; i < end; ++i) {
      const LabeledUtterance& u = data[order[i]];
      bool changed = false;
      LabeledUtterance aug = augment(u, cfg_, model_.config().bins, rng_, changed);
      const bool reverse = coin(rng_, cfg_.reversal_probability);
      if (geometry.num_frames(aug.wave.size()) == 0) continue;
      if (!changed && !reverse) {
        batch.spectrograms.push_back(&cached_spectrogram(u));
        batch.tracks.push_back(&u.track);
        continue;
      }
      Spectrogram s = changed ? front_end(aug.wave, cfg_.spectrogram) : cached_spectrogram(u);
      if (reverse) {
        s.values = s.values.rowwise().reverse().eval();
        aug.track.values = aug.track.values.colwise().reverse().eval();
        aug.track.valid = aug.track.valid.colwise().reverse().eval();
      }
      owned_specs.push_back(std::move(s));
      owned_tracks.push_back(std::move(aug.track));
      batch.spectrograms.push_back(&owned_specs.back());
      batch.tracks.push_back(&owned_tracks.back());
    }
    if (batch.spectrograms.empty()) continue;
    weighted += step(batch, metrics.lr);
    ++batches;
  }
  metrics.train_loss = batches ? weighted / static_cast<double>(batches) : 0.0;
  if (!probe.empty()) metrics.probe_mae = probe_mae(model_, probe, cfg_.spectrogram);
  epochs_done_ = epoch + 1;
  metrics.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return metrics;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  Checkpoint ckpt = model_to_checkpoint(model_);
  auto params = model_.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::vector<std::int64_t> shape{m_[i].rows(), m_[i].cols()};
    Tensor m{shape, std::vector<float>(m_[i].data(), m_[i].data() + m_[i].size())};
    Tensor v{shape, std::vector<float>(v_[i].data(), v_[i].data() + v_[i].size())};
    ckpt.tensors["optimizer.m." + params[i]->name] = std::move(m);
    ckpt.tensors["optimizer.v." + params[i]->name] = std::move(v);
  }
  std::ostringstream rng_state;
  rng_state << rng_;
  ckpt.metadata["optimizer_step"] = std::to_string(step_);
  ckpt.metadata["epochs_done"] = std::to_string(epochs_done_);
  ckpt.metadata["rng_state"] = rng_state.str();

  const std::filesystem::path tmp = path.string() + ".tmp";
  write_checkpoint(tmp, ckpt);
  std::filesystem::rename(tmp, path);
}

void Trainer::load_checkpoint(const std::filesystem::path& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  FormantModel loaded = model_from_checkpoint(ckpt);
  if (!(loaded.config() == model_.config())) throw std::runtime_error("checkpoint model config differs from the trainer's");
  auto dst = model_.parameters();
  auto src = loaded.parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->value = src[i]->value;
  auto dst_buf = model_.buffers();
  auto src_buf = loaded.buffers();
  for (std::size_t i = 0; i < dst_buf.size(); ++i) *dst_buf[i].value = *src_buf[i].value;

  for (std::size_t i = 0; i < dst.size(); ++i) {
    for (auto [prefix, target] : {std::pair{"optimizer.m.", &m_[i]}, std::pair{"optimizer.v.", &v_[i]}}) {
      const auto it = ckpt.tensors.find(prefix + dst[i]->name);
      if (it == ckpt.tensors.end()) throw std::runtime_error("checkpoint lacks optimizer state for " + dst[i]->name);
      if (static_cast<Eigen::Index>(it->second.data.size()) != target->size()) {
        throw std::runtime_error("optimizer state shape mismatch for " + dst[i]->name);
      }
      *target = Eigen::Map<const nn::Matrix<float>>(it->second.data.data(), target->rows(), target->cols());
    }
  }
  auto meta = [&](const char* key) {
    const auto it = ckpt.metadata.find(key);
    if (it == ckpt.metadata.end()) throw std::runtime_error(std::string("checkpoint lacks '") + key + "'");
    return it->second;
  };
  step_ = std::stoll(meta("optimizer_step"));
  epochs_done_ = std::stoi(meta("epochs_done"));
  std::istringstream rng_state(meta("rng_state"));
  rng_state >> rng_;
  cache_.clear();
}

std::vector<EpochMetrics> train(Trainer& trainer, std::span<const LabeledUtterance> data,
                                std::span<const LabeledUtterance> probe, const TrainHooks& hooks) {
  const TrainConfig& cfg = trainer.config();
  const auto started = std::chrono::steady_clock::now();
  const int K = trainer.model().num_heads();
  std::ofstream log;
  if (!hooks.metrics_csv.empty()) {
    const bool fresh = trainer.epochs_done() == 0 || !std::filesystem::exists(hooks.metrics_csv);
    log.open(hooks.metrics_csv, fresh ? std::ios::trunc : std::ios::app);
    if (!log) throw std::runtime_error("cannot write metrics log " + hooks.metrics_csv.string());
    if (fresh) {
      log << "epoch,lr,train_loss";
      for (int k = 1; k <= K; ++k) log << ",probe_mae_f" << k;
      log << '\n';
    }
  }
  if (!hooks.checkpoint_dir.empty()) std::filesystem::create_directories(hooks.checkpoint_dir);

  std::vector<EpochMetrics> history;
  for (int epoch = trainer.epochs_done(); epoch < cfg.max_epochs; ++epoch) {
    EpochMetrics m = trainer.train_epoch(data, epoch, probe);
    if (log.is_open()) {
      log << m.epoch << ',' << csv::format_number(m.lr) << ',' << csv::format_number(m.train_loss);
      for (int k = 0; k < K; ++k) {
        log << ',' << (k < static_cast<int>(m.probe_mae.size()) ? csv::format_number(m.probe_mae[k]) : "");
      }
      log << '\n' << std::flush;
    }
    const bool last = epoch + 1 == cfg.max_epochs;
    if (!hooks.checkpoint_dir.empty() && ((cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) || last)) {
      trainer.save_checkpoint(hooks.checkpoint_dir / "last.safetensors");
    }
    if (hooks.on_epoch) hooks.on_epoch(m);
    history.push_back(std::move(m));
    const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() / 60.0;
    if (cfg.max_minutes > 0.0 && minutes >= cfg.max_minutes) {
      if (!hooks.checkpoint_dir.empty() && !last) trainer.save_checkpoint(hooks.checkpoint_dir / "last.safetensors");
      break;
    }
  }
  return history;
}

}  // namespace formant
