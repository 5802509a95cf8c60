#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "formant/data.hpp"
#include "formant/dsp.hpp"
#include "formant/model.hpp"
#include "formant/quantizer.hpp"

namespace formant {

enum class MaskSource {
  ground_truth,  // teacher forcing; predictions only where the label is missing
  scheduled,     // predictions replace labels with probability `scheduled_sampling`
};

std::string to_string(MaskSource m);
MaskSource mask_source_from_string(const std::string& name);

struct TrainConfig {
  double initial_lr = 1e-4;
  std::vector<int> anneal_epochs{300, 600};
  double anneal_factor = 10.0;
  double smoothing_epsilon = 0.1;
  double speedup_probability = 0.2;
  int batch_size = 8;
  int max_epochs = 700;
  std::uint64_t seed = 0;

  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  MaskSource mask_source = MaskSource::ground_truth;
  double scheduled_sampling = 0.0;

  // Optional augmentations, off by default.
  double noise_probability = 0.0;
  double noise_snr_db = 20.0;
  double crop_probability = 0.0;
  int crop_min_frames = 3;
  double reversal_probability = 0.0;

  SpectrogramConfig spectrogram;
  // Wall-clock budget for `train`; 0 disables it.
  double max_minutes = 0.0;
  int checkpoint_every = 0;

  void validate() const;
};

/// initial_lr / anneal_factor^(number of anneal epochs <= epoch).
double learning_rate(const TrainConfig& cfg, int epoch);

/// Mean cross-entropy over the included (frame, formant) columns.
/// Throws "no supervised frames" when nothing is included.
double loss(const HeatmapSet& heatmaps, const TargetHeatmapSet& targets);

/// Speed-up by two with probability `speedup_probability` (labels doubled,
/// frame j takes the label of old frame 2j, values above max_hz become
/// invalid), then the optional noise and crop transforms.
LabeledUtterance augment_sample(const LabeledUtterance& u, const TrainConfig& cfg, const BinSpec& bins,
                                std::mt19937_64& rng);

/// Label-conditioned forward pass (eval mode): head k sees the latent
/// masked at the labelled bin of formant k-1, or at the model's own
/// prediction where that label is missing.
HeatmapSet teacher_forced_forward(const FormantModel& model, const Spectrogram& s, const FormantTrack& track);

/// One supervised batch, ready for `forward_backward`.
struct Batch {
  std::vector<const Spectrogram*> spectrograms;
  std::vector<const FormantTrack*> tracks;
};

struct BatchOptions {
  double smoothing_epsilon = 0.1;
  MaskSource mask_source = MaskSource::ground_truth;
  double scheduled_sampling = 0.0;
};

struct BatchOutcome {
  double loss = 0.0;
  int columns = 0;  // included (frame, formant) pairs
};

/// Training-mode forward pass, loss and backward pass. Gradients are
/// accumulated into the parameters (call zero_grad first). Targets are the
/// smoothed label distributions restricted to each head's admissible bins.
template <typename S>
BatchOutcome forward_backward(FormantNet<S>& net, const Batch& batch, const BatchOptions& options, nn::Rng& rng);

/// Same loss without the backward pass (still in training mode).
template <typename S>
double batch_loss(FormantNet<S>& net, const Batch& batch, const BatchOptions& options, nn::Rng& rng);

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::vector<double> probe_mae;  // Hz per formant; empty without a probe set
  double seconds = 0.0;
};

/// Per-formant frame MAE (Hz) of greedy inference over valid labels.
std::vector<double> probe_mae(const FormantModel& model, std::span<const LabeledUtterance> probe,
                              const SpectrogramConfig& spectrogram);

class Trainer {
 public:
  Trainer(FormantModel& model, TrainConfig cfg);

  const TrainConfig& config() const { return cfg_; }
  const FormantModel& model() const { return model_; }
  int epochs_done() const { return epochs_done_; }
  std::int64_t steps() const { return step_; }

  /// One shuffled pass with augmentation and Adam updates.
  EpochMetrics train_epoch(std::span<const LabeledUtterance> data, int epoch,
                           std::span<const LabeledUtterance> probe = {});
  /// A single Adam update on `batch` at `lr`; returns the batch loss.
  double step(const Batch& batch, double lr);

  /// Model tensors plus Adam moments and progress counters.
  void save_checkpoint(const std::filesystem::path& path) const;
  void load_checkpoint(const std::filesystem::path& path);

 private:
  const Spectrogram& cached_spectrogram(const LabeledUtterance& u);

  FormantModel& model_;
  TrainConfig cfg_;
  nn::Rng rng_;
  std::vector<nn::Matrix<float>> m_;
  std::vector<nn::Matrix<float>> v_;
  std::int64_t step_ = 0;
  int epochs_done_ = 0;
  std::unordered_map<const LabeledUtterance*, Spectrogram> cache_;
};

struct TrainHooks {
  std::filesystem::path metrics_csv;     // empty: no log
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  std::function<void(const EpochMetrics&)> on_epoch;
};

/// Runs epochs from the trainer's current position up to max_epochs or the
/// time budget. Writes `epoch,lr,train_loss,probe_mae_f1,...` per epoch.
std::vector<EpochMetrics> train(Trainer& trainer, std::span<const LabeledUtterance> data,
                                std::span<const LabeledUtterance> probe, const TrainHooks& hooks = {});

}  // namespace formant
