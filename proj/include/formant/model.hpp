#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "formant/dsp.hpp"
#include "formant/nn.hpp"
#include "formant/quantizer.hpp"

namespace formant {

/// Shared 2D convolutional encoder. Each layer except the last is
/// conv -> batch norm -> ReLU -> dropout with a residual branch (identity, or
/// a 1x1 projection when the channel count changes). The last layer is a
/// biased conv plus projection and yields the one-channel latent map.
struct EncoderConfig {
  std::vector<int> channel_plan{1, 16, 32, 64, 128, 128, 64, 32, 1};
  int kernel = 3;
  double dropout_rate = 0.2;
  bool uses_batchnorm = true;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

/// Per-formant head: time convolution with bins as channels,
/// D -> bottleneck -> D, identity residual from the (masked) latent to the
/// logits, softmax over bins. No bias terms.
struct DecoderConfig {
  std::vector<int> bottleneck_plan{257, 64, 257};
  int time_kernel = 3;
  bool bias_enabled = false;
  int num_heads = 3;
  double dropout_rate = 0.2;
  bool uses_batchnorm = true;

  void validate(int num_bins) const;
  bool operator==(const DecoderConfig&) const = default;
};

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  BinSpec bins;

  void validate() const;
  /// Canonical network scaled to `num_bins` bins (used by tests and small
  /// experiments); the bottleneck width is kept unless it exceeds the bins.
  static ModelConfig for_bins(int num_bins);
  bool operator==(const ModelConfig&) const = default;
};

/// K maps of D x T, each column a distribution over bins.
struct HeatmapSet {
  std::vector<Eigen::MatrixXd> maps;

  int num_heads() const { return static_cast<int>(maps.size()); }
};

/// Zeroes rows 0..lower_bins[t] (inclusive) of column t. Negative entries
/// leave the column untouched.
template <typename Derived>
void mask_lower_inplace(Eigen::MatrixBase<Derived>& z, const std::vector<int>& lower_bins) {
  for (Eigen::Index t = 0; t < z.cols(); ++t) {
    const int b = lower_bins[t];
    if (b >= 0) z.col(t).head(std::min<Eigen::Index>(b + 1, z.rows())).setZero();
  }
}

Eigen::MatrixXd mask_lower(const Eigen::MatrixXd& z, const std::vector<int>& lower_bins);

template <typename S>
class FormantNet {
 public:
  using Matrix = nn::Matrix<S>;

  struct BlockCache {
    Matrix input;
    typename nn::BatchNorm<S>::Cache bn;
    Matrix gate;
  };
  struct EncoderCache {
    std::vector<BlockCache> blocks;
    Matrix final_input;
  };
  struct HeadCache {
    Matrix input;
    typename nn::BatchNorm<S>::Cache bn;
    Matrix gate;
    Matrix hidden;
  };

  explicit FormantNet(ModelConfig cfg, std::uint64_t seed = 0);

  const ModelConfig& config() const { return cfg_; }
  int num_bins() const { return cfg_.bins.num_bins; }
  int num_heads() const { return cfg_.decoder.num_heads; }

  /// Highest bin head k may predict; the bins above are reserved for the
  /// heads that follow, which keeps predictions strictly increasing.
  int upper_bin(int head) const { return num_bins() - num_heads() + head; }

  /// `input` is 1 x positions on `layout` (layout.bins == num_bins()).
  /// Returns the latent as D x total_frames.
  Matrix encode(const Matrix& input, const nn::GridLayout& layout) const;
  Matrix encode_train(const Matrix& input, const nn::GridLayout& layout, nn::Rng& rng, EncoderCache& cache);
  /// Accumulates encoder gradients from dL/dlatent (D x total_frames).
  void encode_backward(const Matrix& dlatent, const nn::GridLayout& layout, EncoderCache& cache);

  /// Head k on a masked latent (D x F, `frames` has bins == 1). Returns the
  /// logits; `lower[f]` is the masked bin for the column (-1 for none).
  Matrix head_logits(int head, const Matrix& z_masked, const nn::GridLayout& frames) const;
  Matrix head_logits_train(int head, const Matrix& z_masked, const nn::GridLayout& frames, nn::Rng& rng,
                           HeadCache& cache);
  /// Returns dL/dz_masked given dL/dlogits.
  Matrix head_backward(int head, const Matrix& dlogits, const nn::GridLayout& frames, HeadCache& cache);

  /// Softmax of head-k logits restricted to (lower[f], upper_bin(k)].
  Matrix head_probabilities(int head, const Matrix& logits, const std::vector<int>& lower) const;

  std::vector<nn::Parameter<S>*> parameters();
  std::vector<nn::Parameter<S>*> encoder_parameters();
  std::vector<nn::Parameter<S>*> head_parameters(int head);
  std::vector<nn::Buffer<S>> buffers();
  std::size_t parameter_count() const;
  void zero_grad();

  /// Converts parameters and buffers to another scalar type.
  template <typename T>
  FormantNet<T> cast() const;

 private:
  struct EncoderBlock {
    nn::Conv<S> conv;
    std::optional<nn::BatchNorm<S>> bn;
    std::optional<nn::Conv<S>> projection;
  };
  struct FinalBlock {
    nn::Conv<S> conv;
    std::optional<nn::Conv<S>> projection;
  };
  struct Head {
    nn::Conv<S> expand;  // D -> bottleneck
    std::optional<nn::BatchNorm<S>> bn;
    nn::Conv<S> restore;  // bottleneck -> D
  };

  ModelConfig cfg_;
  std::vector<EncoderBlock> blocks_;
  FinalBlock final_;
  std::vector<Head> heads_;
};

template <typename S>
template <typename T>
FormantNet<T> FormantNet<S>::cast() const {
  FormantNet<T> out(cfg_, 0);
  auto& self = const_cast<FormantNet<S>&>(*this);
  auto src = self.parameters();
  auto dst = out.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value.template cast<T>();
  auto src_buf = self.buffers();
  auto dst_buf = out.buffers();
  for (std::size_t i = 0; i < src_buf.size(); ++i) *dst_buf[i].value = src_buf[i].value->template cast<T>();
  return out;
}

/// Single-precision model used for training and inference.
using FormantModel = FormantNet<float>;

/// Latent representation of one spectrogram (eval mode).
Eigen::MatrixXd encode(const FormantModel& model, const Spectrogram& s);

/// Head-k heatmap for a masked latent of one utterance (eval mode).
/// `lower_bins[t]` is the bin masked up to (-1 for none).
Eigen::MatrixXd decode_head(const FormantModel& model, int head, const Eigen::MatrixXd& z_masked,
                            const std::vector<int>& lower_bins);

/// Table of named parameter shapes, in checkpoint order.
std::vector<std::pair<std::string, std::vector<std::int64_t>>> parameter_inventory(const FormantModel& model);

// ---------------------------------------------------------------------------
// Checkpoints: a safetensors-compatible container (8-byte little-endian
// header length, JSON header mapping tensor names to dtype/shape/offsets,
// raw little-endian F32 payload). Configs travel in "__metadata__".

struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;
};

struct Checkpoint {
  std::map<std::string, Tensor> tensors;
  std::map<std::string, std::string> metadata;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

std::string encoder_config_to_json(const EncoderConfig& cfg);
std::string decoder_config_to_json(const DecoderConfig& cfg);
std::string bin_spec_to_json(const BinSpec& spec);
EncoderConfig encoder_config_from_json(const std::string& text);
DecoderConfig decoder_config_from_json(const std::string& text);
BinSpec bin_spec_from_json(const std::string& text);

/// Stores parameters ("encoder.block3.conv.weight", ...), batch-norm
/// buffers and the three config records.
Checkpoint model_to_checkpoint(const FormantModel& model);
/// Rebuilds a model, validating every tensor shape against the stored
/// configs. Missing, unexpected or mis-shaped tensors throw.
FormantModel model_from_checkpoint(const Checkpoint& ckpt);

void save_model(const std::filesystem::path& path, const FormantModel& model);
FormantModel load_model(const std::filesystem::path& path);

}  // namespace formant
