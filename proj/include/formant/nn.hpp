#pragma once

// Minimal layer toolkit for the formant network: convolutions on a ragged
// (bin, frame) grid, batch normalization, dropout gates and a masked softmax.
// Every layer has an explicit backward pass; there is no autodiff.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace formant::nn {

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using Rng = std::mt19937_64;

enum class Mode { train, eval };

/// A batch of utterances of varying length sharing one bin axis. Activations
/// are stored channels x positions with position (offsets[u] + t) * bins + d,
/// so bins vary fastest and each frame is a contiguous block of columns.
struct GridLayout {
  int bins = 1;
  std::vector<int> frames;
  std::vector<int> offsets;  // prefix sums of `frames`, size frames.size() + 1

  static GridLayout from_frames(int bins, std::vector<int> frames);
  int num_utterances() const { return static_cast<int>(frames.size()); }
  int total_frames() const { return offsets.empty() ? 0 : offsets.back(); }
  Eigen::Index positions() const { return static_cast<Eigen::Index>(bins) * total_frames(); }
  /// Same utterances with every frame collapsed to a single position.
  GridLayout frames_only() const { return from_frames(1, frames); }
};

template <typename S>
struct Parameter {
  std::string name;
  Matrix<S> value;
  Matrix<S> grad;

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Matrix<S>::Zero(rows, cols)), grad(Matrix<S>::Zero(rows, cols)) {}
  void zero_grad() { grad.setZero(); }
};

/// Named non-trainable state (batch-norm running statistics).
template <typename S>
struct Buffer {
  std::string name;
  Matrix<S>* value;
};

/// Stride-1 same-padded convolution over the grid.
template <typename S>
class Conv {
 public:
  Conv() = default;
  Conv(const std::string& name, int in_channels, int out_channels, int kernel_time, int kernel_freq, bool bias);

  void init(Rng& rng, double gain);
  Matrix<S> forward(const Matrix<S>& x, const GridLayout& layout) const;
  /// Accumulates parameter gradients and returns dL/dx.
  Matrix<S> backward(const Matrix<S>& dy, const Matrix<S>& x, const GridLayout& layout);
  void collect(std::vector<Parameter<S>*>& out);

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

  Parameter<S> weight;
  std::optional<Parameter<S>> bias;

 private:
  int in_ = 0;
  int out_ = 0;
  int kernel_time_ = 1;
  int kernel_freq_ = 1;
};

/// Per-channel normalization over all positions of the batch. `shift`
/// controls whether a learned offset is applied after scaling.
template <typename S>
class BatchNorm {
 public:
  struct Cache {
    Matrix<S> normalized;
    Vector<S> inv_std;
  };

  BatchNorm() = default;
  BatchNorm(const std::string& name, int channels, bool shift, double momentum = 0.1, double eps = 1e-5);

  /// Training-mode normalization with batch statistics; updates the
  /// running estimates.
  Matrix<S> forward(const Matrix<S>& x, Cache* cache);
  /// Eval-mode normalization with the running estimates.
  Matrix<S> infer(const Matrix<S>& x) const;
  Matrix<S> backward(const Matrix<S>& dy, const Cache& cache);
  void collect(std::vector<Parameter<S>*>& out);
  void collect_buffers(std::vector<Buffer<S>>& out);

  Parameter<S> gamma;
  std::optional<Parameter<S>> beta;
  Matrix<S> running_mean;
  Matrix<S> running_var;

 private:
  std::string name_;
  S momentum_ = S(0.1);
  S eps_ = S(1e-5);
};

/// Element-wise gate for ReLU followed by inverted dropout: entries are 0
/// where the pre-activation is non-positive or the unit was dropped, and
/// 1 / (1 - rate) otherwise (1 in eval mode).
template <typename S>
Matrix<S> relu_dropout_gate(const Matrix<S>& pre_activation, double rate, Mode mode, Rng* rng);

/// Column-wise softmax restricted to rows [lower[c], upper[c]]; rows outside
/// the range get probability exactly zero.
template <typename S>
Matrix<S> masked_softmax(const Matrix<S>& logits, const std::vector<int>& lower, const std::vector<int>& upper);

}  // namespace formant::nn
