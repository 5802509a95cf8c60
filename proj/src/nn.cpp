#include "formant/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace formant::nn {

GridLayout GridLayout::from_frames(int bins, std::vector<int> frames) {
  GridLayout g;
  g.bins = bins;
  g.frames = std::move(frames);
  g.offsets.assign(g.frames.size() + 1, 0);
  for (std::size_t u = 0; u < g.frames.size(); ++u) {
    if (g.frames[u] <= 0) throw std::invalid_argument("every utterance needs at least one frame");
    g.offsets[u + 1] = g.offsets[u] + g.frames[u];
  }
  return g;
}

namespace {

// Enumerates, per kernel tap, the contiguous column runs where output
// position p reads input position p + offset, one run per utterance. Runs
// ignore frame edges along frequency; `fix` receives the (output, input)
// column pairs inside the runs whose neighbour actually lies outside the
// frame and must be taken back out.
template <typename Run, typename Fix>
void visit_taps(const GridLayout& layout, int kernel_time, int kernel_freq, Run&& run, Fix&& fix) {
  const int bins = layout.bins;
  const int rt = kernel_time / 2;
  const int rf = kernel_freq / 2;
  std::vector<int> dst;
  std::vector<int> src;
  for (int it = 0; it < kernel_time; ++it) {
    const int dt = it - rt;
    for (int jf = 0; jf < kernel_freq; ++jf) {
      const int df = jf - rf;
      const int tap = it * kernel_freq + jf;
      const int offset = dt * bins + df;
      dst.clear();
      src.clear();
      for (int u = 0; u < layout.num_utterances(); ++u) {
        const int t0 = std::max(0, -dt);
        const int t1 = std::min(layout.frames[u], layout.frames[u] - dt);
        if (t1 <= t0) continue;
        int first = (layout.offsets[u] + t0) * bins;
        int last = (layout.offsets[u] + t1) * bins;  // exclusive
        // Drop the run ends that would step past the utterance.
        first += std::max(0, -df);
        last -= std::max(0, df);
        if (last <= first) continue;
        run(tap, first, first + offset, last - first);
        for (int t = t0; t < t1; ++t) {
          const int frame = (layout.offsets[u] + t) * bins;
          for (int d = 0; d < bins; ++d) {
            if (d + df >= 0 && d + df < bins) {
              d = std::max(d, bins - df - 1);
              continue;
            }
            const int p = frame + d;
            if (p < first || p >= last) continue;
            dst.push_back(p);
            src.push_back(p + offset);
          }
        }
      }
      if (!dst.empty()) fix(tap, dst, src);
    }
  }
}

}  // namespace

template <typename S>
Conv<S>::Conv(const std::string& name, int in_channels, int out_channels, int kernel_time, int kernel_freq, bool with_bias)
    : weight(name + ".weight", out_channels, static_cast<Eigen::Index>(in_channels) * kernel_time * kernel_freq),
      in_(in_channels),
      out_(out_channels),
      kernel_time_(kernel_time),
      kernel_freq_(kernel_freq) {
  if (kernel_time % 2 == 0 || kernel_freq % 2 == 0) throw std::invalid_argument("kernel sizes must be odd");
  if (with_bias) bias.emplace(name + ".bias", out_channels, 1);
}

template <typename S>
void Conv<S>::init(Rng& rng, double gain) {
  const double stddev = gain / std::sqrt(static_cast<double>(weight.value.cols()));
  std::normal_distribution<double> normal(0.0, stddev);
  for (Eigen::Index i = 0; i < weight.value.size(); ++i) weight.value.data()[i] = static_cast<S>(normal(rng));
  if (bias) bias->value.setZero();
}

template <typename S>
Matrix<S> Conv<S>::forward(const Matrix<S>& x, const GridLayout& layout) const {
  if (x.rows() != in_ || x.cols() != layout.positions()) throw std::invalid_argument(weight.name + ": input shape mismatch");
  Matrix<S> y = Matrix<S>::Zero(out_, x.cols());
  visit_taps(
      layout, kernel_time_, kernel_freq_,
      [&](int tap, int p, int q, int n) {
        y.middleCols(p, n).noalias() += weight.value.middleCols(tap * in_, in_) * x.middleCols(q, n);
      },
      [&](int tap, const std::vector<int>& p, const std::vector<int>& q) {
        y(Eigen::all, p) -= weight.value.middleCols(tap * in_, in_) * x(Eigen::all, q);
      });
  if (bias) y.colwise() += bias->value.col(0);
  return y;
}

template <typename S>
Matrix<S> Conv<S>::backward(const Matrix<S>& dy, const Matrix<S>& x, const GridLayout& layout) {
  if (bias) bias->grad.col(0) += dy.rowwise().sum();
  Matrix<S> dx = Matrix<S>::Zero(in_, x.cols());
  visit_taps(
      layout, kernel_time_, kernel_freq_,
      [&](int tap, int p, int q, int n) {
        weight.grad.middleCols(tap * in_, in_).noalias() += dy.middleCols(p, n) * x.middleCols(q, n).transpose();
        dx.middleCols(q, n).noalias() += weight.value.middleCols(tap * in_, in_).transpose() * dy.middleCols(p, n);
      },
      [&](int tap, const std::vector<int>& p, const std::vector<int>& q) {
        const Matrix<S> dy_edge = dy(Eigen::all, p);
        weight.grad.middleCols(tap * in_, in_) -= dy_edge * x(Eigen::all, q).transpose();
        dx(Eigen::all, q) -= weight.value.middleCols(tap * in_, in_).transpose() * dy_edge;
      });
  return dx;
}

template <typename S>
void Conv<S>::collect(std::vector<Parameter<S>*>& out) {
  out.push_back(&weight);
  if (bias) out.push_back(&*bias);
}

template <typename S>
BatchNorm<S>::BatchNorm(const std::string& name, int channels, bool shift, double momentum, double eps)
    : gamma(name + ".weight", channels, 1),
      running_mean(Matrix<S>::Zero(channels, 1)),
      running_var(Matrix<S>::Ones(channels, 1)),
      name_(name),
      momentum_(static_cast<S>(momentum)),
      eps_(static_cast<S>(eps)) {
  gamma.value.setOnes();
  if (shift) beta.emplace(name + ".bias", channels, 1);
}

template <typename S>
Matrix<S> BatchNorm<S>::forward(const Matrix<S>& x, Cache* cache) {
  const Eigen::Index n = x.cols();
  if (n < 2) throw std::invalid_argument(name_ + ": batch statistics need at least two positions");
  const Vector<S> mean = x.rowwise().mean();
  Matrix<S> normalized = x.colwise() - mean;
  const Vector<S> var = normalized.array().square().rowwise().mean().matrix();
  Vector<S> inv_std = (var.array() + eps_).rsqrt().matrix();
  running_mean.col(0) = (S(1) - momentum_) * running_mean.col(0) + momentum_ * mean;
  running_var.col(0) =
      (S(1) - momentum_) * running_var.col(0) + momentum_ * var * (static_cast<S>(n) / static_cast<S>(n - 1));
  normalized = inv_std.asDiagonal() * normalized;
  Matrix<S> y = gamma.value.col(0).asDiagonal() * normalized;
  if (beta) y.colwise() += beta->value.col(0);
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename S>
Matrix<S> BatchNorm<S>::infer(const Matrix<S>& x) const {
  const Vector<S> scale =
      gamma.value.col(0).cwiseProduct((running_var.col(0).array() + eps_).rsqrt().matrix());
  Matrix<S> y = scale.asDiagonal() * (x.colwise() - running_mean.col(0));
  if (beta) y.colwise() += beta->value.col(0);
  return y;
}

template <typename S>
Matrix<S> BatchNorm<S>::backward(const Matrix<S>& dy, const Cache& cache) {
  const auto& xhat = cache.normalized;
  const S n = static_cast<S>(dy.cols());
  gamma.grad.col(0) += dy.cwiseProduct(xhat).rowwise().sum();
  if (beta) beta->grad.col(0) += dy.rowwise().sum();
  const Matrix<S> dxhat = gamma.value.col(0).asDiagonal() * dy;
  const Vector<S> sum_dxhat = dxhat.rowwise().sum();
  const Vector<S> sum_dxhat_xhat = dxhat.cwiseProduct(xhat).rowwise().sum();
  Matrix<S> dx = n * dxhat;
  dx.colwise() -= sum_dxhat;
  dx -= sum_dxhat_xhat.asDiagonal() * xhat;
  return (cache.inv_std / n).asDiagonal() * dx;
}

template <typename S>
void BatchNorm<S>::collect(std::vector<Parameter<S>*>& out) {
  out.push_back(&gamma);
  if (beta) out.push_back(&*beta);
}

template <typename S>
void BatchNorm<S>::collect_buffers(std::vector<Buffer<S>>& out) {
  out.push_back({name_ + ".running_mean", &running_mean});
  out.push_back({name_ + ".running_var", &running_var});
}

template <typename S>
Matrix<S> relu_dropout_gate(const Matrix<S>& pre_activation, double rate, Mode mode, Rng* rng) {
  Matrix<S> gate = (pre_activation.array() > S(0)).template cast<S>().matrix();
  if (mode == Mode::eval || rate <= 0.0) return gate;
  if (!rng) throw std::invalid_argument("dropout in training mode needs a random generator");
  const S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
  constexpr double inv_2_53 = 1.0 / 9007199254740992.0;
  S* g = gate.data();
  for (Eigen::Index i = 0; i < gate.size(); ++i) {
    const double u = static_cast<double>((*rng)() >> 11) * inv_2_53;
    g[i] = u < rate ? S(0) : g[i] * keep_scale;
  }
  return gate;
}

template <typename S>
Matrix<S> masked_softmax(const Matrix<S>& logits, const std::vector<int>& lower, const std::vector<int>& upper) {
  const Eigen::Index rows = logits.rows();
  Matrix<S> p = Matrix<S>::Zero(rows, logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const int lo = std::max(0, lower[c]);
    const int hi = std::min(static_cast<int>(rows) - 1, upper[c]);
    if (lo > hi) {
      p(rows - 1, c) = S(1);
      continue;
    }
    auto seg = logits.col(c).segment(lo, hi - lo + 1);
    const S peak = seg.maxCoeff();
    auto out = p.col(c).segment(lo, hi - lo + 1);
    out = (seg.array() - peak).exp().matrix();
    out /= out.sum();
  }
  return p;
}

#define FORMANT_NN_INSTANTIATE(S)                                                                         \
  template class Conv<S>;                                                                                \
  template class BatchNorm<S>;                                                                           \
  template Matrix<S> relu_dropout_gate<S>(const Matrix<S>&, double, Mode, Rng*);                         \
  template Matrix<S> masked_softmax<S>(const Matrix<S>&, const std::vector<int>&, const std::vector<int>&);

FORMANT_NN_INSTANTIATE(float)
FORMANT_NN_INSTANTIATE(double)

#undef FORMANT_NN_INSTANTIATE

}  // namespace formant::nn
