#pragma once

// Central-difference check of the hand-written backward pass on a small
// double-precision network.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "formant/model.hpp"
#include "formant/train.hpp"

namespace formant::testing {

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::string worst;
  int checked = 0;
};

struct MiniBatch {
  std::vector<Spectrogram> spectrograms;
  std::vector<FormantTrack> tracks;

  Batch view() const {
    Batch b;
    for (const auto& s : spectrograms) b.spectrograms.push_back(&s);
    for (const auto& t : tracks) b.tracks.push_back(&t);
    return b;
  }
};

/// Random spectrograms with ascending labels; one label is left invalid so
/// the prediction-conditioned path is exercised too.
inline MiniBatch random_minibatch(const ModelConfig& cfg, std::vector<int> frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const int D = cfg.bins.num_bins;
  const int K = cfg.decoder.num_heads;
  MiniBatch mb;
  for (int T : frames) {
    Spectrogram s;
    s.values.resize(D, T);
    for (Eigen::Index i = 0; i < s.values.size(); ++i) s.values.data()[i] = normal(rng);
    FormantTrack tr(T, K);
    for (int t = 0; t < T; ++t) {
      std::vector<int> bins(D);
      for (int d = 0; d < D; ++d) bins[d] = d;
      std::shuffle(bins.begin(), bins.end(), rng);
      std::sort(bins.begin(), bins.begin() + K);
      for (int k = 0; k < K; ++k) {
        tr.values(t, k) = bins[k] * cfg.bins.bin_width;
        tr.valid(t, k) = true;
      }
    }
    tr.valid(T / 2, 0) = false;
    mb.spectrograms.push_back(std::move(s));
    mb.tracks.push_back(std::move(tr));
  }
  return mb;
}

/// Compares analytic gradients with central differences for up to
/// `per_tensor` entries of every parameter tensor. The relative error is
/// |a - n| / max(|a| + |n|, 1e-6).
inline GradcheckResult gradcheck(FormantNet<double>& net, const Batch& batch, int per_tensor, std::uint64_t seed,
                                 double step = 1e-6) {
  BatchOptions options;
  options.smoothing_epsilon = 0.1;
  nn::Rng rng(seed);
  net.zero_grad();
  forward_backward(net, batch, options, rng);

  GradcheckResult out;
  std::mt19937_64 pick(seed + 1);
  for (auto* p : net.parameters()) {
    const Eigen::Index n = p->value.size();
    std::vector<Eigen::Index> idx(n);
    for (Eigen::Index i = 0; i < n; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), pick);
    idx.resize(std::min<Eigen::Index>(n, per_tensor));
    for (Eigen::Index i : idx) {
      double& w = p->value.data()[i];
      const double saved = w;
      w = saved + step;
      const double up = batch_loss(net, batch, options, rng);
      w = saved - step;
      const double down = batch_loss(net, batch, options, rng);
      w = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p->grad.data()[i];
      const double rel = std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
      ++out.checked;
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

}  // namespace formant::testing
