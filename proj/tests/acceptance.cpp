// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails. Pass criterion numbers as arguments to run a
// subset, e.g. `acceptance 4 5 9`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "eval_fixtures.hpp"
#include "formant/baseline.hpp"
#include "formant/eval.hpp"
#include "formant/inference.hpp"
#include "formant/model.hpp"
#include "formant/synth.hpp"
#include "formant/train.hpp"
#include "gradcheck.hpp"

using namespace formant;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Shared recipe for the two training criteria.
constexpr int kTrainUtterances = 500;
constexpr int kEpochs = 12;
constexpr double kMaxMinutes = 60.0;

TrainConfig training_recipe(double speedup, std::uint64_t seed) {
  TrainConfig tc;
  tc.initial_lr = 1e-3;
  tc.anneal_epochs = {8};
  tc.max_epochs = kEpochs;
  tc.speedup_probability = speedup;
  tc.seed = seed;
  tc.max_minutes = kMaxMinutes;
  return tc;
}

const std::vector<LabeledUtterance>& adult_training_set() {
  static const auto c = generate_corpus(kTrainUtterances, {{Cohort::men, 1.0}, {Cohort::women, 1.0}}, 100);
  return c;
}

const std::vector<LabeledUtterance>& adult_heldout_set() {
  static const auto c = generate_corpus(100, {{Cohort::men, 1.0}, {Cohort::women, 1.0}}, 300);
  return c;
}

const std::vector<LabeledUtterance>& children_set() {
  static const auto c = generate_corpus(100, {{Cohort::children, 1.0}}, 200);
  return c;
}

struct TrainedRun {
  std::vector<double> adult_mae;
  std::vector<double> children_mae;
  int epochs = 0;
  double minutes = 0.0;
};

// Each (speedup, seed) pair is trained at most once.
const TrainedRun& trained(double speedup, std::uint64_t seed) {
  static std::map<std::pair<double, std::uint64_t>, TrainedRun> runs;
  auto it = runs.find({speedup, seed});
  if (it != runs.end()) return it->second;
  const TrainConfig tc = training_recipe(speedup, seed);
  FormantModel model(ModelConfig{}, seed);
  Trainer trainer(model, tc);
  const auto start = Clock::now();
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochMetrics& m) {
    std::printf("  [train speedup=%.1f seed=%llu] epoch %d loss %.3f (%.0f s)\n", speedup,
                static_cast<unsigned long long>(seed), m.epoch, m.train_loss, m.seconds);
    std::fflush(stdout);
  };
  const auto metrics = train(trainer, adult_training_set(), {}, hooks);
  TrainedRun run;
  run.minutes = seconds_since(start) / 60.0;
  run.epochs = static_cast<int>(metrics.size());
  run.adult_mae = probe_mae(model, adult_heldout_set(), tc.spectrogram);
  run.children_mae = probe_mae(model, children_set(), tc.spectrogram);
  std::printf("  [train speedup=%.1f seed=%llu] held-out MAE %.1f %.1f %.1f, children %.1f %.1f %.1f\n", speedup,
              static_cast<unsigned long long>(seed), run.adult_mae[0], run.adult_mae[1], run.adult_mae[2],
              run.children_mae[0], run.children_mae[1], run.children_mae[2]);
  return runs.emplace(std::pair{speedup, seed}, run).first->second;
}

Outcome same_cohort_accuracy() {
  const auto& run = trained(0.2, 1);
  bool ok = run.epochs <= 100 && run.minutes <= kMaxMinutes;
  for (double v : run.adult_mae) ok = ok && v <= 60.0;
  return {ok, fmt("%d utterances, %d epochs, %.1f min; MAE F1 %.1f F2 %.1f F3 %.1f Hz (limit 60)", kTrainUtterances,
                  run.epochs, run.minutes, run.adult_mae[0], run.adult_mae[1], run.adult_mae[2])};
}

Outcome speedup_helps_children() {
  double with = 0.0, without = 0.0;
  for (std::uint64_t seed : {1, 2}) {
    with += trained(0.2, seed).children_mae[0] / 2.0;
    without += trained(0.0, seed).children_mae[0] / 2.0;
  }
  return {with < without, fmt("children F1 MAE %.1f Hz with speed-up vs %.1f Hz without (mean of 2 seeds)", with,
                              without)};
}

Outcome lpc_on_synthetic_vowels() {
  CorpusOptions opts;
  opts.duration = 0.3;
  opts.base_bandwidths = {50.0, 70.0, 80.0};
  opts.bandwidth_jitter = 20.0;  // every bandwidth stays at or below 100 Hz
  const auto corpus = generate_corpus(50, {{Cohort::men, 1.0}, {Cohort::women, 1.0}}, 400, opts);
  const auto start = Clock::now();
  std::vector<int> hits(3, 0);
  int frames = 0;
  for (const auto& u : corpus) {
    const auto est = lpc_track(u.wave, opts.geometry);
    for (int t = 0; t < est.num_frames(); ++t) {
      ++frames;
      for (int k = 0; k < 3; ++k) {
        if (est.valid(t, k) && std::abs(est.values(t, k) - u.track.values(t, k)) <= 30.0) ++hits[k];
      }
    }
  }
  const double secs = seconds_since(start);
  bool ok = secs < 10.0;
  std::ostringstream out;
  for (int k = 0; k < 3; ++k) {
    const double share = 100.0 * hits[k] / frames;
    ok = ok && share >= 90.0;
    out << "F" << k + 1 << " " << fmt("%.1f", share) << "% ";
  }
  out << "of " << frames << " frames within 30 Hz (limit 90%), " << fmt("%.2f", secs) << " s (limit 10)";
  return {ok, out.str()};
}

Spectrogram random_spectrogram(int bins, int frames, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Spectrogram s;
  s.values = Eigen::MatrixXd::NullaryExpr(bins, frames, [&] { return normal(rng); });
  return s;
}

// Criteria 4 and 5 share the same 1000 random models.
struct RandomModelSweep {
  int models = 0;
  long frames = 0;
  long ordered = 0;
  double worst_column_error = 0.0;
  double seconds = 0.0;
};

const RandomModelSweep& random_model_sweep() {
  static const RandomModelSweep sweep = [] {
    RandomModelSweep r;
    const auto start = Clock::now();
    const ModelConfig cfg;
    std::mt19937_64 rng(77);
    for (int m = 0; m < 1000; ++m) {
      const FormantModel model(cfg, 5000 + m);
      const auto res = track(random_spectrogram(cfg.bins.num_bins, 4, rng), model, cfg.bins);
      for (int t = 0; t < res.track.num_frames(); ++t) {
        ++r.frames;
        const auto& v = res.track.values;
        if (res.track.valid.row(t).all() && v(t, 0) < v(t, 1) && v(t, 1) < v(t, 2)) ++r.ordered;
      }
      for (const auto& map : res.heatmaps.maps) {
        r.worst_column_error = std::max(r.worst_column_error, (map.colwise().sum().array() - 1.0).abs().maxCoeff());
      }
      ++r.models;
    }
    r.seconds = seconds_since(start);
    return r;
  }();
  return sweep;
}

Outcome ordered_predictions() {
  const auto& s = random_model_sweep();
  return {s.ordered == s.frames,
          fmt("%ld of %ld frames over %d random models have b1 < b2 < b3 (%.0f s)", s.ordered, s.frames, s.models,
              s.seconds)};
}

Outcome normalized_columns() {
  const auto& s = random_model_sweep();
  return {s.worst_column_error <= 1e-5,
          fmt("largest |column sum - 1| = %.2e over %d models (limit 1e-5)", s.worst_column_error, s.models)};
}

Outcome quantizer_roundtrip() {
  const BinSpec bins;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> hz(0.0, bins.max_hz);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double f = hz(rng);
    worst = std::max(worst, std::abs(dequantize(quantize(f, bins), bins) - f));
  }
  return {worst <= 15.625, fmt("max roundtrip error %.4f Hz over 1e5 frequencies (limit 15.625)", worst)};
}

Outcome learning_rate_schedule() {
  const TrainConfig tc;
  const double a = learning_rate(tc, 0), b = learning_rate(tc, 300), c = learning_rate(tc, 600);
  return {a == 1e-4 && b == 1e-5 && c == 1e-6, fmt("lr(0)=%g lr(300)=%g lr(600)=%g", a, b, c)};
}

Outcome speedup_augmentation() {
  SyntheticSpec spec;
  spec.f0 = 100.0;
  spec.formants = {400.0, 1500.0, 2500.0};
  spec.duration = 0.3;
  auto [w, tr] = synthesize(spec);
  LabeledUtterance u;
  u.id = "a";
  u.wave = w;
  u.track = tr;
  TrainConfig cfg;
  cfg.speedup_probability = 1.0;
  std::mt19937_64 rng(8);
  const auto fast = augment_sample(u, cfg, BinSpec{}, rng);
  bool labels = fast.track.num_frames() > 0;
  for (int j = 0; j < fast.track.num_frames(); ++j) {
    labels = labels && fast.track.valid(j, 0) && fast.track.values(j, 0) == 2.0 * tr.values(2 * j, 0) &&
             fast.track.values(j, 0) == 800.0;
  }
  const auto s = front_end(fast.wave, cfg.spectrogram);
  const double target = 800.0 / BinSpec{}.bin_width;
  double worst = 0.0;
  for (int t = 0; t < s.num_frames(); ++t) {
    // F1 region of the sped-up spectrum, below the doubled F2.
    const int peak = argmax_in_range(s.values.col(t), 1, static_cast<int>(2000.0 / BinSpec{}.bin_width));
    worst = std::max(worst, std::abs(peak - target));
  }
  return {labels && worst <= 1.0,
          fmt("labels exactly doubled: %s; argmax within %.2f bins of 800 Hz over %d frames (limit 1)",
              labels ? "yes" : "no", worst, s.num_frames())};
}

Outcome no_decoder_bias() {
  const FormantModel model(ModelConfig{}, 1);
  int decoder_entries = 0, biases = 0;
  std::int64_t head_params = 0;
  for (const auto& [name, shape] : parameter_inventory(model)) {
    if (!name.starts_with("decoder.")) continue;
    ++decoder_entries;
    if (name.find("bias") != std::string::npos) ++biases;
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    if (name.find("running") == std::string::npos) head_params += n;
  }
  return {biases == 0 && decoder_entries > 0,
          fmt("%d bias tensors among %d decoder entries (%lld weights)", biases, decoder_entries,
              static_cast<long long>(head_params))};
}

Outcome overfit_one_utterance() {
  SyntheticSpec spec = sample_spec(Cohort::women, 11);
  spec.duration = 0.1;
  auto [w, tr] = synthesize(spec);
  TrainConfig tc;
  tc.initial_lr = 1e-3;
  FormantModel model(ModelConfig{}, 3);
  Trainer trainer(model, tc);
  const Spectrogram s = front_end(w, tc.spectrogram);
  Batch batch;
  batch.spectrograms = {&s};
  batch.tracks = {&tr};
  const BinSpec bins = model.config().bins;
  const auto start = Clock::now();
  auto mae_bins = [&] {
    const auto pred = track(s, model, bins).track;
    double worst = 0.0;
    for (int k = 0; k < 3; ++k) {
      double sum = 0.0;
      for (int t = 0; t < tr.num_frames(); ++t) sum += std::abs(pred.values(t, k) - tr.values(t, k));
      worst = std::max(worst, sum / tr.num_frames() / bins.bin_width);
    }
    return worst;
  };
  int steps = 0;
  double mae = mae_bins();
  while (steps < 2000 && mae >= 2.0) {
    trainer.step(batch, tc.initial_lr);
    ++steps;
    if (steps % 25 == 0) mae = mae_bins();
  }
  const double secs = seconds_since(start);
  return {mae < 2.0 && secs < 300.0,
          fmt("worst per-formant MAE %.2f bins after %d steps, %.1f s (limits 2 bins, 2000 steps, 300 s)", mae, steps,
              secs)};
}

Outcome golden_fixture() {
  const auto f = formant::testing::three_frame_fixture();
  const auto r = evaluate_utterance(f.pred, f.gold, f.segmentation);
  const auto& stop = r.tracking.by_class.at(BroadClass::stop);
  const auto& vowel = r.tracking.by_class.at(BroadClass::vowel);
  const bool ok = *stop.mae(0) == 31.25 && *stop.mae(1) == 0.0 && *stop.mae(2) == 31.25 && *vowel.mae(0) == 21.25 &&
                  *vowel.mae(1) == 36.875 && *vowel.mae(2) == 25.0 && *r.tracking.overall.mae(0) == 73.75 / 3 &&
                  *r.tracking.overall.mae(1) == 73.75 / 3 && *r.tracking.overall.mae(2) == 28.125 &&
                  *r.estimation.mae(0) == 11.25 && *r.estimation.mae(1) == 4.375 && *r.estimation.mae(2) == 37.5 &&
                  r.transitions.skipped == 1;
  return {ok, fmt("vowel tracking %.4g/%.4g/%.4g, estimation %.4g/%.4g/%.4g", *vowel.mae(0), *vowel.mae(1),
                  *vowel.mae(2), *r.estimation.mae(0), *r.estimation.mae(1), *r.estimation.mae(2))};
}

Outcome gradient_check() {
  ModelConfig cfg = ModelConfig::for_bins(17);
  cfg.encoder.dropout_rate = 0.0;
  cfg.decoder.dropout_rate = 0.0;
  FormantNet<double> net(cfg, 31);
  const auto mb = formant::testing::random_minibatch(cfg, {5}, 32);
  const auto r = formant::testing::gradcheck(net, mb.view(), 10, 33);
  return {r.max_rel_error < 1e-4 && r.checked > 0,
          fmt("max relative error %.2e over %d entries, worst %s (limit 1e-4)", r.max_rel_error, r.checked,
              r.worst.c_str())};
}

struct Criterion {
  int number;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "same-cohort accuracy after training", same_cohort_accuracy},
      {2, "speed-up augmentation helps children F1", speedup_helps_children},
      {3, "LPC baseline on synthetic vowels", lpc_on_synthetic_vowels},
      {4, "ordered predictions for random models", ordered_predictions},
      {5, "decoder columns are distributions", normalized_columns},
      {6, "quantizer roundtrip", quantizer_roundtrip},
      {7, "learning-rate schedule", learning_rate_schedule},
      {8, "speed-up augmentation of a 400 Hz F1", speedup_augmentation},
      {9, "decoder heads have no bias", no_decoder_bias},
      {10, "overfit one utterance", overfit_one_utterance},
      {11, "evaluation golden fixture", golden_fixture},
      {12, "gradient check on the miniature model", gradient_check},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.number)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", c.number, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
