// Command-line front end: synth, train, track, eval, baseline, config.

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "formant/baseline.hpp"
#include "formant/config.hpp"
#include "formant/csv.hpp"
#include "formant/data.hpp"
#include "formant/eval.hpp"
#include "formant/inference.hpp"
#include "formant/model.hpp"
#include "formant/synth.hpp"
#include "formant/train.hpp"

namespace fs = std::filesystem;
using namespace formant;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
    app->add_option("--set", overrides, "override one config key (key=value), repeatable");
    app->add_option("--seed", seed, "random seed (run.seed)");
    app->add_option("--workers", workers, "worker threads (run.workers)")->check(CLI::PositiveNumber);
  }

  RunConfig load() const {
    RunConfig cfg;
    cfg.sync();
    if (!config_path.empty()) cfg = load_config(config_path);
    apply_overrides(cfg, overrides);
    if (seed) cfg.seed = *seed;
    if (workers) cfg.workers = *workers;
    cfg.sync();
    cfg.validate();
    return cfg;
  }
};

// Runs fn(i) for i in [0, n) on `workers` threads; the first exception is
// rethrown after all threads finish.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  const int count = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  std::vector<std::thread> threads;
  for (int t = 1; t < count; ++t) threads.emplace_back(body);
  body();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

// A sibling staging directory that replaces `target` on commit.
class StagingDir {
 public:
  explicit StagingDir(fs::path target) : target_(std::move(target)) {
    target_ = fs::absolute(target_).lexically_normal();
    if (target_.filename().empty()) target_ = target_.parent_path();
    std::random_device rd;
    path_ = target_.parent_path() / (target_.filename().string() + ".partial-" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~StagingDir() {
    std::error_code ec;
    if (!committed_) fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

  /// Moves every staged entry into the target directory.
  void commit() {
    fs::create_directories(target_);
    for (const auto& entry : fs::directory_iterator(path_)) {
      const fs::path dst = target_ / entry.path().filename();
      if (fs::is_directory(dst) && entry.is_directory()) fs::remove_all(dst);
      fs::rename(entry.path(), dst);
    }
    fs::remove_all(path_);
    committed_ = true;
  }

 private:
  fs::path target_;
  fs::path path_;
  bool committed_ = false;
};

struct Input {
  std::string id;
  fs::path wav;
};

std::vector<Input> collect_inputs(const std::string& wav, const std::string& manifest, const RunConfig& cfg,
                                  const std::string& split) {
  if (wav.empty() == manifest.empty()) throw ValidationError("give exactly one of --wav or --manifest");
  if (!wav.empty()) return {{fs::path(wav).stem().string(), wav}};
  const Manifest m = load_manifest(manifest, cfg.spectrogram.geometry);
  std::vector<Input> out;
  for (const auto& e : m.entries) {
    if (split.empty() || e.split == split) out.push_back({e.id, e.audio_path});
  }
  return out;
}

int cmd_config(bool print_defaults, const std::string& check, const Common& common) {
  if (!check.empty()) {
    RunConfig cfg = load_config(check);
    cfg.validate();
    std::cout << check << ": ok\n";
    return 0;
  }
  const RunConfig cfg = common.load();
  if (!print_defaults && common.config_path.empty()) throw ValidationError("nothing to do (try --print-defaults)");
  std::cout << format_config(cfg);
  return 0;
}

int cmd_synth(std::optional<int> count, const std::string& out, const std::string& cohorts, const Common& common) {
  RunConfig cfg = common.load();
  if (count && *count <= 0) throw ValidationError("--n must be positive");
  const int n = count.value_or(cfg.synth_count);
  std::map<Cohort, double> mix;
  if (cohorts.empty()) {
    mix = {{Cohort::men, cfg.synth_men}, {Cohort::women, cfg.synth_women}, {Cohort::children, cfg.synth_children}};
  } else {
    for (const auto& name : csv::split(cohorts)) mix[cohort_from_string(name)] = 1.0;
  }
  auto corpus = generate_corpus(n, mix, cfg.seed, cfg.synth);

  Manifest all;
  for (const auto& u : corpus) all.entries.push_back({u.id, {}, {}, {}, {}, u.group, u.vowel, "train", "", u.seed});
  const auto [train_part, test_part] = split_by_speaker_group(all, cfg.test_fraction, cfg.seed);
  for (const auto& e : test_part.entries) {
    for (auto& u : corpus) {
      if (u.id == e.id) u.split = "test";
    }
  }

  StagingDir staging(out);
  write_corpus(staging.path(), corpus, "synthetic");
  staging.commit();
  std::cout << (fs::path(out) / "manifest.csv").string() << '\n';
  return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& out, const std::string& resume,
              std::optional<int> epochs, const Common& common) {
  RunConfig cfg = common.load();
  if (epochs) cfg.train.max_epochs = *epochs;
  cfg.train.validate();
  const Manifest manifest = load_manifest(manifest_path, cfg.spectrogram.geometry);
  std::vector<LabeledUtterance> all = load_audio(manifest);
  std::vector<LabeledUtterance> train_set;
  std::vector<LabeledUtterance> probe;
  for (auto& u : all) (u.split == "test" ? probe : train_set).push_back(std::move(u));
  if (train_set.empty()) throw ValidationError("manifest has no training utterances (split=train)");

  fs::create_directories(out);
  FormantModel model(cfg.model, cfg.seed);
  Trainer trainer(model, cfg.train);
  if (!resume.empty()) trainer.load_checkpoint(resume);
  csv::write_atomically(fs::path(out) / "config.txt", format_config(cfg));

  TrainHooks hooks;
  hooks.metrics_csv = fs::path(out) / "metrics.csv";
  hooks.checkpoint_dir = fs::path(out) / "checkpoints";
  hooks.on_epoch = [](const EpochMetrics& m) {
    std::fprintf(stderr, "epoch %d lr %g loss %.4f", m.epoch, m.lr, m.train_loss);
    for (std::size_t k = 0; k < m.probe_mae.size(); ++k) std::fprintf(stderr, " F%zu %.1f Hz", k + 1, m.probe_mae[k]);
    std::fprintf(stderr, " (%.1fs)\n", m.seconds);
  };
  train(trainer, train_set, probe, hooks);

  const fs::path model_path = fs::path(out) / "model.safetensors";
  const fs::path tmp = model_path.string() + ".tmp";
  save_model(tmp, model);
  fs::rename(tmp, model_path);
  std::cout << model_path.string() << '\n';
  return 0;
}

int cmd_track(const std::string& model_path, const std::string& wav, const std::string& manifest,
              const std::string& out, bool heatmaps, const std::string& split, const Common& common) {
  const RunConfig cfg = common.load();
  const FormantModel model = load_model(model_path);
  if (model.num_bins() != cfg.spectrogram.geometry.num_bins()) {
    throw ValidationError("model expects " + std::to_string(model.num_bins()) + " bins, spectrogram settings give " +
                          std::to_string(cfg.spectrogram.geometry.num_bins()));
  }
  const auto inputs = collect_inputs(wav, manifest, cfg, split);
  StagingDir staging(out);
  parallel_for(inputs.size(), cfg.workers, [&](std::size_t i) {
    const Waveform w = read_wav(inputs[i].wav);
    const int frames = cfg.spectrogram.geometry.num_frames(w.size());
    FormantTrack result(0, model.num_heads());
    std::optional<TrackResult> tracked;
    if (frames > 0) {
      tracked = track(front_end(w, cfg.spectrogram), model, model.config().bins);
      result = tracked->track;
    }
    write_track_csv(staging.path() / (inputs[i].id + ".csv"), result, cfg.spectrogram.geometry, w.sample_rate);
    if (heatmaps && tracked) {
      write_heatmap_csv(staging.path() / (inputs[i].id + ".heatmap.csv"), aggregate_heatmaps(tracked->heatmaps),
                        model.config().bins);
    }
  });
  staging.commit();
  std::cout << inputs.size() << " track(s) written to " << out << '\n';
  return 0;
}

int cmd_baseline(const std::string& wav, const std::string& manifest, const std::string& out, const std::string& split,
                 const Common& common) {
  const RunConfig cfg = common.load();
  const auto inputs = collect_inputs(wav, manifest, cfg, split);
  StagingDir staging(out);
  parallel_for(inputs.size(), cfg.workers, [&](std::size_t i) {
    const Waveform w = read_wav(inputs[i].wav);
    const FormantTrack t = lpc_track(w, cfg.spectrogram.geometry, cfg.lpc);
    write_track_csv(staging.path() / (inputs[i].id + ".csv"), t, cfg.spectrogram.geometry, w.sample_rate);
  });
  staging.commit();
  std::cout << inputs.size() << " track(s) written to " << out << '\n';
  return 0;
}

int cmd_eval(const std::string& pred_dir, const std::string& manifest_path, const std::string& out, bool polygons,
             const std::string& split, const Common& common) {
  const RunConfig cfg = common.load();
  const Manifest manifest = load_manifest(manifest_path, cfg.spectrogram.geometry);
  std::vector<const AnnotatedUtterance*> entries;
  for (const auto& e : manifest.entries) {
    if (split.empty() || e.split == split) entries.push_back(&e);
  }
  if (entries.empty()) throw ValidationError("no utterances to evaluate");
  for (const auto* e : entries) {
    if (!fs::exists(fs::path(pred_dir) / (e->id + ".csv"))) {
      throw ValidationError("no prediction for utterance '" + e->id + "' in " + pred_dir);
    }
  }
  std::vector<FormantTrack> preds(entries.size());
  std::vector<EvalReport> reports(entries.size());
  parallel_for(entries.size(), cfg.workers, [&](std::size_t i) {
    preds[i] = read_track_csv(fs::path(pred_dir) / (entries[i]->id + ".csv"));
    if (preds[i].num_frames() != entries[i]->track.num_frames()) {
      throw ValidationError("prediction for '" + entries[i]->id + "' has " + std::to_string(preds[i].num_frames()) +
                            " frames, annotation has " + std::to_string(entries[i]->track.num_frames()));
    }
    reports[i] = evaluate_utterance(preds[i], entries[i]->track, entries[i]->segmentation);
  });
  EvalReport total(entries.front()->track.num_formants());
  for (const auto& r : reports) total.merge(r);

  StagingDir staging(out);
  const std::string text = format_report(total);
  csv::write_atomically(staging.path() / "report.txt", text);
  csv::write_atomically(staging.path() / "report.csv", report_csv(total));
  if (polygons) {
    std::vector<PolygonSample> samples;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i]->vowel.empty()) continue;
      samples.push_back({entries[i]->group, entries[i]->vowel, &preds[i], std::nullopt});
    }
    csv::write_atomically(staging.path() / "polygons.csv", polygon_csv(vowel_polygon(samples)));
  }
  staging.commit();
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Formant tracking toolkit"};
  app.require_subcommand(1);
  Common common;

  auto* config = app.add_subcommand("config", "show or check the configuration");
  bool print_defaults = false;
  std::string check;
  config->add_flag("--print-defaults", print_defaults, "print every key with its default value");
  config->add_option("--check", check, "validate a config file")->check(CLI::ExistingFile);
  common.attach(config);

  auto* synth = app.add_subcommand("synth", "generate a synthetic vowel corpus");
  std::optional<int> n;
  std::string synth_out;
  std::string cohorts;
  synth->add_option("--n", n, "number of utterances (default synth.count)");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--cohorts", cohorts, "comma-separated cohorts (men,women,children); default from config");
  common.attach(synth);

  auto* train_cmd = app.add_subcommand("train", "train a model on a manifest");
  std::string train_manifest;
  std::string train_out;
  std::string resume;
  std::optional<int> epochs;
  train_cmd->add_option("--manifest", train_manifest, "manifest CSV (split=test rows form the probe set)")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_out, "run directory")->required();
  train_cmd->add_option("--resume", resume, "trainer checkpoint to resume from")->check(CLI::ExistingFile);
  train_cmd->add_option("--epochs", epochs, "total epochs (train.max_epochs)");
  common.attach(train_cmd);

  auto* track_cmd = app.add_subcommand("track", "track formants with a trained model");
  std::string model_path;
  std::string wav;
  std::string manifest;
  std::string out;
  std::string split;
  bool heatmaps = false;
  track_cmd->add_option("--model", model_path, "model checkpoint")->required()->check(CLI::ExistingFile);
  track_cmd->add_option("--wav", wav, "single 16 kHz WAVE file")->check(CLI::ExistingFile);
  track_cmd->add_option("--manifest", manifest, "manifest CSV")->check(CLI::ExistingFile);
  track_cmd->add_option("--split", split, "only manifest rows with this split");
  track_cmd->add_option("--out", out, "output directory")->required();
  track_cmd->add_flag("--heatmaps", heatmaps, "also write the aggregated heatmap per utterance");
  common.attach(track_cmd);

  auto* baseline_cmd = app.add_subcommand("baseline", "LPC formant tracks");
  baseline_cmd->add_option("--wav", wav, "single 16 kHz WAVE file")->check(CLI::ExistingFile);
  baseline_cmd->add_option("--manifest", manifest, "manifest CSV")->check(CLI::ExistingFile);
  baseline_cmd->add_option("--split", split, "only manifest rows with this split");
  baseline_cmd->add_option("--out", out, "output directory")->required();
  common.attach(baseline_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "score predicted tracks against a manifest");
  std::string pred_dir;
  bool polygons = false;
  eval_cmd->add_option("--pred", pred_dir, "directory of <id>.csv tracks")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--manifest", manifest, "manifest CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--split", split, "only manifest rows with this split");
  eval_cmd->add_option("--out", out, "report directory")->required();
  eval_cmd->add_flag("--polygons", polygons, "also write per-group vowel F1/F2 means");
  common.attach(eval_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*config) return cmd_config(print_defaults, check, common);
    if (*synth) return cmd_synth(n, synth_out, cohorts, common);
    if (*train_cmd) return cmd_train(train_manifest, train_out, resume, epochs, common);
    if (*track_cmd) return cmd_track(model_path, wav, manifest, out, heatmaps, split, common);
    if (*baseline_cmd) return cmd_baseline(wav, manifest, out, split, common);
    if (*eval_cmd) return cmd_eval(pred_dir, manifest, out, polygons, split, common);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ManifestError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const csv::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}
