#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "formant/baseline.hpp"
#include "formant/dsp.hpp"
#include "formant/model.hpp"
#include "formant/synth.hpp"
#include "formant/train.hpp"

namespace formant {

/// Everything a command needs, loaded from one `key = value` file. Keys are
/// dotted (`train.initial_lr`); `#` starts a comment.
struct RunConfig {
  SpectrogramConfig spectrogram;
  ModelConfig model;
  TrainConfig train;
  LpcTrackConfig lpc;

  int synth_count = 500;
  double synth_men = 1.0;
  double synth_women = 1.0;
  double synth_children = 0.0;
  CorpusOptions synth;

  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  int workers = 1;

  /// Copies the shared settings (geometry, seed) into the sub-configs.
  void sync();
  void validate() const;
};

/// Thrown with every offending key listed, one per line.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Applies `key = value` lines to `cfg`. Unknown keys and unparsable values
/// are collected and reported together.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);
/// Applies `key=value` overrides (e.g. from the command line).
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& assignments);

/// Every key with its current value and a short description, in a form
/// `apply_config_text` reads back.
std::string format_config(const RunConfig& cfg);

std::vector<std::string> config_keys();

}  // namespace formant
