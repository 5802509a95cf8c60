#include "formant/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "formant/csv.hpp"

namespace formant {

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::invalid_argument([&] {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  " + p;
        return msg;
      }()),
      problems_(std::move(problems)) {}

void RunConfig::sync() {
  train.spectrogram = spectrogram;
  train.seed = seed;
  synth.geometry = spectrogram.geometry;
  const int D = spectrogram.geometry.num_bins();
  model.bins = BinSpec::from_geometry(synth.sample_rate, spectrogram.geometry);
  model.decoder.bottleneck_plan.front() = D;
  model.decoder.bottleneck_plan.back() = D;
}

void RunConfig::validate() const {
  std::vector<std::string> problems;
  auto guard = [&](const std::function<void()>& check) {
    try {
      check();
    } catch (const std::exception& e) {
      problems.emplace_back(e.what());
    }
  };
  guard([&] { spectrogram.validate(); });
  guard([&] { model.validate(); });
  guard([&] { train.validate(); });
  if (lpc.order < 1) problems.emplace_back("lpc.order must be positive");
  if (synth_count <= 0) problems.emplace_back("synth.count must be positive");
  if (synth_men < 0 || synth_women < 0 || synth_children < 0 || synth_men + synth_women + synth_children <= 0) {
    problems.emplace_back("synth cohort weights must be non-negative with a positive sum");
  }
  if (!(synth.duration > 0.0)) problems.emplace_back("synth.duration must be positive");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) problems.emplace_back("data.test_fraction must be in [0, 1)");
  if (workers < 1) problems.emplace_back("run.workers must be at least 1");
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

namespace {

template <typename T>
T parse_number(const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("'" + text + "' is not a valid number");
  return v;
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw std::invalid_argument("'" + text + "' is not a boolean (true/false)");
}

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  if (text.empty()) return out;
  for (auto& field : csv::split(text)) {
    const auto a = field.find_first_not_of(" \t");
    const auto b = field.find_last_not_of(" \t");
    out.push_back(parse_number<T>(a == std::string::npos ? "" : field.substr(a, b - a + 1)));
  }
  return out;
}

std::string fmt(double v) { return csv::format_number(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

template <typename T>
std::string fmt_list(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt(static_cast<double>(v[i]));
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

struct Entry {
  std::string key;
  std::string help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define REAL(k, field, h) \
  Entry { k, h, [](const RunConfig& c) { return fmt(c.field); }, [](RunConfig& c, const std::string& s) { c.field = parse_number<double>(s); } }
#define INT(k, field, h)                                                          \
  Entry {                                                                         \
    k, h, [](const RunConfig& c) { return std::to_string(c.field); },             \
        [](RunConfig& c, const std::string& s) { c.field = parse_number<int>(s); } \
  }
#define BOOL(k, field, h) \
  Entry { k, h, [](const RunConfig& c) { return fmt(c.field); }, [](RunConfig& c, const std::string& s) { c.field = parse_bool(s); } }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      INT("spectrogram.fft_size", spectrogram.geometry.fft_size, "FFT length in samples; bins = fft_size / 2 + 1"),
      INT("spectrogram.hop", spectrogram.geometry.hop, "frame hop in samples"),
      INT("spectrogram.window_length", spectrogram.geometry.window_length, "analysis window length in samples"),
      Entry{"spectrogram.window", "hann, hamming or rectangular",
            [](const RunConfig& c) { return to_string(c.spectrogram.window); },
            [](RunConfig& c, const std::string& s) { c.spectrogram.window = window_from_string(s); }},
      REAL("spectrogram.preemphasis", spectrogram.preemphasis, "pre-emphasis coefficient"),
      REAL("spectrogram.floor_epsilon", spectrogram.floor_epsilon, "added to magnitudes before the log"),
      BOOL("spectrogram.standardize", spectrogram.standardize, "zero-mean unit-variance log spectrogram"),

      Entry{"model.encoder_channels", "encoder channel plan, input to output",
            [](const RunConfig& c) { return fmt_list(c.model.encoder.channel_plan); },
            [](RunConfig& c, const std::string& s) { c.model.encoder.channel_plan = parse_list<int>(s); }},
      INT("model.encoder_kernel", model.encoder.kernel, "encoder kernel size (square)"),
      REAL("model.encoder_dropout", model.encoder.dropout_rate, "encoder dropout rate"),
      BOOL("model.encoder_batchnorm", model.encoder.uses_batchnorm, "batch normalization in the encoder"),
      Entry{"model.decoder_bottleneck", "hidden width of each decoder head",
            [](const RunConfig& c) { return std::to_string(c.model.decoder.bottleneck_plan[1]); },
            [](RunConfig& c, const std::string& s) { c.model.decoder.bottleneck_plan[1] = parse_number<int>(s); }},
      INT("model.decoder_time_kernel", model.decoder.time_kernel, "decoder time kernel"),
      INT("model.decoder_heads", model.decoder.num_heads, "number of formants / decoder heads"),
      REAL("model.decoder_dropout", model.decoder.dropout_rate, "decoder dropout rate"),
      BOOL("model.decoder_batchnorm", model.decoder.uses_batchnorm, "scale-only batch normalization in the heads"),
      BOOL("model.decoder_bias", model.decoder.bias_enabled, "bias terms in the heads (must stay false)"),

      REAL("train.initial_lr", train.initial_lr, "initial Adam learning rate"),
      Entry{"train.anneal_epochs", "epochs at which the learning rate is divided by anneal_factor",
            [](const RunConfig& c) { return fmt_list(c.train.anneal_epochs); },
            [](RunConfig& c, const std::string& s) { c.train.anneal_epochs = parse_list<int>(s); }},
      REAL("train.anneal_factor", train.anneal_factor, "learning-rate divisor per anneal epoch"),
      REAL("train.smoothing_epsilon", train.smoothing_epsilon, "label smoothing mass"),
      REAL("train.speedup_probability", train.speedup_probability, "chance an utterance is sped up by two per epoch"),
      INT("train.batch_size", train.batch_size, "utterances per batch"),
      INT("train.max_epochs", train.max_epochs, "number of epochs"),
      REAL("train.adam_beta1", train.adam_beta1, "Adam first-moment decay"),
      REAL("train.adam_beta2", train.adam_beta2, "Adam second-moment decay"),
      REAL("train.adam_epsilon", train.adam_epsilon, "Adam denominator epsilon"),
      Entry{"train.mask_source", "ground_truth or scheduled",
            [](const RunConfig& c) { return to_string(c.train.mask_source); },
            [](RunConfig& c, const std::string& s) { c.train.mask_source = mask_source_from_string(s); }},
      REAL("train.scheduled_sampling", train.scheduled_sampling, "prediction-mask probability when scheduled"),
      REAL("train.noise_probability", train.noise_probability, "chance of additive white noise"),
      REAL("train.noise_snr_db", train.noise_snr_db, "signal-to-noise ratio of the added noise"),
      REAL("train.crop_probability", train.crop_probability, "chance of a random frame crop"),
      INT("train.crop_min_frames", train.crop_min_frames, "shortest crop in frames"),
      REAL("train.reversal_probability", train.reversal_probability, "chance of time-reversing the spectrogram"),
      REAL("train.max_minutes", train.max_minutes, "wall-clock budget, 0 for none"),
      INT("train.checkpoint_every", train.checkpoint_every, "epochs between checkpoints, 0 for final only"),

      INT("lpc.order", lpc.order, "LPC order"),
      REAL("lpc.preemphasis", lpc.preemphasis, "pre-emphasis before LPC"),
      Entry{"lpc.window", "hann, hamming or rectangular", [](const RunConfig& c) { return to_string(c.lpc.window); },
            [](RunConfig& c, const std::string& s) { c.lpc.window = window_from_string(s); }},
      REAL("lpc.min_frequency", lpc.rules.min_frequency, "lowest accepted root frequency in Hz"),
      REAL("lpc.max_bandwidth", lpc.rules.max_bandwidth, "widest accepted root bandwidth in Hz"),
      REAL("lpc.silence_rms", lpc.silence_rms, "frames below this RMS are silent"),

      INT("synth.count", synth_count, "utterances per synthetic corpus"),
      REAL("synth.men", synth_men, "cohort weight"),
      REAL("synth.women", synth_women, "cohort weight"),
      REAL("synth.children", synth_children, "cohort weight"),
      REAL("synth.duration", synth.duration, "utterance length in seconds"),
      REAL("synth.bandwidth_jitter", synth.bandwidth_jitter, "uniform bandwidth jitter in Hz"),
      Entry{"synth.bandwidths", "base bandwidths in Hz, one per formant",
            [](const RunConfig& c) { return fmt_list(c.synth.base_bandwidths); },
            [](RunConfig& c, const std::string& s) { c.synth.base_bandwidths = parse_list<double>(s); }},
      REAL("synth.drift_probability", synth.drift_probability, "chance of a linear formant drift"),
      REAL("synth.max_drift", synth.max_drift, "largest relative drift"),

      REAL("data.test_fraction", test_fraction, "share of each group held out"),
      Entry{"run.seed", "seed for every random choice",
            [](const RunConfig& c) { return std::to_string(c.seed); },
            [](RunConfig& c, const std::string& s) { c.seed = parse_number<std::uint64_t>(s); }},
      INT("run.workers", workers, "worker threads for per-utterance work"),
  };
  return table;
}

#undef REAL
#undef INT
#undef BOOL

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

const Entry* find_entry(const std::string& key) {
  for (const auto& e : entries()) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

void assign(RunConfig& cfg, const std::string& key, const std::string& value, const std::string& where,
            std::vector<std::string>& problems) {
  const Entry* e = find_entry(key);
  if (e == nullptr) {
    problems.push_back(where + ": unknown key '" + key + "'");
    return;
  }
  try {
    e->set(cfg, value);
  } catch (const std::exception& ex) {
    problems.push_back(where + ": " + key + ": " + ex.what());
  }
}

}  // namespace

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source) {
  std::vector<std::string> problems;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(number);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back(where + ": expected 'key = value'");
      continue;
    }
    assign(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where, problems);
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  cfg.sync();
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig cfg;
  apply_config_text(cfg, buf.str(), path.string());
  return cfg;
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& assignments) {
  std::vector<std::string> problems;
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) {
      problems.push_back("override '" + a + "': expected key=value");
      continue;
    }
    assign(cfg, trim(a.substr(0, eq)), trim(a.substr(eq + 1)), "override", problems);
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  cfg.sync();
}

std::string format_config(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& e : entries()) {
    const std::string prefix = e.key.substr(0, e.key.find('.'));
    if (prefix != section) {
      if (!section.empty()) out += "\n";
      out += "# " + prefix + "\n";
      section = prefix;
    }
    out += e.key + " = " + e.get(cfg) + "  # " + e.help + "\n";
  }
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : entries()) keys.push_back(e.key);
  return keys;
}

}  // namespace formant
