#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "formant/data.hpp"
#include "formant/dsp.hpp"
#include "formant/quantizer.hpp"

namespace formant {

enum class Cohort { men, women, children };

std::string to_string(Cohort c);
Cohort cohort_from_string(const std::string& name);

/// Source-filter vowel description. When `end_formants` is set, every
/// formant moves linearly from `formants` to `end_formants` over the
/// utterance.
struct SyntheticSpec {
  double f0 = 120.0;
  std::vector<double> formants{500.0, 1500.0, 2500.0};
  std::vector<double> bandwidths{50.0, 70.0, 90.0};
  double duration = 0.5;
  std::optional<std::vector<double>> end_formants;
  Cohort cohort = Cohort::men;

  void validate(int sample_rate) const;
};

/// Impulse train at f0 through a cascade of unity-DC-gain two-pole
/// resonators. The returned track holds the formant values at each frame
/// time t * hop / sample_rate.
std::pair<Waveform, FormantTrack> synthesize(const SyntheticSpec& spec, int sample_rate = 16000,
                                             const FrameGeometry& geometry = {});

/// Uniform sampling ranges for one cohort. Shaped after the qualitative
/// group shifts in published vowel data; not measurements.
struct CohortPrior {
  std::pair<double, double> f1;
  std::pair<double, double> f2;
  std::pair<double, double> f3;
  std::pair<double, double> f0;
};

const CohortPrior& cohort_prior(Cohort c);

inline constexpr double kMinFormantGap = 150.0;

struct CorpusOptions {
  double duration = 0.1;
  double bandwidth_jitter = 20.0;
  std::vector<double> base_bandwidths{50.0, 70.0, 90.0};
  // Probability that an utterance gets a linear formant drift.
  double drift_probability = 0.0;
  double max_drift = 0.1;  // relative change over the utterance
  int sample_rate = 16000;
  FrameGeometry geometry;
  std::string id_prefix = "syn";
};

/// `n` vowels with formants drawn from the cohort priors. `cohort_mix`
/// weights the cohorts; every utterance gets a seed derived from `seed`
/// and its index, so the corpus is reproducible and order independent.
std::vector<LabeledUtterance> generate_corpus(int n, const std::map<Cohort, double>& cohort_mix, std::uint64_t seed,
                                              const CorpusOptions& options = {});

/// Draws one spec from the cohort prior; deterministic in `utterance_seed`.
SyntheticSpec sample_spec(Cohort cohort, std::uint64_t utterance_seed, const CorpusOptions& options = {});

/// Nearest vowel prototype (ARPAbet label) for an (F1, F2) pair,
/// with prototypes scaled to the cohort.
std::string nearest_vowel(double f1, double f2, Cohort cohort);

}  // namespace formant
