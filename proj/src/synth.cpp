#include "formant/synth.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <stdexcept>

namespace formant {

std::string to_string(Cohort c) {
  switch (c) {
    case Cohort::men: return "men";
    case Cohort::women: return "women";
    case Cohort::children: return "children";
  }
  return "unknown";
}

Cohort cohort_from_string(const std::string& name) {
  if (name == "men") return Cohort::men;
  if (name == "women") return Cohort::women;
  if (name == "children") return Cohort::children;
  throw std::invalid_argument("unknown cohort '" + name + "'");
}

void SyntheticSpec::validate(int sample_rate) const {
  const double nyquist = sample_rate / 2.0;
  if (!(f0 > 0.0 && f0 < nyquist)) throw std::invalid_argument("f0 must be in (0, Nyquist)");
  if (!(duration > 0.0)) throw std::invalid_argument("duration must be positive");
  if (formants.empty() || bandwidths.size() != formants.size()) {
    throw std::invalid_argument("need one bandwidth per formant");
  }
  auto check = [&](const std::vector<double>& f) {
    if (f.size() != formants.size()) throw std::invalid_argument("formant trajectory length mismatch");
    for (std::size_t k = 0; k < f.size(); ++k) {
      if (!(f[k] > 0.0)) throw std::invalid_argument("formants must be positive");
      if (f[k] >= nyquist) throw std::invalid_argument("formant at or above Nyquist");
      if (k > 0 && !(f[k] > f[k - 1])) throw std::invalid_argument("formants must be strictly increasing");
    }
  };
  check(formants);
  if (end_formants) check(*end_formants);
  for (double b : bandwidths) {
    if (!(b > 0.0)) throw std::invalid_argument("bandwidths must be positive");
  }
}

std::pair<Waveform, FormantTrack> synthesize(const SyntheticSpec& spec, int sample_rate, const FrameGeometry& geometry) {
  spec.validate(sample_rate);
  const auto n = static_cast<std::size_t>(std::llround(spec.duration * sample_rate));
  const std::size_t K = spec.formants.size();
  const auto& start = spec.formants;
  const auto& end = spec.end_formants ? *spec.end_formants : spec.formants;
  auto formant_at = [&](std::size_t k, double sample) {
    return start[k] + (end[k] - start[k]) * sample / static_cast<double>(n);
  };

  Waveform w{std::vector<double>(n, 0.0), sample_rate};
  const double period = sample_rate / spec.f0;
  for (double pos = 0.0; pos < static_cast<double>(n); pos += period) {
    w.samples[static_cast<std::size_t>(pos)] = 1.0;
  }

  for (std::size_t k = 0; k < K; ++k) {
    const double radius = std::exp(-std::numbers::pi * spec.bandwidths[k] / sample_rate);
    if (!(radius < 1.0)) throw std::logic_error("unstable resonator");
    double y1 = 0.0;
    double y2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double theta = 2.0 * std::numbers::pi * formant_at(k, static_cast<double>(i)) / sample_rate;
      const double a1 = 2.0 * radius * std::cos(theta);
      const double a2 = -radius * radius;
      const double gain = 1.0 - a1 - a2;
      const double y = gain * w.samples[i] + a1 * y1 + a2 * y2;
      y2 = y1;
      y1 = y;
      w.samples[i] = y;
    }
  }
  double peak = 0.0;
  for (double s : w.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.0) {
    for (double& s : w.samples) s *= 0.5 / peak;
  }

  const int frames = geometry.num_frames(n);
  FormantTrack track(frames, static_cast<int>(K));
  for (int t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < K; ++k) {
      track.values(t, static_cast<Eigen::Index>(k)) = formant_at(k, static_cast<double>(t) * geometry.hop);
      track.valid(t, static_cast<Eigen::Index>(k)) = true;
    }
  }
  return {std::move(w), std::move(track)};
}

const CohortPrior& cohort_prior(Cohort c) {
  static const std::array<CohortPrior, 3> priors = {{
      {{250.0, 700.0}, {800.0, 2200.0}, {1900.0, 3000.0}, {100.0, 140.0}},
      {{300.0, 850.0}, {900.0, 2600.0}, {2200.0, 3300.0}, {160.0, 210.0}},
      {{350.0, 1000.0}, {1000.0, 3100.0}, {2500.0, 3800.0}, {220.0, 280.0}},
  }};
  return priors[static_cast<std::size_t>(c)];
}

SyntheticSpec sample_spec(Cohort cohort, std::uint64_t utterance_seed, const CorpusOptions& options) {
  std::mt19937_64 rng(utterance_seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  const CohortPrior& p = cohort_prior(cohort);

  SyntheticSpec spec;
  spec.cohort = cohort;
  spec.duration = options.duration;
  spec.f0 = uniform(p.f0.first, p.f0.second);
  const double f1 = uniform(p.f1.first, p.f1.second);
  const double f2 = uniform(std::max(p.f2.first, f1 + kMinFormantGap), p.f2.second);
  const double f3 = uniform(std::max(p.f3.first, f2 + kMinFormantGap), std::max(p.f3.second, f2 + 2 * kMinFormantGap));
  spec.formants = {f1, f2, f3};
  spec.bandwidths.clear();
  for (double b : options.base_bandwidths) {
    spec.bandwidths.push_back(std::max(10.0, b + uniform(-options.bandwidth_jitter, options.bandwidth_jitter)));
  }
  if (uniform(0.0, 1.0) < options.drift_probability) {
    // A common relative drift keeps the ordering and the minimum gap intact
    // up to the scale factor.
    const double scale = 1.0 + uniform(-options.max_drift, options.max_drift);
    spec.end_formants = std::vector<double>{f1 * scale, f2 * scale, f3 * scale};
  }
  return spec;
}

std::string nearest_vowel(double f1, double f2, Cohort cohort) {
  struct Prototype {
    const char* label;
    double f1;
    double f2;
  };
  // Adult male averages of American English vowels, a widely reproduced
  // reference set.
  static constexpr std::array<Prototype, 10> kMen = {{{"iy", 270, 2290},
                                                      {"ih", 390, 1990},
                                                      {"eh", 530, 1840},
                                                      {"ae", 660, 1720},
                                                      {"ah", 520, 1190},
                                                      {"aa", 730, 1090},
                                                      {"ao", 570, 840},
                                                      {"uh", 440, 1020},
                                                      {"uw", 300, 870},
                                                      {"er", 490, 1350}}};
  const CohortPrior& men = cohort_prior(Cohort::men);
  const CohortPrior& own = cohort_prior(cohort);
  const double scale = (own.f1.first + own.f1.second) / (men.f1.first + men.f1.second);
  const char* best = kMen[0].label;
  double best_dist = 1e300;
  for (const auto& p : kMen) {
    const double d1 = std::log(f1 / (p.f1 * scale));
    const double d2 = std::log(f2 / (p.f2 * scale));
    const double dist = d1 * d1 + d2 * d2;
    if (dist < best_dist) {
      best_dist = dist;
      best = p.label;
    }
  }
  return best;
}

std::vector<LabeledUtterance> generate_corpus(int n, const std::map<Cohort, double>& cohort_mix, std::uint64_t seed,
                                              const CorpusOptions& options) {
  if (n <= 0) throw std::invalid_argument("corpus size must be positive");
  std::vector<Cohort> cohorts;
  std::vector<double> weights;
  for (const auto& [c, w] : cohort_mix) {
    if (w < 0.0) throw std::invalid_argument("cohort weights must be non-negative");
    if (w > 0.0) {
      cohorts.push_back(c);
      weights.push_back(w);
    }
  }
  if (cohorts.empty()) throw std::invalid_argument("cohort mix has no positive weight");

  std::vector<LabeledUtterance> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    std::seed_seq seq{seed, static_cast<std::uint64_t>(i)};
    std::uint64_t derived = 0;
    {
      std::array<std::uint32_t, 2> words{};
      seq.generate(words.begin(), words.end());
      derived = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
    }
    std::mt19937_64 pick(derived);
    std::discrete_distribution<std::size_t> choose(weights.begin(), weights.end());
    const Cohort cohort = cohorts[choose(pick)];
    const SyntheticSpec spec = sample_spec(cohort, derived ^ 0x9e3779b97f4a7c15ULL, options);
    auto [wave, track] = synthesize(spec, options.sample_rate, options.geometry);

    LabeledUtterance u;
    char id[32];
    std::snprintf(id, sizeof(id), "%s%05d", options.id_prefix.c_str(), i);
    u.id = id;
    u.wave = std::move(wave);
    u.track = std::move(track);
    u.group = to_string(cohort);
    u.vowel = nearest_vowel(spec.formants[0], spec.formants[1], cohort);
    u.seed = derived;
    out.push_back(std::move(u));
  }
  return out;
}

}  // namespace formant
