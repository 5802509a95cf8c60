#include "formant/data.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "formant/csv.hpp"

namespace fs = std::filesystem;

namespace formant {

ManifestError::ManifestError(Kind kind, std::string id, const std::string& what)
    : std::runtime_error(what), kind_(kind), id_(std::move(id)) {}

const AnnotatedUtterance* Manifest::find(const std::string& id) const {
  for (const auto& e : entries) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

void write_annotation_csv(const fs::path& path, const FormantTrack& track,
                          const std::optional<PhoneSegmentation>& segmentation) {
  const int K = track.num_formants();
  const int T = track.num_frames();
  std::vector<std::optional<BroadClass>> classes;
  if (segmentation) classes = segmentation->frame_classes(T);

  std::ostringstream out;
  out << "frame";
  for (int k = 1; k <= K; ++k) out << ",f" << k << "_hz";
  for (int k = 1; k <= K; ++k) out << ",valid" << k;
  if (segmentation) out << ",phone_class";
  out << '\n';
  for (int t = 0; t < T; ++t) {
    out << t;
    for (int k = 0; k < K; ++k) out << ',' << csv::format_number(track.values(t, k));
    for (int k = 0; k < K; ++k) out << ',' << (track.valid(t, k) ? 1 : 0);
    if (segmentation) out << ',' << (classes[t] ? to_string(*classes[t]) : "");
    out << '\n';
  }
  csv::write_atomically(path, out.str());
}

std::pair<FormantTrack, std::optional<PhoneSegmentation>> read_annotation_csv(const fs::path& path) {
  const auto table = csv::read(path);
  std::vector<int> freq_cols;
  std::vector<int> valid_cols;
  for (int k = 1;; ++k) {
    const int f = table.column("f" + std::to_string(k) + "_hz");
    if (f < 0) break;
    freq_cols.push_back(f);
    valid_cols.push_back(table.require_column("valid" + std::to_string(k)));
  }
  if (freq_cols.empty()) throw csv::ParseError(path, 1, "no formant columns");
  const int frame_col = table.require_column("frame");
  const int class_col = table.column("phone_class");
  const std::size_t expected = 1 + 2 * freq_cols.size() + (class_col >= 0 ? 1 : 0);
  if (table.header.size() != expected) throw csv::ParseError(path, 1, "unexpected columns in header");

  const int T = static_cast<int>(table.rows.size());
  FormantTrack track(T, static_cast<int>(freq_cols.size()));
  std::vector<std::optional<BroadClass>> classes(T);
  for (int r = 0; r < T; ++r) {
    const auto& row = table.rows[r];
    if (csv::parse_int(row[frame_col], table, r) != r) {
      throw csv::ParseError(path, table.lines[r], "frames must be consecutive from 0");
    }
    for (std::size_t k = 0; k < freq_cols.size(); ++k) {
      track.values(r, static_cast<Eigen::Index>(k)) = csv::parse_double(row[freq_cols[k]], table, r);
      track.valid(r, static_cast<Eigen::Index>(k)) = csv::parse_flag(row[valid_cols[k]], table, r);
    }
    if (class_col >= 0 && !row[class_col].empty()) {
      try {
        classes[r] = broad_class_from_string(row[class_col]);
      } catch (const std::invalid_argument& e) {
        throw csv::ParseError(path, table.lines[r], e.what());
      }
    }
  }
  std::optional<PhoneSegmentation> seg;
  if (class_col >= 0) seg = PhoneSegmentation::from_frame_classes(classes);
  return {std::move(track), std::move(seg)};
}

namespace {

const std::vector<std::string> kManifestColumns = {"id", "audio_path", "annotation_path", "group", "vowel", "split"};

std::string relative_to(const fs::path& p, const fs::path& base) {
  const fs::path rel = p.lexically_relative(base);
  return (rel.empty() ? p : rel).generic_string();
}

}  // namespace

void save_manifest(const fs::path& path, const Manifest& manifest) {
  const fs::path base = fs::absolute(path).parent_path();
  const bool with_speaker = std::any_of(manifest.entries.begin(), manifest.entries.end(),
                                        [](const auto& e) { return !e.speaker.empty(); });
  const bool with_seed = std::any_of(manifest.entries.begin(), manifest.entries.end(),
                                     [](const auto& e) { return e.seed.has_value(); });
  std::ostringstream out;
  for (std::size_t i = 0; i < kManifestColumns.size(); ++i) out << (i ? "," : "") << kManifestColumns[i];
  if (with_speaker) out << ",speaker";
  if (with_seed) out << ",seed";
  out << '\n';
  for (const auto& e : manifest.entries) {
    for (const auto* field : {&e.id, &e.group, &e.vowel, &e.split, &e.speaker}) {
      if (field->find_first_of(",\n\r") != std::string::npos) {
        throw std::invalid_argument("manifest field for '" + e.id + "' contains a separator");
      }
    }
    out << e.id << ',' << relative_to(fs::absolute(e.audio_path), base) << ','
        << relative_to(fs::absolute(e.annotation_path), base) << ',' << e.group << ',' << e.vowel << ',' << e.split;
    if (with_speaker) out << ',' << e.speaker;
    if (with_seed) out << ',' << (e.seed ? std::to_string(*e.seed) : "");
    out << '\n';
  }
  csv::write_atomically(path, out.str());
}

Manifest load_manifest(const fs::path& path, const FrameGeometry& geometry) {
  const auto table = csv::read(path);
  for (std::size_t i = 0; i < kManifestColumns.size(); ++i) {
    if (i >= table.header.size() || table.header[i] != kManifestColumns[i]) {
      throw csv::ParseError(path, 1, "manifest header must start with id,audio_path,annotation_path,group,vowel,split");
    }
  }
  const int speaker_col = table.column("speaker");
  const int seed_col = table.column("seed");
  const fs::path base = fs::absolute(path).parent_path();

  Manifest m;
  m.source_name = path.stem().string();
  std::set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    AnnotatedUtterance e;
    e.id = row[0];
    if (e.id.empty()) throw csv::ParseError(path, table.lines[r], "empty utterance id");
    if (!seen.insert(e.id).second) {
      throw ManifestError(ManifestError::Kind::duplicate_id, e.id, "duplicate utterance id '" + e.id + "'");
    }
    e.audio_path = (base / row[1]).lexically_normal();
    e.annotation_path = (base / row[2]).lexically_normal();
    e.group = row[3];
    e.vowel = row[4];
    e.split = row[5];
    if (speaker_col >= 0) e.speaker = row[speaker_col];
    if (seed_col >= 0 && !row[seed_col].empty()) {
      e.seed = csv::parse_uint64(row[seed_col], table, r);
    }
    if (!fs::exists(e.audio_path)) {
      throw ManifestError(ManifestError::Kind::missing_audio, e.id,
                          "utterance '" + e.id + "': missing audio " + e.audio_path.string());
    }
    if (!fs::exists(e.annotation_path)) {
      throw ManifestError(ManifestError::Kind::missing_annotation, e.id,
                          "utterance '" + e.id + "': missing annotation " + e.annotation_path.string());
    }
    try {
      std::tie(e.track, e.segmentation) = read_annotation_csv(e.annotation_path);
    } catch (const std::exception& err) {
      throw ManifestError(ManifestError::Kind::bad_row, e.id, "utterance '" + e.id + "': " + err.what());
    }
    const int frames = geometry.num_frames(wav_num_samples(e.audio_path));
    if (frames != e.track.num_frames()) {
      throw ManifestError(ManifestError::Kind::frame_mismatch, e.id,
                          "utterance '" + e.id + "': annotation has " + std::to_string(e.track.num_frames()) +
                              " frames, audio has " + std::to_string(frames));
    }
    if (e.segmentation) {
      try {
        e.segmentation->validate(frames);
      } catch (const std::exception& err) {
        throw ManifestError(ManifestError::Kind::bad_row, e.id, "utterance '" + e.id + "': " + err.what());
      }
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

std::vector<LabeledUtterance> load_audio(const Manifest& manifest, int expected_rate) {
  std::vector<LabeledUtterance> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    out.push_back({e.id, read_wav(e.audio_path, expected_rate), e.track, e.segmentation, e.group, e.vowel, e.speaker,
                   e.split, e.seed});
  }
  return out;
}

Manifest write_corpus(const fs::path& dir, std::span<const LabeledUtterance> utterances, const std::string& source_name) {
  fs::create_directories(dir);
  Manifest m;
  m.source_name = source_name;
  for (const auto& u : utterances) {
    AnnotatedUtterance e;
    e.id = u.id;
    e.audio_path = fs::absolute(dir / (u.id + ".wav")).lexically_normal();
    e.annotation_path = fs::absolute(dir / (u.id + ".csv")).lexically_normal();
    write_wav(e.audio_path, u.wave);
    write_annotation_csv(e.annotation_path, u.track, u.segmentation);
    e.track = u.track;
    e.segmentation = u.segmentation;
    e.group = u.group;
    e.vowel = u.vowel;
    e.split = u.split;
    e.speaker = u.speaker;
    e.seed = u.seed;
    m.entries.push_back(std::move(e));
  }
  save_manifest(dir / "manifest.csv", m);
  return m;
}

std::pair<Manifest, Manifest> split_by_speaker_group(const Manifest& manifest, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) throw std::invalid_argument("split fraction must be in [0, 1]");
  // group -> ordered list of units (speaker id, or utterance id when absent)
  std::map<std::string, std::vector<std::string>> units;
  auto unit_of = [](const AnnotatedUtterance& e) { return e.speaker.empty() ? "utt:" + e.id : "spk:" + e.speaker; };
  for (const auto& e : manifest.entries) {
    auto& list = units[e.group];
    const std::string u = unit_of(e);
    if (std::find(list.begin(), list.end(), u) == list.end()) list.push_back(u);
  }
  std::set<std::pair<std::string, std::string>> test_units;
  std::mt19937_64 rng(seed);
  for (auto& [group, list] : units) {
    std::sort(list.begin(), list.end());
    std::shuffle(list.begin(), list.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(list.size())));
    for (std::size_t i = 0; i < n_test; ++i) test_units.insert({group, list[i]});
  }
  Manifest train{manifest.source_name, {}};
  Manifest test{manifest.source_name, {}};
  for (const auto& e : manifest.entries) {
    if (test_units.count({e.group, unit_of(e)})) {
      test.entries.push_back(e);
      test.entries.back().split = "test";
    } else {
      train.entries.push_back(e);
      train.entries.back().split = "train";
    }
  }
  return {std::move(train), std::move(test)};
}

FormantTrack read_vtr_formants(const fs::path& path, int num_frames, double hop_seconds, double file_period_seconds) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  constexpr std::size_t kRecord = 8 * sizeof(float);
  if (bytes.size() % kRecord != 0) {
    throw std::runtime_error(path.string() + ": size is not a whole number of 8-float records");
  }
  const std::size_t records = bytes.size() / kRecord;
  auto value = [&](std::size_t rec, int col) {
    float v;
    std::memcpy(&v, bytes.data() + rec * kRecord + col * sizeof(float), sizeof(float));
    return static_cast<double>(v);
  };
  FormantTrack track(num_frames, 3);
  for (int t = 0; t < num_frames; ++t) {
    const auto rec = static_cast<std::size_t>(std::llround(t * hop_seconds / file_period_seconds));
    if (rec >= records) continue;
    for (int k = 0; k < 3; ++k) {
      const double hz = value(rec, k) * 1000.0;
      track.values(t, k) = hz;
      track.valid(t, k) = std::isfinite(hz) && hz > 0.0;
    }
  }
  return track;
}

std::vector<VowelTableRecord> read_vowel_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<VowelTableRecord> out;
  std::string line;
  int number = 0;
  auto opt = [](double v) -> std::optional<double> { return v > 0.0 ? std::optional<double>(v) : std::nullopt; };
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    VowelTableRecord r;
    double v[13];
    fields >> r.file >> r.duration_ms >> r.f0;
    for (double& x : v) fields >> x;
    if (!fields) throw csv::ParseError(path, number, "expected 16 whitespace-separated fields");
    std::string extra;
    if (fields >> extra) throw csv::ParseError(path, number, "expected 16 whitespace-separated fields");
    if (r.file.size() < 5) throw csv::ParseError(path, number, "file name too short to carry group and vowel");
    switch (r.file[0]) {
      case 'm': r.group = "men"; break;
      case 'w': r.group = "women"; break;
      case 'b':
      case 'g': r.group = "children"; break;
      default: throw csv::ParseError(path, number, "unknown speaker group letter");
    }
    r.vowel = r.file.substr(3, 2);
    for (int k = 0; k < 3; ++k) {
      r.steady[k] = opt(v[k]);
      r.at20[k] = opt(v[4 + k]);
      r.at50[k] = opt(v[7 + k]);
      r.at80[k] = opt(v[10 + k]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace formant
