#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "formant/dsp.hpp"
#include "formant/quantizer.hpp"
#include "formant/segmentation.hpp"

namespace formant {

/// One manifest row with its annotation loaded.
struct AnnotatedUtterance {
  std::string id;
  std::filesystem::path audio_path;       // absolute after load
  std::filesystem::path annotation_path;  // absolute after load
  FormantTrack track;
  std::optional<PhoneSegmentation> segmentation;
  std::string group;
  std::string vowel;
  std::string split = "train";
  std::string speaker;
  std::optional<std::uint64_t> seed;

  bool operator==(const AnnotatedUtterance&) const = default;
};

struct Manifest {
  std::string source_name;
  std::vector<AnnotatedUtterance> entries;

  const AnnotatedUtterance* find(const std::string& id) const;
  bool operator==(const Manifest&) const = default;
};

/// An utterance held in memory together with its audio.
struct LabeledUtterance {
  std::string id;
  Waveform wave;
  FormantTrack track;
  std::optional<PhoneSegmentation> segmentation;
  std::string group;
  std::string vowel;
  std::string speaker;
  std::string split = "train";
  std::optional<std::uint64_t> seed;
};

class ManifestError : public std::runtime_error {
 public:
  enum class Kind { missing_audio, missing_annotation, frame_mismatch, duplicate_id, bad_row };
  ManifestError(Kind kind, std::string id, const std::string& what);
  Kind kind() const { return kind_; }
  const std::string& id() const { return id_; }

 private:
  Kind kind_;
  std::string id_;
};

/// Per-utterance annotation CSV:
/// `frame,f1_hz,f2_hz,f3_hz,valid1,valid2,valid3[,phone_class]`.
void write_annotation_csv(const std::filesystem::path& path, const FormantTrack& track,
                          const std::optional<PhoneSegmentation>& segmentation = std::nullopt);
std::pair<FormantTrack, std::optional<PhoneSegmentation>> read_annotation_csv(const std::filesystem::path& path);

/// Manifest CSV: `id,audio_path,annotation_path,group,vowel,split` with
/// optional trailing `speaker` and `seed` columns. Paths are relative to the
/// manifest's directory. Annotations must already exist on disk.
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// Parses and validates a manifest. Every utterance's annotation must have
/// exactly as many frames as its audio under `geometry`. Any failure throws
/// and nothing is returned.
Manifest load_manifest(const std::filesystem::path& path, const FrameGeometry& geometry = {});

/// Reads the audio of every entry.
std::vector<LabeledUtterance> load_audio(const Manifest& manifest, int expected_rate = 16000);

/// Writes `<id>.wav` and `<id>.csv` for every utterance plus `manifest.csv`
/// into `dir` (created if needed). Returns the manifest as saved.
Manifest write_corpus(const std::filesystem::path& dir, std::span<const LabeledUtterance> utterances,
                      const std::string& source_name = "synthetic");

/// Within each group, a seeded `fraction` of the speakers (or utterances,
/// when no speaker ids are present) goes to the test side.
std::pair<Manifest, Manifest> split_by_speaker_group(const Manifest& manifest, double fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Corpus adapters. The corpora themselves are not distributed; these read the
// expected on-disk layouts and are exercised with fixture files.

/// VTR formant file: flat little-endian float32 records of eight values,
/// F1..F4 then B1..B4 in kHz, one record per 10 ms frame. Returns F1..F3 in
/// Hz resampled to the `hop_seconds` grid by nearest frame; zeros are
/// marked invalid.
FormantTrack read_vtr_formants(const std::filesystem::path& path, int num_frames, double hop_seconds = 0.01,
                               double file_period_seconds = 0.01);

/// One line of a Hillenbrand-style vowel table: whitespace separated
/// `file dur_ms f0 F1 F2 F3 F4 F1@20 F2@20 F3@20 F1@50 F2@50 F3@50 F1@80 F2@80 F3@80`
/// (steady-state values first). A value of 0 means unmeasured. The first
/// letter of `file` encodes the group (m, w, b, g) and letters 4-5 the vowel.
struct VowelTableRecord {
  std::string file;
  std::string group;
  std::string vowel;
  double duration_ms = 0.0;
  double f0 = 0.0;
  std::array<std::optional<double>, 3> steady;
  std::array<std::optional<double>, 3> at20;
  std::array<std::optional<double>, 3> at50;
  std::array<std::optional<double>, 3> at80;
};

std::vector<VowelTableRecord> read_vowel_table(const std::filesystem::path& path);

}  // namespace formant
