#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace formant {

enum class BroadClass { vowel, semivowel, nasal, fricative, affricate, stop, silence };

inline constexpr int kNumBroadClasses = 7;

std::string to_string(BroadClass c);
BroadClass broad_class_from_string(const std::string& name);
bool is_consonant(BroadClass c);

/// Frame interval [start_frame, end_frame) with a broad phone class.
struct PhoneInterval {
  int start_frame = 0;
  int end_frame = 0;
  BroadClass broad_class = BroadClass::silence;

  bool operator==(const PhoneInterval&) const = default;
};

struct PhoneSegmentation {
  std::vector<PhoneInterval> intervals;

  /// Sorted, non-empty, non-overlapping and inside [0, num_frames).
  void validate(int num_frames) const;
  /// Class of each frame; frames outside every interval are empty.
  std::vector<std::optional<BroadClass>> frame_classes(int num_frames) const;
  /// Merges runs of equal per-frame labels into intervals.
  static PhoneSegmentation from_frame_classes(const std::vector<std::optional<BroadClass>>& classes);

  bool operator==(const PhoneSegmentation&) const = default;
};

/// TIMIT phone symbol -> broad class. The table ships as
/// data/timit_broad_classes.csv; this is the same table compiled in.
const std::map<std::string, BroadClass>& default_phone_class_map();
std::map<std::string, BroadClass> load_phone_class_map(const std::filesystem::path& path);

}  // namespace formant
