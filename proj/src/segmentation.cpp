#include "formant/segmentation.hpp"

#include <stdexcept>

#include "formant/csv.hpp"

namespace formant {

std::string to_string(BroadClass c) {
  switch (c) {
    case BroadClass::vowel: return "vowel";
    case BroadClass::semivowel: return "semivowel";
    case BroadClass::nasal: return "nasal";
    case BroadClass::fricative: return "fricative";
    case BroadClass::affricate: return "affricate";
    case BroadClass::stop: return "stop";
    case BroadClass::silence: return "silence";
  }
  return "unknown";
}

BroadClass broad_class_from_string(const std::string& name) {
  for (int i = 0; i < kNumBroadClasses; ++i) {
    const auto c = static_cast<BroadClass>(i);
    if (to_string(c) == name) return c;
  }
  throw std::invalid_argument("unknown broad phone class '" + name + "'");
}

bool is_consonant(BroadClass c) { return c != BroadClass::vowel && c != BroadClass::silence; }

void PhoneSegmentation::validate(int num_frames) const {
  int previous_end = 0;
  for (const auto& iv : intervals) {
    if (iv.start_frame < previous_end) throw std::invalid_argument("phone intervals overlap or are unsorted");
    if (iv.end_frame <= iv.start_frame) throw std::invalid_argument("empty phone interval");
    if (iv.end_frame > num_frames) throw std::invalid_argument("phone interval beyond the last frame");
    previous_end = iv.end_frame;
  }
}

std::vector<std::optional<BroadClass>> PhoneSegmentation::frame_classes(int num_frames) const {
  std::vector<std::optional<BroadClass>> out(num_frames);
  for (const auto& iv : intervals) {
    for (int t = std::max(0, iv.start_frame); t < std::min(num_frames, iv.end_frame); ++t) out[t] = iv.broad_class;
  }
  return out;
}

PhoneSegmentation PhoneSegmentation::from_frame_classes(const std::vector<std::optional<BroadClass>>& classes) {
  PhoneSegmentation seg;
  const int n = static_cast<int>(classes.size());
  int t = 0;
  while (t < n) {
    if (!classes[t]) {
      ++t;
      continue;
    }
    int end = t + 1;
    while (end < n && classes[end] == classes[t]) ++end;
    seg.intervals.push_back({t, end, *classes[t]});
    t = end;
  }
  return seg;
}

const std::map<std::string, BroadClass>& default_phone_class_map() {
  static const std::map<std::string, BroadClass> table = [] {
    using B = BroadClass;
    std::map<std::string, BroadClass> m;
    for (const char* p : {"iy", "ih", "eh", "ey", "ae", "aa", "aw", "ay", "ah", "ao", "oy", "ow", "uh", "uw", "ux", "er",
                          "ax", "ix", "axr", "ax-h"}) {
      m[p] = B::vowel;
    }
    for (const char* p : {"l", "r", "w", "y", "hh", "hv", "el"}) m[p] = B::semivowel;
    for (const char* p : {"m", "n", "ng", "em", "en", "eng", "nx"}) m[p] = B::nasal;
    for (const char* p : {"s", "sh", "z", "zh", "f", "th", "v", "dh"}) m[p] = B::fricative;
    for (const char* p : {"jh", "ch"}) m[p] = B::affricate;
    for (const char* p : {"b", "d", "g", "p", "t", "k", "dx", "q", "bcl", "dcl", "gcl", "pcl", "tcl", "kcl"}) {
      m[p] = B::stop;
    }
    for (const char* p : {"pau", "epi", "h#"}) m[p] = B::silence;
    return m;
  }();
  return table;
}

std::map<std::string, BroadClass> load_phone_class_map(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const int phone = table.require_column("phone");
  const int cls = table.require_column("broad_class");
  std::map<std::string, BroadClass> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    try {
      out[table.rows[r][phone]] = broad_class_from_string(table.rows[r][cls]);
    } catch (const std::invalid_argument& e) {
      throw csv::ParseError(path, table.lines[r], e.what());
    }
  }
  return out;
}

}  // namespace formant
