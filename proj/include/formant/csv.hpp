#pragma once

// Small helpers for the comma-separated formats used across the toolkit.
// No quoting: fields never contain commas or newlines.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace formant::csv {

struct ParseError : std::runtime_error {
  ParseError(const std::filesystem::path& file, int line, const std::string& what);
  std::filesystem::path file;
  int line;
};

struct Table {
  std::filesystem::path source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;  // 1-based source line of each row

  /// Column index of `name`, or -1.
  int column(std::string_view name) const;
  /// Throws ParseError naming the file when `name` is absent.
  int require_column(std::string_view name) const;
};

std::vector<std::string> split(std::string_view line, char sep = ',');

/// Reads a header plus rows; every row must have exactly as many fields as
/// the header. Blank lines are skipped, a trailing '\r' is dropped.
Table read(const std::filesystem::path& path);

double parse_double(const std::string& field, const Table& table, std::size_t row);
long parse_int(const std::string& field, const Table& table, std::size_t row);
std::uint64_t parse_uint64(const std::string& field, const Table& table, std::size_t row);
bool parse_flag(const std::string& field, const Table& table, std::size_t row);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

/// Writes `content` to a sibling temp file, then renames it over `path`.
void write_atomically(const std::filesystem::path& path, const std::string& content);

}  // namespace formant::csv
