#include "formant/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace formant::csv {

ParseError::ParseError(const std::filesystem::path& f, int l, const std::string& what)
    : std::runtime_error(f.string() + ":" + std::to_string(l) + ": " + what), file(f), line(l) {}

int Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

int Table::require_column(std::string_view name) const {
  const int c = column(name);
  if (c < 0) throw ParseError(source, 1, "missing column '" + std::string(name) + "'");
  return c;
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      return out;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Table table;
  table.source = path;
  std::string line;
  int number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw ParseError(path, number,
                       "expected " + std::to_string(table.header.size()) + " columns, found " +
                           std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.lines.push_back(number);
  }
  if (!have_header) throw ParseError(path, 1, "missing header row");
  return table;
}

double parse_double(const std::string& field, const Table& table, std::size_t row) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError(table.source, table.lines[row], "not a number: '" + field + "'");
  return v;
}

long parse_int(const std::string& field, const Table& table, std::size_t row) {
  long v = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError(table.source, table.lines[row], "not an integer: '" + field + "'");
  return v;
}

std::uint64_t parse_uint64(const std::string& field, const Table& table, std::size_t row) {
  std::uint64_t v = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(table.source, table.lines[row], "not an unsigned integer: '" + field + "'");
  }
  return v;
}

bool parse_flag(const std::string& field, const Table& table, std::size_t row) {
  if (field == "1") return true;
  if (field == "0") return false;
  throw ParseError(table.source, table.lines[row], "flag must be 0 or 1, found '" + field + "'");
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace formant::csv
