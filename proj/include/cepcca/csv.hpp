#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "cepcca/errors.hpp"

namespace cepcca::csv {

/// Splits one CSV line on commas. No quoting; trailing '\r' is stripped.
inline std::vector<std::string> split(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

/// Parses a decimal float, locale-independent. Throws FormatError with
/// `context` (e.g. "series.csv row 3 column 2") on anything unparseable.
inline double parse_double(std::string_view token, const std::string& context) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw FormatError("unparseable number '" + std::string(token) + "' at " + context);
  }
  return value;
}

/// Formats a double with 17 significant digits so that parse(format(x)) == x.
inline std::string format(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

/// Reads all non-empty lines of a CSV file, split into cells.
inline std::vector<std::vector<std::string>> read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open file: " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    rows.push_back(split(line));
  }
  if (rows.empty()) throw FormatError("empty CSV file: " + path);
  return rows;
}

}  // namespace cepcca::csv
