#pragma once

// Small helpers shared by the CSV readers and writers.

#include <charconv>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace dendrite::csv {

inline std::vector<std::string> split(std::string_view line, char sep = ',') {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Shortest round-trip decimal form; identical on every conforming platform.
inline std::string fmt(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double to_double(const std::string& s, std::size_t row) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("row " + std::to_string(row) + ": not a number: '" + s + "'");
  }
  return v;
}

inline long long to_int(const std::string& s, std::size_t row) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("row " + std::to_string(row) + ": not an integer: '" + s + "'");
  }
  return v;
}

inline int to_bit(const std::string& s, std::size_t row) {
  if (s == "0") return 0;
  if (s == "1") return 1;
  throw std::runtime_error("row " + std::to_string(row) + ": expected 0 or 1, got '" + s + "'");
}

}  // namespace dendrite::csv
