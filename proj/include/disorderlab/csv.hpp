#pragma once

// Round-trip CSV numerics and energy-grid specs.

#include <charconv>
#include <cmath>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "disorderlab/types.hpp"

namespace disorderlab {

// Shortest decimal that parses back to the same double; NaN becomes an empty cell.
inline std::string format_double(double v) {
  if (std::isnan(v)) return {};
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return std::nan("");
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DomainError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

/// "start:stop:count" (inclusive linear grid) or a comma-separated list.
inline std::vector<double> parse_grid(std::string_view text) {
  if (text.find(':') != std::string_view::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw DomainError("grid must be start:stop:count");
    const double a = parse_double(parts[0]), b = parse_double(parts[1]);
    const double n = parse_double(parts[2]);
    if (!std::isfinite(a) || !std::isfinite(b) || !(n >= 1.0) || n != std::floor(n)) {
      throw DomainError("grid must be start:stop:count with count >= 1");
    }
    const auto count = static_cast<std::size_t>(n);
    std::vector<double> g(count);
    if (count == 1) {
      g[0] = a;
      return g;
    }
    for (std::size_t i = 0; i < count; ++i) {
      g[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    g.back() = b;
    return g;
  }
  std::vector<double> g;
  for (const auto& p : split(text, ',')) {
    const double v = parse_double(p);
    if (std::isnan(v)) throw DomainError("empty entry in grid list");
    g.push_back(v);
  }
  return g;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::ptrdiff_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<std::ptrdiff_t>(i);
    return -1;
  }

  std::vector<double> numeric_column(std::string_view name) const {
    const auto c = column(name);
    if (c < 0) throw DomainError("CSV has no column '" + std::string(name) + "'");
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
      out.push_back(static_cast<std::size_t>(c) < r.size() ? parse_double(r[static_cast<std::size_t>(c)])
                                                           : std::nan(""));
    }
    return out;
  }
};

inline CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (first) {
      t.header = split(line, ',');
      first = false;
    } else {
      t.rows.push_back(split(line, ','));
    }
  }
  return t;
}

}  // namespace disorderlab
