#pragma once

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gpds/common.hpp"

namespace gpds {

class ParseError : public Error {
 public:
  using Error::Error;
};

/// Decimal text with 17 significant digits; parsing it back gives the same double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& text, const std::string& where) {
  // strtod rather than stod: stod rejects subnormals, which would break round trips.
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || std::isspace(static_cast<unsigned char>(*begin))) {
    throw ParseError(where + ": not a number: '" + text + "'");
  }
  if (*end != '\0') throw ParseError(where + ": trailing characters in '" + text + "'");
  if (errno == ERANGE && std::isinf(v)) throw ParseError(where + ": out of range: '" + text + "'");
  return v;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(s);
  while (std::getline(in, field, sep)) out.push_back(trim(field));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

/// Writes a CSV with the given header and numeric rows.
inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw DimensionMismatch("CSV row width differs from header");
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

inline std::vector<std::string> coordinate_header(std::size_t dim) {
  std::vector<std::string> h;
  for (std::size_t d = 0; d < dim; ++d) h.push_back("x" + std::to_string(d + 1));
  return h;
}

inline void write_points_csv(const std::string& path, const PointList& points, std::size_t dim) {
  std::vector<std::vector<double>> rows;
  rows.reserve(points.size());
  for (const Point& p : points) {
    if (static_cast<std::size_t>(p.size()) != dim) throw DimensionMismatch("point dimension differs from header");
    rows.emplace_back(p.data(), p.data() + p.size());
  }
  write_csv(path, coordinate_header(dim), rows);
}

/// Parses point data: a header x1..xD, then one comma-separated row per point.
inline PointList parse_points_csv(const std::string& text, const std::string& name = "data") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(name + ": empty file");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const std::vector<std::string> header = split(trim(line), ',');
  if (header != coordinate_header(header.size())) {
    throw ParseError(name + ": header must name columns x1..xD");
  }
  const std::size_t dim = header.size();
  PointList points;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split(trim(line), ',');
    const std::string where = name + ":" + std::to_string(lineno);
    if (fields.size() != dim) throw ParseError(where + ": expected " + std::to_string(dim) + " columns");
    Point p(static_cast<Eigen::Index>(dim));
    for (std::size_t d = 0; d < dim; ++d) {
      if (fields[d].empty()) throw ParseError(where + ": missing value");
      p[static_cast<Eigen::Index>(d)] = parse_double(fields[d], where);
    }
    points.push_back(std::move(p));
  }
  return points;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline PointList read_points_csv(const std::string& path) { return parse_points_csv(read_file(path), path); }

/// Flat `key = value` settings; '#' starts a comment.
using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(const std::string& text, const std::string& name = "config") {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(where + ": empty key");
    if (out.count(key)) throw ParseError(where + ": duplicate key '" + key + "'");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace gpds
