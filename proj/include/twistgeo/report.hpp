#pragma once
// Deterministic report artifacts. JSON is emitted with lexicographically
// sorted keys, floats at 17 significant digits (lossless round-trip), LF
// line ends, and no timestamps, so identical inputs give byte-identical
// bytes. CSV uses the same float format.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace twistgeo {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string fmt_sig17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void dump17(const nlohmann::json& j, std::string& out, int depth) {
  const std::string pad(static_cast<size_t>(2 * depth), ' ');
  const std::string pad1(static_cast<size_t>(2 * (depth + 1)), ' ');
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map order: sorted keys
        if (!first) out += ",\n";
        first = false;
        out += pad1 + nlohmann::json(it.key()).dump() + ": ";
        dump17(it.value(), out, depth + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ",\n";
        first = false;
        out += pad1;
        dump17(v, out, depth + 1);
      }
      out += "\n" + pad + "]";
      return;
    }
    case nlohmann::json::value_t::number_float: {
      double v = j.get<double>();
      if (std::isfinite(v))
        out += fmt_sig17(v);
      else
        out += "null";  // JSON has no inf/nan
      return;
    }
    default:
      out += j.dump();
      return;
  }
}

}  // namespace detail

inline std::string json_dump17(const nlohmann::json& j) {
  std::string out;
  detail::dump17(j, out, 0);
  out += "\n";
  return out;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

// -- digest -------------------------------------------------------------------

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string json_digest(const nlohmann::json& j) { return hex64(fnv1a64(json_dump17(j))); }

// -- csv ----------------------------------------------------------------------

inline std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string csv_table(const std::vector<std::string>& header,
                             const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + csv_cell(header[i]);
  out += "\n";
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw IoError("csv_table: row width mismatch");
    for (size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_cell(row[i]);
    out += "\n";
  }
  return out;
}

}  // namespace twistgeo
