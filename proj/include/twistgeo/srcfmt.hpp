// Numeric literals rendered for the expression grammar.
#pragma once

#include <cstdio>
#include <string>

namespace twistgeo {
namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string("(") + buf + ")";
}

// exponent position: the grammar wants a bare (possibly signed) number there
inline std::string fmt_raw(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail
}  // namespace twistgeo
