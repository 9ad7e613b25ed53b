#pragma once

#include <cstdio>
#include <string>

namespace agtm::detail {

// Locale-independent shortest-ish decimal form used in every text artifact.
inline std::string format_g(double v, int precision = 10) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

}  // namespace agtm::detail
