#pragma once

#include <cstdio>
#include <string>

namespace graphda {

// Shortest decimal form that parses back to the same double (17 significant
// digits round-trips IEEE 754 binary64).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace graphda
