#pragma once

#include <cstdio>
#include <string>

namespace chdbc::detail {

// 17 significant digits: round-trips every double, keeps emission byte-stable.
inline std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace chdbc::detail
