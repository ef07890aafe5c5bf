#ifndef LEARNDYN_FORMAT_HPP
#define LEARNDYN_FORMAT_HPP

#include <cmath>
#include <cstdio>
#include <string>

namespace learndyn {

/// Shortest stable text for a real: integers print without a fraction,
/// everything else with 12 significant digits.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[48];
  if (v == std::floor(v) && std::abs(v) < 1e15)
    std::snprintf(buf, sizeof buf, "%.0f", v == 0.0 ? 0.0 : v);
  else
    std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace learndyn

#endif  // LEARNDYN_FORMAT_HPP
