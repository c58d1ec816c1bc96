#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "capflow/errors.hpp"

namespace capflow {

inline constexpr double inf = std::numeric_limits<double>::infinity();

// Closed (possibly unbounded) interval of the capital space X.
struct Interval {
  double lo = 0.0;
  double hi = inf;

  bool lo_finite() const { return std::isfinite(lo); }
  bool hi_finite() const { return std::isfinite(hi); }
  bool bounded() const { return lo_finite() && hi_finite(); }

  bool contains(double x, double tol = 0.0) const {
    return x >= lo - tol && x <= hi + tol;
  }

  double clamp(double x) const {
    if (x < lo) return lo;
    if (x > hi) return hi;
    return x;
  }

  void validate() const {
    if (std::isnan(lo) || std::isnan(hi) || !(lo < hi)) {
      throw ConfigError("interval requires lo < hi, got [" + std::to_string(lo) +
                        ", " + std::to_string(hi) + "]");
    }
  }
};

} // namespace capflow
