#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "capflow/errors.hpp"

namespace capflow::detail {

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

// Trapezoid rule over sorted nodes.
inline double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw GridMismatch("trapezoid: node/value size mismatch");
  double acc = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    acc += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  }
  return acc;
}

// Adaptive Simpson quadrature for smooth callables (used where grid-free
// integrals are needed, e.g. normalization constants and identity checks).
inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a,
                                   double b, double fa, double fm, double fb,
                                   double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  // Below the roundoff floor the measured delta is noise that does not shrink
  // with further subdivision, so refinement can never satisfy a tighter bound.
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() *
                       (std::abs(left) + std::abs(right));
  if (depth <= 0 || std::abs(delta) <= std::max(15.0 * tol, noise)) {
    return left + right + delta / 15.0;
  }
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate_adaptive(const std::function<double(double)>& f, double a,
                                 double b, double tol = 1e-10, int max_depth = 48) {
  if (!(a < b)) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  // The relative tolerance is anchored to a coarse composite estimate of
  // integral |f|; three samples alone can miss an interior peak entirely and
  // drive the absolute tolerance below the attainable precision.
  double mag = 0.0;
  constexpr int kScan = 32;
  double prev_x = a, prev_f = std::abs(fa);
  for (int i = 1; i <= kScan; ++i) {
    const double x = a + (b - a) * static_cast<double>(i) / kScan;
    const double fx = std::abs(i == kScan ? fb : f(x));
    mag += 0.5 * (prev_f + fx) * (x - prev_x);
    prev_x = x;
    prev_f = fx;
  }
  const double scale = std::max({std::abs(whole), mag, 1e-300});
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol * scale, max_depth);
}

// ---------------------------------------------------------------------------
// Root finding: bracketed bisection with Newton polish.
// ---------------------------------------------------------------------------

// Solves f(x) = 0 for x in [lo, hi], f(lo) and f(hi) of opposite sign.
// deriv may be null (pure bisection then).
inline double solve_bracketed(const std::function<double(double)>& f, double lo,
                              double hi, double x_tol,
                              const std::function<double(double)>* deriv = nullptr,
                              int max_iter = 200) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0)) {
    throw NoConvergence("solve_bracketed: endpoints do not bracket a root");
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < max_iter; ++it) {
    double fx = f(x);
    if (fx == 0.0) return x;
    if ((fx > 0) == (fhi > 0)) {
      hi = x;
      fhi = fx;
    } else {
      lo = x;
      flo = fx;
    }
    double next = 0.5 * (lo + hi);
    if (deriv != nullptr) {
      const double d = (*deriv)(x);
      if (d != 0.0 && std::isfinite(d)) {
        const double newton = x - fx / d;
        if (newton > lo && newton < hi) next = newton;
      }
    }
    if (std::abs(next - x) <= x_tol) {
      // one more evaluation to keep the bracket honest, then stop
      return next;
    }
    x = next;
  }
  return x;
}

// Central finite difference with the step convention used across the engine.
inline double central_diff(const std::function<double(double)>& f, double x) {
  const double h = std::max(1e-6, 1e-8 * std::abs(x));
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// ---------------------------------------------------------------------------
// Gaussian helpers
// ---------------------------------------------------------------------------

inline double norm_pdf(double z) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// ---------------------------------------------------------------------------
// Least squares line fit  y ~ intercept + slope * x
// ---------------------------------------------------------------------------

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ConfigError("fit_line: need two equal-length samples");
  }
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw ConfigError("fit_line: degenerate abscissae");
  LineFit out;
  out.slope = (n * sxy - sx * sy) / denom;
  out.intercept = (sy - out.slope * sx) / n;
  return out;
}

// ---------------------------------------------------------------------------
// Deterministic data-parallel map. Width capped by CAPFLOW_THREADS.
// ---------------------------------------------------------------------------

inline unsigned thread_budget() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CAPFLOW_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(v));
  }
  return hw;
}

// Applies fn(i) for i in [0, n). Each index owns its output slot, so the
// result is bit-identical regardless of the number of workers.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = std::min<std::size_t>(thread_budget(), n == 0 ? 1 : n);
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// FNV-1a 64-bit hash (manifest checksums)
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(std::span<const unsigned char>(
      reinterpret_cast<const unsigned char*>(s.data()), s.size()));
}

} // namespace capflow::detail
