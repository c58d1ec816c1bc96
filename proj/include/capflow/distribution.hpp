#pragma once

// Grid-based representation of capital distributions: density values on a
// truncated grid plus point atoms, with quadrature, distances and the
// stochastic-order checks (FOSD, monotone likelihood ratio).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "capflow/closed_form.hpp"
#include "capflow/detail/numerics.hpp"
#include "capflow/errors.hpp"
#include "capflow/interval.hpp"

namespace capflow {

namespace detail {

// shortest round-trip decimal text for a double (deterministic output)
inline std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

} // namespace detail

enum class GridScheme { Uniform, LogSpaced };

inline const char* grid_scheme_name(GridScheme s) {
  return s == GridScheme::Uniform ? "uniform" : "log_spaced";
}

inline GridScheme grid_scheme_from_name(const std::string& s) {
  if (s == "uniform") return GridScheme::Uniform;
  if (s == "log_spaced" || s == "log") return GridScheme::LogSpaced;
  throw ConfigError("unknown grid scheme '" + s + "'");
}

// Immutable sorted node set over a truncation [lo, hi]. Grids are shared by
// distributions via shared_ptr so same-grid checks are cheap and exact.
class Grid {
public:
  static constexpr int min_nodes = 64;

  static std::shared_ptr<const Grid> uniform(double lo, double hi, int n) {
    validate_args(lo, hi, n);
    std::vector<double> nodes(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      nodes[static_cast<std::size_t>(i)] =
          lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    nodes.front() = lo;
    nodes.back() = hi;
    return std::shared_ptr<const Grid>(new Grid(std::move(nodes), GridScheme::Uniform));
  }

  static std::shared_ptr<const Grid> log_spaced(double lo, double hi, int n) {
    validate_args(lo, hi, n);
    if (!(lo > 0.0)) throw ConfigError("log_spaced grid requires lo > 0");
    std::vector<double> nodes(static_cast<std::size_t>(n));
    const double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < n; ++i) {
      nodes[static_cast<std::size_t>(i)] =
          std::exp(llo + (lhi - llo) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    nodes.front() = lo;
    nodes.back() = hi;
    return std::shared_ptr<const Grid>(new Grid(std::move(nodes), GridScheme::LogSpaced));
  }

  // Same spacing scheme with selected interior points moved onto the nearest
  // node (used so fixed points are exact nodes for interval decomposition).
  static std::shared_ptr<const Grid> with_anchors(const Grid& base,
                                                  std::span<const double> anchors) {
    std::vector<double> nodes = base.nodes_;
    for (double a : anchors) {
      if (!(a > nodes.front()) || !(a < nodes.back())) continue;
      auto it = std::lower_bound(nodes.begin(), nodes.end(), a);
      std::size_t i = static_cast<std::size_t>(it - nodes.begin());
      if (i > 0 && (it == nodes.end() || a - nodes[i - 1] < nodes[i] - a)) --i;
      nodes[i] = a;
    }
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    if (nodes.size() < min_nodes) throw ConfigError("anchored grid below minimum size");
    return std::shared_ptr<const Grid>(new Grid(std::move(nodes), base.scheme_));
  }

  // Sub-grid covering [lo, hi]: all base nodes strictly inside plus the exact
  // endpoints. Used by the parallel decomposition.
  static std::shared_ptr<const Grid> restricted(const Grid& base, double lo, double hi) {
    if (!(lo < hi)) throw ConfigError("restricted grid requires lo < hi");
    std::vector<double> nodes;
    nodes.push_back(lo);
    for (double x : base.nodes_) {
      if (x > lo && x < hi) nodes.push_back(x);
    }
    nodes.push_back(hi);
    if (nodes.size() < 4) {
      throw ConfigError("restricted grid has too few nodes; refine the base grid");
    }
    return std::shared_ptr<const Grid>(new Grid(std::move(nodes), base.scheme_));
  }

  const std::vector<double>& nodes() const { return nodes_; }
  GridScheme scheme() const { return scheme_; }
  double lo() const { return nodes_.front(); }
  double hi() const { return nodes_.back(); }
  std::size_t size() const { return nodes_.size(); }
  double node(std::size_t i) const { return nodes_[i]; }

  // index of the cell [node(i), node(i+1)] containing x (clamped)
  std::size_t cell(double x) const {
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
    std::size_t i = static_cast<std::size_t>(it - nodes_.begin());
    if (i == 0) return 0;
    if (i >= nodes_.size()) return nodes_.size() - 2;
    return i - 1;
  }

  double max_cell_width() const {
    double w = 0.0;
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
      w = std::max(w, nodes_[i] - nodes_[i - 1]);
    }
    return w;
  }

  bool same_nodes(const Grid& other) const {
    return this == &other || nodes_ == other.nodes_;
  }

private:
  Grid(std::vector<double> nodes, GridScheme scheme)
      : nodes_(std::move(nodes)), scheme_(scheme) {}

  static void validate_args(double lo, double hi, int n) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
      throw ConfigError("grid requires finite lo < hi");
    }
    if (n < min_nodes) {
      throw ConfigError("grid requires at least " + std::to_string(min_nodes) + " nodes");
    }
  }

  std::vector<double> nodes_;
  GridScheme scheme_;
};

using GridPtr = std::shared_ptr<const Grid>;

// Builds the truncated grid for a (possibly unbounded) space. Infinite ends
// are cut where an analytic reference leaves `tail_mass_tol` beyond the cut,
// or at the configured fallback when no reference is available.
inline GridPtr build_grid(const Interval& space, int n_nodes, GridScheme scheme,
                          double tail_mass_tol = 1e-6, const ClosedForm* reference = nullptr,
                          std::optional<double> fallback_hi = std::nullopt,
                          std::optional<double> fallback_lo = std::nullopt) {
  space.validate();
  double lo = space.lo;
  double hi = space.hi;
  if (!space.hi_finite()) {
    if (reference != nullptr) {
      hi = reference->quantile_hi(tail_mass_tol);
    } else if (fallback_hi.has_value()) {
      hi = *fallback_hi;
    } else {
      throw ConfigError("unbounded space needs an analytic reference or fallback hi");
    }
  }
  if (!space.lo_finite()) {
    if (reference != nullptr) {
      lo = reference->quantile_lo(tail_mass_tol);
    } else if (fallback_lo.has_value()) {
      lo = *fallback_lo;
    } else {
      throw ConfigError("unbounded space needs an analytic reference or fallback lo");
    }
  }
  if (!(lo < hi)) throw ConfigError("grid truncation collapsed: lo >= hi");
  return scheme == GridScheme::Uniform ? Grid::uniform(lo, hi, n_nodes)
                                       : Grid::log_spaced(lo, hi, n_nodes);
}

enum class InterpScheme { Linear, LogLinear, Cubic };

inline const char* interp_name(InterpScheme s) {
  switch (s) {
    case InterpScheme::Linear: return "linear";
    case InterpScheme::LogLinear: return "log_linear";
    case InterpScheme::Cubic: return "cubic";
  }
  return "unknown";
}

inline InterpScheme interp_from_name(const std::string& s) {
  if (s == "linear") return InterpScheme::Linear;
  if (s == "log_linear") return InterpScheme::LogLinear;
  if (s == "cubic") return InterpScheme::Cubic;
  throw ConfigError("unknown interpolation scheme '" + s + "'");
}

struct Atom {
  double location = 0.0;
  double mass = 0.0;
};

// Density values on a grid plus point atoms. Mass-1 normalization is the
// caller's contract; normalized() restores it exactly.
class GridDistribution {
public:
  GridDistribution(GridPtr grid, std::vector<double> density, std::vector<Atom> atoms = {})
      : grid_(std::move(grid)), density_(std::move(density)), atoms_(std::move(atoms)) {
    if (!grid_) throw ConfigError("grid distribution requires a grid");
    if (density_.size() != grid_->size()) {
      throw GridMismatch("density values must match grid size");
    }
    for (double v : density_) {
      if (!std::isfinite(v) || v < 0.0) {
        throw ConfigError("density values must be finite and non-negative");
      }
    }
    std::sort(atoms_.begin(), atoms_.end(),
              [](const Atom& a, const Atom& b) { return a.location < b.location; });
    for (const Atom& a : atoms_) {
      if (!(a.mass >= 0.0) || !std::isfinite(a.location)) {
        throw ConfigError("atoms must have finite location and mass >= 0");
      }
    }
    build_cumulative();
  }

  static GridDistribution from_density(GridPtr grid,
                                       const std::function<double(double)>& f,
                                       bool normalize = true) {
    std::vector<double> vals(grid->size());
    for (std::size_t i = 0; i < grid->size(); ++i) {
      vals[i] = std::max(0.0, f(grid->node(i)));
    }
    GridDistribution d(std::move(grid), std::move(vals));
    return normalize ? d.normalized() : d;
  }

  static GridDistribution from_closed_form(GridPtr grid, const ClosedForm& cf,
                                           bool normalize = true) {
    return from_density(std::move(grid), [&cf](double x) { return cf.density(x); },
                        normalize);
  }

  static GridDistribution pure_atoms(GridPtr grid, std::vector<Atom> atoms) {
    const std::size_t n = grid_size(grid);
    return GridDistribution(std::move(grid), std::vector<double>(n, 0.0), std::move(atoms));
  }

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const std::vector<double>& density() const { return density_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  bool has_atoms() const { return !atoms_.empty(); }

  bool same_grid(const GridDistribution& other) const {
    return grid_->same_nodes(*other.grid_);
  }

  double density_mass() const { return cum_.back(); }

  double atom_mass() const {
    double m = 0.0;
    for (const Atom& a : atoms_) m += a.mass;
    return m;
  }

  double total_mass() const { return density_mass() + atom_mass(); }

  GridDistribution normalized() const {
    const double m = total_mass();
    if (!(m > 0.0) || !std::isfinite(m)) {
      throw ZeroMass("cannot normalize a distribution with non-positive mass");
    }
    std::vector<double> vals(density_.size());
    for (std::size_t i = 0; i < density_.size(); ++i) vals[i] = density_[i] / m;
    std::vector<Atom> atoms = atoms_;
    for (Atom& a : atoms) a.mass /= m;
    return GridDistribution(grid_, std::move(vals), std::move(atoms));
  }

  // Interpolated density at x; exactly 0 outside the truncation window.
  double density_at(double x, InterpScheme scheme = InterpScheme::Linear) const {
    const auto& xs = grid_->nodes();
    if (x < xs.front() || x > xs.back()) return 0.0;
    const std::size_t j = grid_->cell(x);
    switch (scheme) {
      case InterpScheme::Linear:
        return lerp_cell(j, x);
      case InterpScheme::LogLinear: {
        const double f0 = density_[j], f1 = density_[j + 1];
        if (!(f0 > 0.0) || !(f1 > 0.0)) return lerp_cell(j, x);
        const double t = (x - xs[j]) / (xs[j + 1] - xs[j]);
        return std::exp((1.0 - t) * std::log(f0) + t * std::log(f1));
      }
      case InterpScheme::Cubic: {
        // 4-point Lagrange centred on the bracketing cell, clamped at 0
        const std::size_t n = xs.size();
        std::size_t j0 = (j == 0) ? 0 : j - 1;
        if (j0 + 3 >= n) j0 = n - 4;
        double acc = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
          double w = 1.0;
          for (std::size_t l = 0; l < 4; ++l) {
            if (l == k) continue;
            w *= (x - xs[j0 + l]) / (xs[j0 + k] - xs[j0 + l]);
          }
          acc += w * density_[j0 + k];
        }
        return std::max(0.0, acc);
      }
    }
    return 0.0;
  }

  // Right-continuous CDF including atoms.
  double cdf(double x) const {
    const auto& xs = grid_->nodes();
    double acc = 0.0;
    if (x >= xs.back()) {
      acc = cum_.back();
    } else if (x > xs.front()) {
      const std::size_t j = grid_->cell(x);
      const double fx = lerp_cell(j, x);
      acc = cum_[j] + 0.5 * (density_[j] + fx) * (x - xs[j]);
    }
    for (const Atom& a : atoms_) {
      if (a.location <= x) acc += a.mass;
    }
    return acc;
  }

  // CDF just below x (excludes an atom sitting exactly at x).
  double cdf_left(double x) const {
    double acc = cdf(x);
    for (const Atom& a : atoms_) {
      if (a.location == x) acc -= a.mass;
    }
    return acc;
  }

  // Probability mass on the closed window [lo, hi].
  double mass_in(double lo, double hi) const {
    if (!(lo <= hi)) return 0.0;
    const auto& xs = grid_->nodes();
    const double a = std::max(lo, xs.front());
    const double b = std::min(hi, xs.back());
    double acc = 0.0;
    if (a < b) acc = density_cdf(b) - density_cdf(a);
    for (const Atom& at : atoms_) {
      if (at.location >= lo && at.location <= hi) acc += at.mass;
    }
    return acc;
  }

  double moment(int k) const {
    const auto& xs = grid_->nodes();
    std::vector<double> integrand(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      integrand[i] = std::pow(xs[i], k) * density_[i];
    }
    double acc = detail::trapezoid(xs, integrand);
    for (const Atom& a : atoms_) acc += std::pow(a.location, k) * a.mass;
    return acc;
  }

  double mean() const { return moment(1) / total_mass(); }

  double variance() const {
    const double m = total_mass();
    const double mu = moment(1) / m;
    return moment(2) / m - mu * mu;
  }

  // trapezoid of integrand(x) * density(x) + atom contributions
  double expect(const std::function<double(double)>& g) const {
    const auto& xs = grid_->nodes();
    std::vector<double> integrand(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) integrand[i] = g(xs[i]) * density_[i];
    double acc = detail::trapezoid(xs, integrand);
    for (const Atom& a : atoms_) acc += g(a.location) * a.mass;
    return acc;
  }

  // snapshot CSV: header then `x,density,cdf` rows, atoms as `x,ATOM,mass`
  std::string to_csv() const {
    std::string out = "x,density,cdf\n";
    const auto& xs = grid_->nodes();
    for (std::size_t i = 0; i < xs.size(); ++i) {
      out += detail::fmt_double(xs[i]);
      out += ',';
      out += detail::fmt_double(density_[i]);
      out += ',';
      out += detail::fmt_double(cdf(xs[i]));
      out += '\n';
    }
    for (const Atom& a : atoms_) {
      out += detail::fmt_double(a.location);
      out += ",ATOM,";
      out += detail::fmt_double(a.mass);
      out += '\n';
    }
    return out;
  }

private:
  static std::size_t grid_size(const GridPtr& g) {
    if (!g) throw ConfigError("grid distribution requires a grid");
    return g->size();
  }

  double lerp_cell(std::size_t j, double x) const {
    const auto& xs = grid_->nodes();
    const double t = (x - xs[j]) / (xs[j + 1] - xs[j]);
    return (1.0 - t) * density_[j] + t * density_[j + 1];
  }

  // density-only cumulative at arbitrary x (no atoms)
  double density_cdf(double x) const {
    const auto& xs = grid_->nodes();
    if (x <= xs.front()) return 0.0;
    if (x >= xs.back()) return cum_.back();
    const std::size_t j = grid_->cell(x);
    const double fx = lerp_cell(j, x);
    return cum_[j] + 0.5 * (density_[j] + fx) * (x - xs[j]);
  }

  void build_cumulative() {
    const auto& xs = grid_->nodes();
    cum_.assign(xs.size(), 0.0);
    for (std::size_t i = 1; i < xs.size(); ++i) {
      cum_[i] = cum_[i - 1] + 0.5 * (density_[i] + density_[i - 1]) * (xs[i] - xs[i - 1]);
    }
  }

  GridPtr grid_;
  std::vector<double> density_;
  std::vector<Atom> atoms_;
  std::vector<double> cum_;
};

// ---------------------------------------------------------------------------
// Distances
// ---------------------------------------------------------------------------

enum class Metric { Kolmogorov, L1Density, Wasserstein1 };

inline const char* metric_name(Metric m) {
  switch (m) {
    case Metric::Kolmogorov: return "kolmogorov";
    case Metric::L1Density: return "l1_density";
    case Metric::Wasserstein1: return "wasserstein1";
  }
  return "unknown";
}

inline Metric metric_from_name(const std::string& s) {
  if (s == "kolmogorov") return Metric::Kolmogorov;
  if (s == "l1_density" || s == "l1") return Metric::L1Density;
  if (s == "wasserstein1" || s == "w1") return Metric::Wasserstein1;
  throw ConfigError("unknown metric '" + s + "'");
}

inline double distance(const GridDistribution& a, const GridDistribution& b, Metric m) {
  if (!a.same_grid(b)) throw GridMismatch("distance: distributions on different grids");
  const auto& xs = a.grid().nodes();
  switch (m) {
    case Metric::Kolmogorov: {
      double best = 0.0;
      auto probe = [&](double x) {
        best = std::max(best, std::abs(a.cdf(x) - b.cdf(x)));
        best = std::max(best, std::abs(a.cdf_left(x) - b.cdf_left(x)));
      };
      for (double x : xs) probe(x);
      for (const Atom& at : a.atoms()) probe(at.location);
      for (const Atom& at : b.atoms()) probe(at.location);
      return best;
    }
    case Metric::L1Density: {
      std::vector<double> diff(xs.size());
      for (std::size_t i = 0; i < xs.size(); ++i) {
        diff[i] = std::abs(a.density()[i] - b.density()[i]);
      }
      double acc = detail::trapezoid(xs, diff);
      // match atoms by location; unmatched atoms contribute their full mass
      std::vector<bool> used(b.atoms().size(), false);
      for (const Atom& at : a.atoms()) {
        bool matched = false;
        for (std::size_t j = 0; j < b.atoms().size(); ++j) {
          if (!used[j] && b.atoms()[j].location == at.location) {
            acc += std::abs(at.mass - b.atoms()[j].mass);
            used[j] = true;
            matched = true;
            break;
          }
        }
        if (!matched) acc += at.mass;
      }
      for (std::size_t j = 0; j < b.atoms().size(); ++j) {
        if (!used[j]) acc += b.atoms()[j].mass;
      }
      return acc;
    }
    case Metric::Wasserstein1: {
      std::vector<double> diff(xs.size());
      for (std::size_t i = 0; i < xs.size(); ++i) {
        diff[i] = std::abs(a.cdf(xs[i]) - b.cdf(xs[i]));
      }
      return detail::trapezoid(xs, diff);
    }
  }
  throw Error("distance: unreachable");
}

// ---------------------------------------------------------------------------
// Stochastic order checks
// ---------------------------------------------------------------------------

enum class OrderRelation { StrictlyDominates, WeaklyDominates, Equal, Crosses };

inline const char* order_relation_name(OrderRelation r) {
  switch (r) {
    case OrderRelation::StrictlyDominates: return "strictly_dominates";
    case OrderRelation::WeaklyDominates: return "weakly_dominates";
    case OrderRelation::Equal: return "equal";
    case OrderRelation::Crosses: return "crosses";
  }
  return "unknown";
}

struct OrderVerdict {
  OrderRelation relation = OrderRelation::Equal;
  std::optional<double> witness; // a crossing/violation location when relevant
};

// Does d_hat first-order stochastically dominate d (F_hat <= F pointwise)?
inline OrderVerdict check_fosd(const GridDistribution& d_hat, const GridDistribution& d,
                               double tol = 1e-9) {
  if (!d_hat.same_grid(d)) throw GridMismatch("check_fosd: different grids");
  double worst_up = 0.0;   // F_hat - F > 0 violates dominance
  double best_down = 0.0;  // most negative F_hat - F witnesses strictness
  std::optional<double> wit_up, wit_down;
  auto probe = [&](double x) {
    const double gap = d_hat.cdf(x) - d.cdf(x);
    if (gap > worst_up) {
      worst_up = gap;
      wit_up = x;
    }
    if (gap < best_down) {
      best_down = gap;
      wit_down = x;
    }
  };
  for (double x : d.grid().nodes()) probe(x);
  for (const Atom& a : d_hat.atoms()) probe(a.location);
  for (const Atom& a : d.atoms()) probe(a.location);

  OrderVerdict v;
  const bool dominates = worst_up <= tol;
  const bool dominated = -best_down <= tol;
  if (dominates && dominated) {
    v.relation = OrderRelation::Equal;
  } else if (dominates) {
    v.relation = OrderRelation::StrictlyDominates;
    v.witness = wit_down;
  } else if (dominated) {
    v.relation = OrderRelation::Crosses; // dominated by d: not a dominance of d_hat
    v.witness = wit_up;
  } else {
    v.relation = OrderRelation::Crosses;
    v.witness = wit_up;
  }
  return v;
}

// Monotone likelihood ratio check of values_hat / values over grid nodes.
// Values are any positive samples over the nodes (densities or fertility).
inline OrderVerdict check_mlr(std::span<const double> values_hat,
                              std::span<const double> values, const Grid& grid,
                              double rel_slack = 1e-9) {
  if (values_hat.size() != values.size() || values.size() != grid.size()) {
    throw GridMismatch("check_mlr: size mismatch");
  }
  const std::size_t n = values.size();
  std::size_t lo = 0, hi = n; // [lo, hi) with both strictly positive
  while (lo < n && !(values_hat[lo] > 0.0 && values[lo] > 0.0)) ++lo;
  while (hi > lo && !(values_hat[hi - 1] > 0.0 && values[hi - 1] > 0.0)) --hi;
  if (hi - lo < 2) throw UndefinedRatio("check_mlr: fewer than two positive ratio points");
  for (std::size_t i = lo; i < hi; ++i) {
    if (!(values[i] > 0.0) || !(values_hat[i] > 0.0)) {
      throw UndefinedRatio("check_mlr: zero value inside the shared support");
    }
  }
  double prev = values_hat[lo] / values[lo];
  double lo_ratio = prev, hi_ratio = prev;
  OrderVerdict v;
  for (std::size_t i = lo + 1; i < hi; ++i) {
    const double r = values_hat[i] / values[i];
    if (r < prev - rel_slack * std::max(std::abs(r), std::abs(prev))) {
      v.relation = OrderRelation::Crosses;
      v.witness = grid.node(i);
      return v;
    }
    prev = std::max(prev, r);
    lo_ratio = std::min(lo_ratio, r);
    hi_ratio = std::max(hi_ratio, r);
  }
  const bool increases_somewhere =
      hi_ratio - lo_ratio > rel_slack * std::max(std::abs(lo_ratio), std::abs(hi_ratio));
  v.relation = increases_somewhere ? OrderRelation::StrictlyDominates : OrderRelation::Equal;
  return v;
}

inline OrderVerdict check_mlr(const GridDistribution& d_hat, const GridDistribution& d,
                              double rel_slack = 1e-9) {
  if (!d_hat.same_grid(d)) throw GridMismatch("check_mlr: different grids");
  return check_mlr(d_hat.density(), d.density(), d.grid(), rel_slack);
}

// True when at least (1 - delta) of the mass lies within [s-eps, s+eps].
inline bool detect_atom(const GridDistribution& d, double s, double eps, double delta) {
  const double total = d.total_mass();
  if (!(total > 0.0)) throw ZeroMass("detect_atom: empty distribution");
  return d.mass_in(s - eps, s + eps) >= (1.0 - delta) * total;
}

} // namespace capflow
