#pragma once

// One-generation transfer step for the density recursion
//   f_{t+1}(x) ∝ n(rho(x)) / tau'(rho(x)) * f_t(rho(x)),   rho = tau^{-1},
// the atom analogue, and the multi-generation driver with stopping rules.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "capflow/distribution.hpp"
#include "capflow/errors.hpp"
#include "capflow/function_model.hpp"

namespace capflow {

struct StepOptions {
  InterpScheme interp = InterpScheme::Cubic;
};

struct StepResult {
  GridDistribution dist;  // mass-1 normalized
  double growth;          // population growth factor E_t[n] of this step
};

// Quadrature estimate of E[n] under d (independent of the step kernel).
inline double expected_fertility(const GridDistribution& d, const FunctionSpec& n) {
  return d.expect([&n](double x) { return n.eval(x); }) / d.total_mass();
}

// Density transfer step. The growth factor is the mass of the transferred
// (unnormalized) density — the change-of-variables form of E_t[n] — so the
// same quadrature serves both the update and the growth bookkeeping.
inline StepResult step_density(const GridDistribution& f, const FunctionSpec& n,
                               const FunctionSpec& tau, StepOptions opts = {}) {
  if (f.has_atoms()) {
    throw ConfigError("step_density: input must be atomless (use step_atoms)");
  }
  const auto& xs = f.grid().nodes();
  std::vector<double> g(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double p = tau.inverse(xs[i]);
    const double fp = f.density_at(p, opts.interp);
    if (fp == 0.0) {
      g[i] = 0.0;
      continue;
    }
    const double dp = tau.derivative(p);
    if (!(dp > 0.0)) throw DomainError("step_density: non-positive tau' at preimage");
    g[i] = n.eval(p) / dp * fp;
  }
  const double growth = detail::trapezoid(xs, g);
  if (!(growth > 0.0) || !std::isfinite(growth)) {
    throw ZeroMass("step_density: transferred mass is not positive");
  }
  GridDistribution out(f.grid_ptr(), std::move(g));
  return {out.normalized(), growth};
}

// Atom transfer step: (y, w) -> (tau(y), w n(y) / E), E = sum w n(y).
inline StepResult step_atoms(const GridDistribution& f, const FunctionSpec& n,
                             const FunctionSpec& tau) {
  if (!f.has_atoms() || f.density_mass() > 0.0) {
    throw ConfigError("step_atoms: input must be purely atomic");
  }
  double growth = 0.0;
  for (const Atom& a : f.atoms()) growth += a.mass * n.eval(a.location);
  if (!(growth > 0.0)) throw ZeroMass("step_atoms: zero fertility mass");
  std::vector<Atom> moved;
  moved.reserve(f.atoms().size());
  for (const Atom& a : f.atoms()) {
    moved.push_back(Atom{tau.eval(a.location), a.mass * n.eval(a.location) / growth});
  }
  return {GridDistribution::pure_atoms(f.grid_ptr(), std::move(moved)), growth};
}

enum class StopReason { Tolerance, MaxGenerations, AtomCollapse };

inline const char* stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::Tolerance: return "tolerance";
    case StopReason::MaxGenerations: return "max_generations";
    case StopReason::AtomCollapse: return "atom_collapse";
  }
  return "unknown";
}

struct RunOptions {
  int max_generations = 200;
  double tol = 1e-8;                 // stop when step distance falls below
  Metric metric = Metric::Kolmogorov;
  InterpScheme interp = InterpScheme::Cubic;
  int snapshot_every = 1;            // keep every k-th generation (first/last always)
  double atom_eps_cells = 5.0;       // collapse window in grid cells
  double atom_delta = 1e-3;          // collapse mass deficit
  bool watch_sinks = true;
  double expand_mass_tol = 1e-6;     // boundary mass triggering re-gridding
  int max_expansions = 20;
};

struct Snapshot {
  int t;
  GridDistribution dist;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
  std::vector<double> growth_factors; // E_t for t = 0..generations-1
  std::vector<double> step_distances; // distance(f_t, f_{t+1})
  StopReason stop_reason = StopReason::MaxGenerations;
  bool converged = false;
  std::optional<double> collapse_location;
  int generations = 0;
  int expansions = 0;

  const GridDistribution& final_dist() const { return snapshots.back().dist; }
};

// Fertility may vary across generations (scale shifts, endogenous feedback).
using FertilitySchedule = std::function<FunctionSpec(int)>;

namespace dynamics_detail {

// Re-grid d onto [lo, hi] with the same node count and scheme.
inline GridDistribution regrid(const GridDistribution& d, double lo, double hi,
                               InterpScheme interp) {
  const auto& g = d.grid();
  GridPtr wider = (g.scheme() == GridScheme::Uniform)
                      ? Grid::uniform(lo, hi, static_cast<int>(g.size()))
                      : Grid::log_spaced(lo, hi, static_cast<int>(g.size()));
  std::vector<double> vals(wider->size());
  for (std::size_t i = 0; i < wider->size(); ++i) {
    vals[i] = d.density_at(wider->node(i), interp);
  }
  return GridDistribution(wider, std::move(vals), d.atoms()).normalized();
}

// Mass sitting within `cells` grid cells of the upper/lower truncation edge.
inline double edge_mass(const GridDistribution& d, bool upper, int cells) {
  const auto& xs = d.grid().nodes();
  const std::size_t n = xs.size();
  const std::size_t c = std::min<std::size_t>(static_cast<std::size_t>(cells), n - 1);
  return upper ? d.mass_in(xs[n - 1 - c], xs[n - 1]) : d.mass_in(xs[0], xs[c]);
}

} // namespace dynamics_detail

// Evolves f_0 for up to max_generations, renormalizing every step.
// Stops on step-distance tolerance, on atom collapse at a sink (the analytic
// degenerate steady state), or at the generation cap. When the state presses
// against a truncation edge of an unbounded space the grid is doubled; more
// than max_expansions doublings raises DomainError (explosive dynamics).
inline Trajectory run_schedule(const GridDistribution& f0, const FertilitySchedule& n_of_t,
                               const FunctionSpec& tau, const Interval& space,
                               RunOptions opts = {}) {
  if (opts.max_generations < 0) throw ConfigError("run: max_generations must be >= 0");
  Trajectory traj;
  GridDistribution d = f0.normalized();
  const bool atom_mode = f0.has_atoms();
  if (atom_mode && f0.density_mass() > 1e-15 * f0.total_mass()) {
    throw ConfigError("run: mixed atom+density initial states are not supported");
  }

  std::vector<double> sinks;
  if (opts.watch_sinks) {
    FixedPointOptions fpo;
    const IntervalDecomposition decomp = find_fixed_points(tau, fpo);
    for (const auto& fp : decomp.fixed_points) {
      if (fp.kind == FixedPointKind::Sink) sinks.push_back(fp.location);
    }
  }

  traj.snapshots.push_back({0, d});
  StepOptions sopts{opts.interp};

  for (int t = 0; t < opts.max_generations; ++t) {
    if (!atom_mode) {
      // adaptive truncation of unbounded spaces
      bool expanded = true;
      while (expanded) {
        expanded = false;
        const auto& g = d.grid();
        if (!space.hi_finite() &&
            dynamics_detail::edge_mass(d, true, 2) > opts.expand_mass_tol * d.total_mass()) {
          if (traj.expansions >= opts.max_expansions) {
            throw DomainError("run: mass keeps escaping the upper truncation "
                              "(explosive dynamics); expansion cap reached");
          }
          d = dynamics_detail::regrid(d, g.lo(), g.hi() + (g.hi() - g.lo()), opts.interp);
          ++traj.expansions;
          expanded = true;
          continue;
        }
        if (!space.lo_finite() &&
            dynamics_detail::edge_mass(d, false, 2) > opts.expand_mass_tol * d.total_mass()) {
          if (traj.expansions >= opts.max_expansions) {
            throw DomainError("run: mass keeps escaping the lower truncation "
                              "(explosive dynamics); expansion cap reached");
          }
          d = dynamics_detail::regrid(d, g.lo() - (g.hi() - g.lo()), g.hi(), opts.interp);
          ++traj.expansions;
          expanded = true;
        }
      }
      if (d.grid().nodes() != traj.snapshots.back().dist.grid().nodes() &&
          traj.snapshots.back().t == t) {
        traj.snapshots.back().dist = d; // keep the snapshot on the active grid
      }
    }

    const FunctionSpec n_t = n_of_t(t);
    StepResult step = atom_mode ? step_atoms(d, n_t, tau) : step_density(d, n_t, tau, sopts);
    traj.growth_factors.push_back(step.growth);

    const double dist = distance(step.dist, d, opts.metric);
    traj.step_distances.push_back(dist);
    d = std::move(step.dist);
    traj.generations = t + 1;

    const bool keep = ((t + 1) % std::max(1, opts.snapshot_every)) == 0;
    if (keep) traj.snapshots.push_back({t + 1, d});

    if (opts.watch_sinks) {
      const double eps = opts.atom_eps_cells * d.grid().max_cell_width();
      for (double s : sinks) {
        if (detect_atom(d, s, eps, opts.atom_delta)) {
          traj.stop_reason = StopReason::AtomCollapse;
          traj.converged = true;
          traj.collapse_location = s;
          if (!keep) traj.snapshots.push_back({t + 1, d});
          return traj;
        }
      }
    }
    if (dist < opts.tol) {
      traj.stop_reason = StopReason::Tolerance;
      traj.converged = true;
      if (!keep) traj.snapshots.push_back({t + 1, d});
      return traj;
    }
  }
  traj.stop_reason = StopReason::MaxGenerations;
  traj.converged = false;
  if (traj.snapshots.back().t != traj.generations) {
    traj.snapshots.push_back({traj.generations, d});
  }
  return traj;
}

inline Trajectory run(const GridDistribution& f0, const FunctionSpec& n,
                      const FunctionSpec& tau, const Interval& space, RunOptions opts = {}) {
  return run_schedule(f0, [&n](int) { return n; }, tau, space, opts);
}

struct GenerationVerdict {
  int t;
  OrderVerdict verdict;
};

// Per-generation FOSD comparison of two trajectories recorded on the same
// grid with the same snapshot cadence: does a dominate b at each snapshot?
inline std::vector<GenerationVerdict> compare_trajectories(const Trajectory& a,
                                                           const Trajectory& b,
                                                           double tol = 1e-9) {
  if (a.snapshots.size() != b.snapshots.size()) {
    throw GridMismatch("compare_trajectories: snapshot counts differ");
  }
  std::vector<GenerationVerdict> out;
  out.reserve(a.snapshots.size());
  for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
    if (a.snapshots[i].t != b.snapshots[i].t) {
      throw GridMismatch("compare_trajectories: snapshot cadences differ");
    }
    out.push_back({a.snapshots[i].t, check_fosd(a.snapshots[i].dist, b.snapshots[i].dist, tol)});
  }
  return out;
}

} // namespace capflow
