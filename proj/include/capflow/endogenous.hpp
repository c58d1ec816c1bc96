#pragma once

// Growth model with endogenous fertility and transmission: closed-form
// parental optimum, induced transmission, relative-capital renormalization
// into the core engine, regime classification, and balanced-growth analysis.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "capflow/dynamics.hpp"
#include "capflow/errors.hpp"
#include "capflow/function_model.hpp"
#include "capflow/steady_state.hpp"

namespace capflow {

struct EndoParams {
  double alpha;  // elasticity of child capital to education, in (0,1)
  double beta;   // elasticity to parental capital, in (0,1)
  double gamma;  // elasticity to average capital, in (0, 1-beta]
  double phi;    // child-rearing cost share, in (0,1)
  double theta;  // technology level, > 0
  double varrho; // technology growth rate, >= 0

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ParamError("EndoParams: alpha must be in (0,1)");
    if (!(beta > 0.0 && beta < 1.0)) throw ParamError("EndoParams: beta must be in (0,1)");
    if (!(gamma > 0.0 && gamma <= 1.0 - beta + 1e-15)) {
      throw ParamError("EndoParams: gamma must be in (0, 1-beta]");
    }
    if (!(phi > 0.0 && phi < 1.0)) throw ParamError("EndoParams: phi must be in (0,1)");
    if (!(theta > 0.0)) throw ParamError("EndoParams: theta must be positive");
    if (!(varrho >= 0.0)) throw ParamError("EndoParams: varrho must be non-negative");
  }

  json to_json() const {
    return json{{"alpha", alpha}, {"beta", beta},   {"gamma", gamma},
                {"phi", phi},     {"theta", theta}, {"varrho", varrho}};
  }

  static EndoParams from_json(const json& j) {
    EndoParams p{j.at("alpha").get<double>(), j.at("beta").get<double>(),
                 j.at("gamma").get<double>(), j.at("phi").get<double>(),
                 j.at("theta").get<double>(),
                 j.value("varrho", 0.0)};
    p.validate();
    return p;
  }
};

// theta_t = theta (1+varrho)^{(1-beta-gamma) t}
inline double endo_theta(const EndoParams& p, int t) {
  return p.theta * std::pow(1.0 + p.varrho, (1.0 - p.beta - p.gamma) * t);
}

// zeta_t = theta_t (alpha phi / (1-alpha))^alpha
inline double endo_zeta(const EndoParams& p, int t) {
  return endo_theta(p, t) * std::pow(p.alpha * p.phi / (1.0 - p.alpha), p.alpha);
}

// Lower bound on theta that keeps the parent problem interior when the lower
// support starts at 1: theta >= ((1-alpha)/(phi alpha))^alpha.
inline double interiority_bound(const EndoParams& p) {
  return std::pow((1.0 - p.alpha) / (p.phi * p.alpha), p.alpha);
}

inline bool interiority_ok(const EndoParams& p) { return p.theta >= interiority_bound(p); }

// ---------------------------------------------------------------------------
// Parental optimum
// ---------------------------------------------------------------------------

struct ParentChoice {
  double n; // number of children
  double c; // own consumption
  double e; // schooling time per child
};

// Closed-form optimum of  max c + ln(n z')  s.t.  c + n e zbar + z phi n <= z,
// z' = theta_t e^alpha z^beta zbar^gamma. Corner branch c = 0 below z = 1.
inline ParentChoice solve_parent(double z, double zbar, const EndoParams& p, int /*t*/ = 0) {
  p.validate();
  if (!(z > 0.0) || !(zbar > 0.0)) throw ParamError("solve_parent: z and zbar must be positive");
  ParentChoice out{};
  if (z >= 1.0) {
    out.n = (1.0 - p.alpha) / (p.phi * z);
    out.c = z - 1.0;
  } else {
    out.n = (1.0 - p.alpha) / p.phi;
    out.c = 0.0;
  }
  out.e = p.alpha / (1.0 - p.alpha) * p.phi * z / zbar;
  return out;
}

struct OptimReport {
  ParentChoice choice;
  double utility;            // utility of the closed-form optimum
  double best_probe_utility; // best utility over the brute-force grid
  double residual;           // max(0, best_probe - utility)
};

namespace endo_detail {

inline double parent_utility(double n, double y, double z, double zbar,
                             const EndoParams& p, int t) {
  const double c = z - y * zbar - z * p.phi * n;
  if (c < 0.0 || !(n > 0.0) || !(y > 0.0)) return -inf;
  return c + (1.0 - p.alpha) * std::log(n) + p.alpha * std::log(y) +
         std::log(endo_theta(p, t) * std::pow(z, p.beta) * std::pow(zbar, p.gamma));
}

} // namespace endo_detail

// Brute-force check of solve_parent on the convexified problem in (n, y = ne)
// with the budget binding. probes x probes grid over the feasible box; the
// closed form must weakly beat every probe within tol.
inline OptimReport verify_parent_optimum(double z, double zbar, const EndoParams& p,
                                         int t = 0, int probes = 200, double tol = 1e-6) {
  OptimReport rep{};
  rep.choice = solve_parent(z, zbar, p, t);
  const double y_opt = rep.choice.n * rep.choice.e;
  rep.utility = endo_detail::parent_utility(rep.choice.n, y_opt, z, zbar, p, t);

  const double n_hi = 1.0 / p.phi;   // budget spent entirely on rearing
  const double y_hi = z / zbar;      // budget spent entirely on education
  rep.best_probe_utility = -inf;
  for (int i = 1; i <= probes; ++i) {
    const double n = n_hi * static_cast<double>(i) / probes;
    for (int j = 1; j <= probes; ++j) {
      const double y = y_hi * static_cast<double>(j) / probes;
      rep.best_probe_utility =
          std::max(rep.best_probe_utility, endo_detail::parent_utility(n, y, z, zbar, p, t));
    }
  }
  rep.residual = std::max(0.0, rep.best_probe_utility - rep.utility);
  if (rep.residual > tol) {
    throw OptimMismatch("verify_parent_optimum: brute force beats closed form by " +
                        detail::fmt_double(rep.residual));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Endogenous transmission and relative renormalization
// ---------------------------------------------------------------------------

// tau_t(z) = zeta_t z^{alpha+beta} zbar^{gamma-alpha}
inline double endo_transmission(double z, double zbar, const EndoParams& p, int t) {
  if (!(z > 0.0) || !(zbar > 0.0)) {
    throw ParamError("endo_transmission: z and zbar must be positive");
  }
  return endo_zeta(p, t) * std::pow(z, p.alpha + p.beta) * std::pow(zbar, p.gamma - p.alpha);
}

struct RelativeModel {
  FunctionSpec fertility;    // (1-alpha)/(phi z_lo) * x^{-1} on [1, inf)
  FunctionSpec transmission; // x^{alpha+beta} on [1, inf)
};

inline RelativeModel to_relative(const EndoParams& p, double z_lo) {
  p.validate();
  if (!(z_lo >= 1.0)) {
    throw ParamError("to_relative: lower support must be >= 1 (interior optimum)");
  }
  const double scale = (1.0 - p.alpha) / (p.phi * z_lo);
  return RelativeModel{FunctionSpec::power_decay(1.0, scale, {1.0, inf}),
                       FunctionSpec::power(p.alpha + p.beta, {1.0, inf})};
}

// ---------------------------------------------------------------------------
// Regime classification (Theorem-style dichotomy in alpha + beta)
// ---------------------------------------------------------------------------

struct EndoClassifyResult {
  LongRunVerdict verdict;
  std::optional<ClassifyResult> core;       // engine-level classification detail
  std::optional<double> expected_exponent;  // survival exponent 1/(alpha+beta-1)
  std::optional<double> fitted_exponent;    // tail exponent recovered from the engine
};

// Classifies the relative-capital dynamics. alpha+beta > 1 yields an atomless
// Pareto steady state (survival index 1/(alpha+beta-1)); alpha+beta < 1
// collapses to a point mass at 1; alpha+beta = 1 makes every point fixed and
// the comparison inconclusive. Never throws: failures become Inconclusive.
inline EndoClassifyResult classify_endo(const EndoParams& p, std::size_t grid_points = 1025,
                                        double boundary_tol = 1e-12) {
  EndoClassifyResult res;
  try {
    p.validate();
    const double ab = p.alpha + p.beta;
    if (std::abs(ab - 1.0) <= boundary_tol) {
      res.verdict.kind = LongRunKind::Inconclusive;
      res.verdict.reasons.push_back(
          "alpha + beta = 1: the relative transmission map is the identity "
          "(tangent everywhere)");
      return res;
    }
    RelativeModel rel = to_relative(p, 1.0);
    GridPtr grid;
    if (ab > 1.0) {
      const ClosedForm ref = analytic_steady_state(EndoRelative{p.alpha, p.beta});
      grid = build_grid({1.0, inf}, grid_points, GridScheme::LogSpaced, 1e-8, &ref);
      res.expected_exponent = 1.0 / (ab - 1.0);
    } else {
      grid = build_grid({1.0, inf}, grid_points, GridScheme::Uniform, 1e-8, nullptr, 64.0);
    }
    ClassifyResult core = classify_longrun(rel.fertility, rel.transmission, grid);
    res.verdict = core.verdict;
    res.core = std::move(core);
    if (res.verdict.kind == LongRunKind::Atomless && res.verdict.density.has_value()) {
      const double hi = grid->hi();
      const double slope = fit_loglog_slope(*res.verdict.density, 1.0 + 0.05 * (hi - 1.0),
                                            1.0 + 0.6 * (hi - 1.0));
      res.fitted_exponent = -slope - 1.0; // density exponent -(1+nu)
    }
  } catch (const std::exception& e) {
    res.verdict = LongRunVerdict{};
    res.verdict.kind = LongRunKind::Inconclusive;
    res.verdict.reasons.push_back(std::string("classification failed: ") + e.what());
  }
  return res;
}

// ---------------------------------------------------------------------------
// Balanced-growth analysis of normalized average capital
// ---------------------------------------------------------------------------

enum class EndoRegime { ParetoSS, DegenerateSS };

inline const char* endo_regime_name(EndoRegime r) {
  return r == EndoRegime::ParetoSS ? "pareto" : "degenerate";
}

namespace endo_detail {

inline double growth_coefficient(const EndoParams& p, EndoRegime regime) {
  p.validate();
  const double base = endo_zeta(p, 0) / (1.0 + p.varrho);
  if (regime == EndoRegime::DegenerateSS) return base;
  const double ab = p.alpha + p.beta;
  if (!(ab > 1.0 && ab < 2.0)) {
    throw ParamError("growth_map: Pareto regime requires alpha+beta in (1,2) "
                     "(steady-state mean exists)");
  }
  return base * std::pow(2.0 - ab, ab - 1.0);
}

} // namespace endo_detail

// One step of the normalized-average-capital recursion chi' = coef * chi^{beta+gamma}.
inline double growth_map(double chi, const EndoParams& p, EndoRegime regime) {
  if (!(chi > 0.0)) throw ParamError("growth_map: chi must be positive");
  return endo_detail::growth_coefficient(p, regime) * std::pow(chi, p.beta + p.gamma);
}

struct GrowthFixedPoint {
  bool is_ratio;  // true when beta+gamma = 1: value is the per-period growth ratio
  double value;   // fixed point chi* when beta+gamma < 1, else the linear ratio
};

inline GrowthFixedPoint growth_fixed_point(const EndoParams& p, EndoRegime regime) {
  const double coef = endo_detail::growth_coefficient(p, regime);
  const double bg = p.beta + p.gamma;
  if (std::abs(bg - 1.0) <= 1e-15) return {true, coef};
  return {false, std::pow(coef, 1.0 / (1.0 - bg))};
}

// Steady-state mean fertility E[n_hat] at lower support z_lo.
inline double steady_mean_fertility(const EndoParams& p, double z_lo, EndoRegime regime) {
  p.validate();
  if (!(z_lo > 0.0)) throw ParamError("steady_mean_fertility: z_lo must be positive");
  const double base = (1.0 - p.alpha) / (z_lo * p.phi);
  if (regime == EndoRegime::DegenerateSS) return base;
  if (!(p.alpha + p.beta > 1.0)) {
    throw ParamError("steady_mean_fertility: Pareto regime requires alpha+beta > 1");
  }
  return base / (p.alpha + p.beta);
}

// ---------------------------------------------------------------------------
// Co-evolving simulation
// ---------------------------------------------------------------------------

struct EndoState {
  int t = 0;
  double z_lo = 1.0;          // lower support of the capital distribution
  double z_bar = 1.0;         // average capital
  double chi = 1.0;           // z_bar / (1+varrho)^t
  double mean_fertility = 0;  // E_t[n_hat] under the current distribution
};

struct EndoSimulation {
  Trajectory trajectory;        // relative-capital dynamics on [1, hi]
  std::vector<EndoState> history;
};

// Runs the relative-capital dynamics while co-evolving the support and
// average-capital state. The relative step uses unit fertility scale (the
// scale only renormalizes growth factors); recorded E_t[n_hat] applies the
// true time-varying scale (1-alpha)/(phi z_lo_t).
inline EndoSimulation simulate_endo(const EndoParams& p, const GridDistribution& f0,
                                    int generations, RunOptions opts = {},
                                    double z_lo0 = 1.0) {
  p.validate();
  if (!(z_lo0 >= 1.0)) throw InteriorityViolation("simulate_endo: initial lower support < 1");
  if (f0.grid().lo() < 1.0 - 1e-12) {
    throw ConfigError("simulate_endo: relative capital grid must start at 1");
  }
  if (!f0.atoms().empty()) {
    throw ConfigError("simulate_endo: initial relative distribution must be atomless");
  }

  RelativeModel rel = to_relative(p, z_lo0);
  const FunctionSpec n_unit = FunctionSpec::power_decay(1.0, 1.0, {1.0, inf});
  const FunctionSpec& tau_hat = rel.transmission;

  EndoSimulation sim;
  GridDistribution cur = f0.normalized();

  EndoState st;
  st.t = 0;
  st.z_lo = z_lo0;
  st.z_bar = z_lo0 * cur.mean();
  st.chi = st.z_bar;

  StepOptions sopts{opts.interp};
  const double sink = 1.0; // tau_hat fixes 1; a sink iff alpha+beta < 1
  const bool watch_collapse = opts.watch_sinks && (p.alpha + p.beta < 1.0);
  const double atom_eps = opts.atom_eps_cells * cur.grid().max_cell_width();

  sim.trajectory.snapshots.push_back({0, cur});
  for (int t = 0; t < generations; ++t) {
    StepResult step = step_density(cur, n_unit, tau_hat, sopts);
    const double scale_t = (1.0 - p.alpha) / (p.phi * st.z_lo);
    st.mean_fertility = scale_t * step.growth;
    sim.history.push_back(st);

    EndoState next;
    next.t = t + 1;
    next.z_lo = endo_transmission(st.z_lo, st.z_bar, p, t);
    if (next.z_lo < 1.0) {
      throw InteriorityViolation(
          "simulate_endo: lower support fell below 1 at generation " + std::to_string(t + 1) +
          " (theta below the interiority bound " + detail::fmt_double(interiority_bound(p)) +
          "?)");
    }
    next.z_bar = next.z_lo * step.dist.mean();
    next.chi = next.z_bar / std::pow(1.0 + p.varrho, t + 1);

    const double dist = distance(step.dist, cur, opts.metric);
    sim.trajectory.growth_factors.push_back(st.mean_fertility);
    sim.trajectory.step_distances.push_back(dist);
    cur = std::move(step.dist);
    st = next;
    sim.trajectory.generations = t + 1;

    const bool last = (t + 1 == generations);
    if (opts.snapshot_every > 0 && ((t + 1) % opts.snapshot_every == 0)) {
      sim.trajectory.snapshots.push_back({t + 1, cur});
    } else if (last) {
      sim.trajectory.snapshots.push_back({t + 1, cur});
    }

    if (watch_collapse && detect_atom(cur, sink, atom_eps, opts.atom_delta)) {
      sim.trajectory.stop_reason = StopReason::AtomCollapse;
      sim.trajectory.converged = true;
      sim.trajectory.collapse_location = sink;
      break;
    }
    if (dist < opts.tol) {
      sim.trajectory.stop_reason = StopReason::Tolerance;
      sim.trajectory.converged = true;
      break;
    }
    if (last) sim.trajectory.stop_reason = StopReason::MaxGenerations;
  }
  // terminal state row (no fertility recorded yet for the final generation)
  st.mean_fertility = (1.0 - p.alpha) / (p.phi * st.z_lo) * expected_fertility(cur, n_unit);
  sim.history.push_back(st);
  if (sim.trajectory.snapshots.back().t != sim.trajectory.generations) {
    sim.trajectory.snapshots.push_back({sim.trajectory.generations, cur});
  }
  return sim;
}

} // namespace capflow
