#pragma once

// Long-run classification machinery: backward products G_t, the three
// structural conditions (well-behaved, nice, generic), numeric steady-state
// densities from the G_t limit, and the analytic steady-state catalogue.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "capflow/closed_form.hpp"
#include "capflow/detail/numerics.hpp"
#include "capflow/distribution.hpp"
#include "capflow/errors.hpp"
#include "capflow/function_model.hpp"

namespace capflow {

// ---------------------------------------------------------------------------
// Backward products
// ---------------------------------------------------------------------------

// G_t(x, y) = prod_{i=1..t} [n(rho^i(x)) / tau'(rho^i(x))] * [tau'(y)/n(y)]^t,
// evaluated in log space.
inline double gt_product(double x, double y, const FunctionSpec& n,
                         const FunctionSpec& tau, int t) {
  if (t < 0) throw ParamError("gt_product: t must be >= 0");
  const double log_ref = std::log(n.eval(y)) - std::log(tau.derivative(y));
  double sum = 0.0;
  double p = x;
  for (int i = 1; i <= t; ++i) {
    p = tau.inverse(p);
    sum += std::log(n.eval(p)) - std::log(tau.derivative(p)) - log_ref;
  }
  return std::exp(sum);
}

struct GtLimitOptions {
  double factor_tol = 1e-14; // stop once |log factor| falls below
  int t_max = 10000;
};

// lim_t G_t(x, s) for a source fixed point s whose backward basin contains x.
// Underflow of the product is reported as an exact 0 (the density vanishes);
// divergence or a non-vanishing factor at t_max raises NoConvergence.
inline double gt_limit(double x, double s, const FunctionSpec& n,
                       const FunctionSpec& tau, GtLimitOptions opts = {}) {
  const double log_ref = std::log(n.eval(s)) - std::log(tau.derivative(s));
  double sum = 0.0;
  double p = x;
  for (int i = 1; i <= opts.t_max; ++i) {
    p = tau.inverse(p);
    const double step = std::log(n.eval(p)) - std::log(tau.derivative(p)) - log_ref;
    sum += step;
    if (std::abs(step) < opts.factor_tol) return std::exp(sum);
    if (sum < -745.0) return 0.0;
    if (sum > 709.0) {
      throw NoConvergence("gt_limit: product diverges (is s a source in x's basin?)");
    }
  }
  throw NoConvergence("gt_limit: factor did not vanish within t_max iterations");
}

// ---------------------------------------------------------------------------
// Structural conditions
// ---------------------------------------------------------------------------

enum class WellBehavedKind { IntegrableFertility, PowerLawTail, NumericEvidence, Unknown };

inline const char* well_behaved_kind_name(WellBehavedKind k) {
  switch (k) {
    case WellBehavedKind::IntegrableFertility: return "integrable_fertility";
    case WellBehavedKind::PowerLawTail: return "power_law_tail";
    case WellBehavedKind::NumericEvidence: return "numeric_evidence";
    case WellBehavedKind::Unknown: return "unknown";
  }
  return "unknown";
}

struct WellBehavedVerdict {
  bool holds = false;
  WellBehavedKind kind = WellBehavedKind::Unknown;
  int t = 0;            // witness horizon for numeric evidence
  double integral = 0;  // the accepted integral value (numeric evidence)
  std::string detail;
};

namespace steady_detail {

// Analytic integrability of a fertility family over an unbounded side.
// nullopt = no family rule (fall through to numeric checks).
inline std::optional<bool> integrable_side(const FunctionSpec& n, bool upper) {
  switch (n.family()) {
    case Family::ExpDecay: {
      const double m = n.to_json()["params"]["m"].get<double>();
      return upper ? (m > 0.0) : (m < 0.0);
    }
    case Family::PowerDecay: {
      const double m = n.to_json()["params"]["m"].get<double>();
      return upper ? (m > 1.0) : std::optional<bool>{};
    }
    case Family::PolyExp: {
      const double m = n.to_json()["params"]["m"].get<double>();
      return upper ? (m > 0.0) : std::optional<bool>{};
    }
    case Family::GaussBump:
    case Family::SkewGaussBump:
      return true;
    case Family::Flat:
      return false;
    default:
      return std::nullopt;
  }
}

// Local decay exponent -x n'(x) / n(x), used for the power-tail rule when no
// family rule applies.
inline double decay_exponent(const FunctionSpec& n, double x) {
  return -x * n.derivative(x) / n.eval(x);
}

} // namespace steady_detail

// Integral of G_t(., s) over the window by trapezoid on n_nodes nodes.
inline double gt_window_integral(const FunctionSpec& n, const FunctionSpec& tau, double s,
                                 int t, double wlo, double whi, int n_nodes) {
  std::vector<double> xs(static_cast<std::size_t>(n_nodes));
  std::vector<double> ys(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = wlo + (whi - wlo) * static_cast<double>(i) / static_cast<double>(n_nodes - 1);
    ys[i] = gt_product(xs[i], s, n, tau, t);
  }
  return detail::trapezoid(xs, ys);
}

// Well-behavedness: G_t integrable for some t. Checked by (1) integrable
// fertility, (2) power transmission with polynomially decaying fertility,
// (3) direct numeric evidence on refining grids, else Unknown.
inline WellBehavedVerdict check_well_behaved(const FunctionSpec& n, const FunctionSpec& tau,
                                             const Interval& space,
                                             const IntervalDecomposition& decomp) {
  WellBehavedVerdict v;

  // (1) integrable fertility
  bool integrable = true;
  bool known = true;
  if (!space.hi_finite()) {
    auto r = steady_detail::integrable_side(n, true);
    if (!r.has_value()) known = false;
    else integrable = integrable && *r;
  }
  if (!space.lo_finite()) {
    auto r = steady_detail::integrable_side(n, false);
    if (!r.has_value()) known = false;
    else integrable = integrable && *r;
  }
  if (known && integrable) {
    v.holds = true;
    v.kind = WellBehavedKind::IntegrableFertility;
    v.detail = space.bounded() ? "bounded space with bounded positive fertility"
                               : "fertility integrable on X by family rule";
    return v;
  }

  // (2) power transmission + polynomial fertility decay
  if (tau.family() == Family::Power && !space.hi_finite() && space.lo >= 1.0) {
    const double a = tau.to_json()["params"]["a"].get<double>();
    if (a > 0.0 && std::abs(a - 1.0) > 1e-12) {
      bool poly = false;
      std::string how;
      if (n.family() == Family::PowerDecay) {
        const double m = n.to_json()["params"]["m"].get<double>();
        poly = m > 0.0;
        how = "x^m n(x) = scale for the power-decay exponent m";
      } else if (n.family() == Family::ExpDecay || n.family() == Family::PolyExp ||
                 n.family() == Family::GaussBump) {
        const double m = n.to_json()["params"]["m"].get<double>();
        poly = m > 0.0; // super-polynomial decay: x^k n(x) -> 0 for all k
        how = "super-polynomial fertility decay";
      } else {
        // numeric probe of the local decay exponent at growing abscissae
        const double T = std::max(10.0, 4.0 * space.lo);
        const double d1 = steady_detail::decay_exponent(n, T);
        const double d2 = steady_detail::decay_exponent(n, 2.0 * T);
        const double d3 = steady_detail::decay_exponent(n, 4.0 * T);
        poly = d1 > 0.01 && d2 > 0.01 && d3 > 0.01 &&
               std::abs(d3 - d2) < 0.25 * std::abs(d2);
        how = "numeric decay-exponent probe";
      }
      if (poly) {
        v.holds = true;
        v.kind = WellBehavedKind::PowerLawTail;
        v.detail = "power transmission with polynomial fertility decay (" + how + ")";
        return v;
      }
    }
  }

  // (3) numeric evidence: integral of G_t stable under grid refinement
  const double s = decomp.fixed_points.front().location;
  double wlo = space.lo_finite() ? space.lo : -64.0;
  double whi = space.hi_finite() ? space.hi : 64.0;
  for (int t : {1, 2, 4, 8, 16, 32}) {
    // widen the window until the integrand tail is negligible; if it never
    // becomes negligible (e.g. flat fertility makes G_t constant) the
    // integral does not exist and refinement agreement would be vacuous
    bool window_closed = false;
    for (int w = 0; w < 24; ++w) {
      double edge = 0.0;
      if (!space.hi_finite()) edge = std::max(edge, gt_product(whi, s, n, tau, t));
      if (!space.lo_finite()) edge = std::max(edge, gt_product(wlo, s, n, tau, t));
      const double mid = gt_product(0.5 * (wlo + whi), s, n, tau, t);
      if (edge <= 1e-12 * std::max(mid, 1e-12)) {
        window_closed = true;
        break;
      }
      if (!space.hi_finite()) whi *= 2.0;
      if (!space.lo_finite()) wlo *= 2.0;
    }
    if (!window_closed) continue;
    double coarse = gt_window_integral(n, tau, s, t, wlo, whi, 2049);
    for (int nn : {4097, 8193, 16385, 32769}) {
      const double fine = gt_window_integral(n, tau, s, t, wlo, whi, nn);
      if (std::isfinite(coarse) && std::isfinite(fine) && fine > 0.0 &&
          std::abs(fine - coarse) <= 1e-4 * fine) {
        v.holds = true;
        v.kind = WellBehavedKind::NumericEvidence;
        v.t = t;
        v.integral = fine;
        v.detail = "integral of the backward product stable under grid refinement";
        return v;
      }
      coarse = fine;
    }
  }

  v.holds = false;
  v.kind = WellBehavedKind::Unknown;
  v.detail = "no integrability rule applied and numeric refinement did not stabilize";
  return v;
}

enum class NiceBranch { SinkBranch, SourceBranch, None };

inline const char* nice_branch_name(NiceBranch b) {
  switch (b) {
    case NiceBranch::SinkBranch: return "sink_branch";
    case NiceBranch::SourceBranch: return "source_branch";
    case NiceBranch::None: return "none";
  }
  return "none";
}

struct NicenessEntry {
  std::size_t interval = 0;
  bool holds = false;
  NiceBranch branch = NiceBranch::None;
  std::string detail;
};

namespace steady_detail {

// h and h' for the niceness branches: sink uses h = n, source uses h = n/tau'.
inline double branch_value(const FunctionSpec& n, const FunctionSpec& tau, bool source,
                           double x) {
  return source ? n.eval(x) / tau.derivative(x) : n.eval(x);
}

inline double branch_derivative(const FunctionSpec& n, const FunctionSpec& tau,
                                bool source, double x) {
  if (!source) return n.derivative(x);
  const double tp = tau.derivative(x);
  return (n.derivative(x) * tp - n.eval(x) * tau.second_derivative(x)) / (tp * tp);
}

// Limit of h at an interval end; infinite ends probed at growing abscissae.
inline double branch_limit(const FunctionSpec& n, const FunctionSpec& tau, bool source,
                           double endpoint, bool upper) {
  if (std::isfinite(endpoint)) return branch_value(n, tau, source, endpoint);
  const double T0 = upper ? 64.0 : -64.0;
  double prev = branch_value(n, tau, source, T0);
  double cur = branch_value(n, tau, source, 2.0 * T0);
  for (int i = 0; i < 16 && std::abs(cur - prev) > 1e-12 * (1.0 + std::abs(cur)); ++i) {
    prev = cur;
    cur = branch_value(n, tau, source, T0 * std::pow(2.0, i + 2));
  }
  return cur;
}

} // namespace steady_detail

// Niceness per interval: some boundary fixed point of X_k (a) is a sink where
// n is non-stationary and endpoint-maximal, or (b) is a source where n/tau'
// is non-stationary and endpoint-maximal.
inline std::vector<NicenessEntry> check_nice(const FunctionSpec& n, const FunctionSpec& tau,
                                             const IntervalDecomposition& decomp) {
  std::vector<NicenessEntry> out;
  const double stationary_scale = 1e-8;
  for (std::size_t k = 0; k < decomp.intervals.size(); ++k) {
    const IntervalInfo& iv = decomp.intervals[k];
    if (iv.empty) continue;
    NicenessEntry entry;
    entry.interval = k;
    struct Candidate {
      double s;
      double other_end;
      bool other_upper;
      FixedPointKind kind;
    };
    std::vector<Candidate> cands;
    if (auto l = decomp.left_fp(k)) {
      const auto& fp = decomp.fixed_points[*l];
      cands.push_back({fp.location, iv.hi, true, fp.kind});
    }
    if (auto r = decomp.right_fp(k)) {
      const auto& fp = decomp.fixed_points[*r];
      cands.push_back({fp.location, iv.lo, false, fp.kind});
    }
    for (const Candidate& c : cands) {
      if (c.kind == FixedPointKind::Tangent) continue;
      const bool source = (c.kind == FixedPointKind::Source);
      const double h_s = steady_detail::branch_value(n, tau, source, c.s);
      const double dh_s = steady_detail::branch_derivative(n, tau, source, c.s);
      const bool non_stationary = std::abs(dh_s) > stationary_scale * (1.0 + std::abs(h_s));
      const double h_other =
          steady_detail::branch_limit(n, tau, source, c.other_end, c.other_upper);
      const bool endpoint_maximal = h_s > h_other;
      if (non_stationary && endpoint_maximal) {
        entry.holds = true;
        entry.branch = source ? NiceBranch::SourceBranch : NiceBranch::SinkBranch;
        entry.detail = std::string(source ? "n/tau'" : "n") +
                       " non-stationary and endpoint-maximal at " +
                       detail::fmt_double(c.s);
        break;
      }
    }
    if (!entry.holds) {
      entry.detail = "no boundary fixed point satisfies its branch conditions";
    }
    out.push_back(entry);
  }
  return out;
}

enum class GenericKind { Generic, NonGeneric };

struct GenericVerdict {
  GenericKind kind = GenericKind::NonGeneric;
  std::size_t k_star = 0;          // 1-based index into fixed points when generic
  std::vector<std::size_t> tied;   // 1-based indices within tie tolerance of the max
  std::vector<double> scores;      // score per fixed point
};

// Genericity: the argmax over fixed points of n(s) (sinks) and n(s)/tau'(s)
// (sources) is unique. Tangent fixed points block the comparison.
inline GenericVerdict check_generic(const FunctionSpec& n, const FunctionSpec& tau,
                                    const IntervalDecomposition& decomp,
                                    double tie_tol = 1e-9) {
  GenericVerdict v;
  double best = -1.0;
  for (const auto& fp : decomp.fixed_points) {
    if (fp.kind == FixedPointKind::Tangent) {
      throw TangentPresent("check_generic: tangent fixed point at " +
                           detail::fmt_double(fp.location));
    }
    const double score = (fp.kind == FixedPointKind::Source)
                             ? n.eval(fp.location) / tau.derivative(fp.location)
                             : n.eval(fp.location);
    v.scores.push_back(score);
    best = std::max(best, score);
  }
  for (std::size_t i = 0; i < v.scores.size(); ++i) {
    if (std::abs(v.scores[i] - best) <= tie_tol * best) v.tied.push_back(i + 1);
  }
  if (v.tied.size() == 1) {
    v.kind = GenericKind::Generic;
    v.k_star = v.tied.front();
  } else {
    v.kind = GenericKind::NonGeneric;
  }
  return v;
}

struct ConditionReport {
  WellBehavedVerdict well_behaved;
  std::vector<NicenessEntry> niceness;
  GenericVerdict generic;
  bool tangent_present = false;
};

// ---------------------------------------------------------------------------
// Numeric steady state from the G_t limit
// ---------------------------------------------------------------------------

struct NumericSteadyState {
  GridDistribution density;
  std::vector<std::size_t> failed_nodes; // nodes where the product did not settle
};

// Steady-state density on the support X_{k*-1} ∪ X_{k*} (zero elsewhere),
// node-wise lim G_t(x, s_{k*}), normalized by quadrature.
inline NumericSteadyState steady_state_numeric(const FunctionSpec& n, const FunctionSpec& tau,
                                               const IntervalDecomposition& decomp,
                                               std::size_t k_star, GridPtr grid,
                                               GtLimitOptions opts = {}) {
  if (k_star == 0 || k_star > decomp.fixed_points.size()) {
    throw ParamError("steady_state_numeric: k_star out of range");
  }
  const double s = decomp.fixed_points[k_star - 1].location;
  const IntervalInfo& left = decomp.intervals[k_star - 1];
  const IntervalInfo& right = decomp.intervals[k_star];
  const double lo = left.empty ? s : left.lo;
  const double hi = right.empty ? s : right.hi;

  std::vector<double> vals(grid->size(), 0.0);
  std::vector<unsigned char> failed(grid->size(), 0);
  detail::parallel_for(grid->size(), [&](std::size_t i) {
    const double x = grid->node(i);
    if (x < lo || x > hi) return;
    try {
      vals[i] = gt_limit(x, s, n, tau, opts);
    } catch (const NoConvergence&) {
      failed[i] = 1;
    }
  });

  NumericSteadyState out{GridDistribution(grid, std::move(vals)).normalized(), {}};
  for (std::size_t i = 0; i < failed.size(); ++i) {
    if (failed[i]) out.failed_nodes.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Long-run classification
// ---------------------------------------------------------------------------

enum class LongRunKind { Atomless, Degenerate, Inconclusive };

inline const char* long_run_kind_name(LongRunKind k) {
  switch (k) {
    case LongRunKind::Atomless: return "atomless";
    case LongRunKind::Degenerate: return "degenerate";
    case LongRunKind::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

struct LongRunVerdict {
  LongRunKind kind = LongRunKind::Inconclusive;
  std::size_t k_star = 0;
  std::optional<double> atom_location;
  std::optional<GridDistribution> density;
  std::vector<std::size_t> density_failed_nodes;
  std::vector<std::string> reasons; // populated when inconclusive
};

struct ClassifyResult {
  IntervalDecomposition decomp;
  ConditionReport report;
  LongRunVerdict verdict;
};

// Full classification: find fixed points, check the three conditions, then
// name the steady state selected by the leading fixed point.
inline ClassifyResult classify_longrun(const FunctionSpec& n, const FunctionSpec& tau,
                                       GridPtr grid_for_density,
                                       FixedPointOptions fp_opts = {},
                                       GtLimitOptions gt_opts = {}) {
  check_transmission(tau);
  const Interval space = tau.domain();
  check_fertility(n, space);

  ClassifyResult res;
  res.decomp = find_fixed_points(tau, fp_opts);
  res.report.well_behaved = check_well_behaved(n, tau, space, res.decomp);
  res.report.niceness = check_nice(n, tau, res.decomp);

  LongRunVerdict& v = res.verdict;
  if (!res.report.well_behaved.holds) {
    v.reasons.push_back("well-behavedness not established: " + res.report.well_behaved.detail);
  }
  for (const auto& e : res.report.niceness) {
    if (!e.holds) {
      v.reasons.push_back("interval " + std::to_string(e.interval) +
                          " fails niceness: " + e.detail);
    }
  }
  try {
    res.report.generic = check_generic(n, tau, res.decomp);
  } catch (const TangentPresent& e) {
    res.report.tangent_present = true;
    v.reasons.push_back(e.what());
    v.kind = LongRunKind::Inconclusive;
    return res;
  }
  if (res.report.generic.kind == GenericKind::NonGeneric) {
    std::string tie = "non-generic: leading fixed points tied {";
    for (std::size_t i = 0; i < res.report.generic.tied.size(); ++i) {
      if (i) tie += ", ";
      tie += std::to_string(res.report.generic.tied[i]);
    }
    tie += "}";
    v.reasons.push_back(tie);
  }
  if (!v.reasons.empty()) {
    v.kind = LongRunKind::Inconclusive;
    return res;
  }

  v.k_star = res.report.generic.k_star;
  const auto& fp = res.decomp.fixed_points[v.k_star - 1];
  if (fp.kind == FixedPointKind::Sink) {
    v.kind = LongRunKind::Degenerate;
    v.atom_location = fp.location;
  } else {
    v.kind = LongRunKind::Atomless;
    if (grid_for_density) {
      NumericSteadyState ss =
          steady_state_numeric(n, tau, res.decomp, v.k_star, grid_for_density, gt_opts);
      v.density = std::move(ss.density);
      v.density_failed_nodes = std::move(ss.failed_nodes);
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Analytic steady states for the model catalogue
// ---------------------------------------------------------------------------

// X = [0, inf), n ∝ exp(-m x), tau = a x
struct ExampleA {
  double m, a;
};
// X = [1, inf), n ∝ x^{-m}, tau = x^a
struct ExampleC {
  double m, a;
};
// X = [0, inf), n ∝ (x+c)^eta exp(-m x), tau = a x
struct ExampleD {
  double m, c, eta, a;
};
// X = R, n ∝ exp(-(x-m)^2 / (2 sigma2)), tau = a x + b
struct ExampleE {
  double m, sigma2, a, b;
};
// endogenous relative dynamics: n ∝ 1/x, tau = x^(alpha+beta) on [1, inf)
struct EndoRelative {
  double alpha, beta;
};

using ExampleSpec = std::variant<ExampleA, ExampleC, ExampleD, ExampleE, EndoRelative>;

inline ClosedForm analytic_steady_state(const ExampleSpec& ex) {
  if (const auto* a = std::get_if<ExampleA>(&ex)) {
    if (!(a->a > 1.0) || !(a->m > 0.0)) {
      throw ParamError("analytic steady state requires a > 1 and m > 0 (else degenerate)");
    }
    return ClosedForm::exponential(a->m / (a->a - 1.0), 0.0);
  }
  if (const auto* c = std::get_if<ExampleC>(&ex)) {
    if (!(c->a > 1.0) || !(c->m > 0.0)) {
      throw ParamError("analytic steady state requires a > 1 and m > 0 (else degenerate)");
    }
    // density ∝ x^{-(1 + m/(a-1))}  ⇔  survival exponent m/(a-1)
    return ClosedForm::pareto(1.0, c->m / (c->a - 1.0));
  }
  if (const auto* d = std::get_if<ExampleD>(&ex)) {
    return ClosedForm::qpochhammer_exp(d->m, d->a, d->c, d->eta);
  }
  if (const auto* e = std::get_if<ExampleE>(&ex)) {
    if (!(e->a > 1.0)) throw ParamError("analytic steady state requires a > 1");
    const double s = e->b / (1.0 - e->a);
    return ClosedForm::gaussian((1.0 + e->a) * e->m - e->a * s,
                                e->sigma2 * (e->a * e->a - 1.0));
  }
  const auto& endo = std::get<EndoRelative>(ex);
  const double ab = endo.alpha + endo.beta;
  if (!(ab > 1.0)) {
    throw ParamError("endogenous analytic steady state requires alpha + beta > 1");
  }
  return ClosedForm::endo_pareto(1.0 / (ab - 1.0));
}

// ---------------------------------------------------------------------------
// Verification helpers
// ---------------------------------------------------------------------------

// Both sides of the backward/forward change-of-variables identity
//   ∫ G_t(x, s) dx = (tau'(s))^t ∫ prod_{i=0}^{t-1} n(tau^[i](y)) / n(s) dy
// integrated adaptively over the window.
struct GtIdentity {
  double lhs, rhs;
};

inline GtIdentity gt_identity(const FunctionSpec& n, const FunctionSpec& tau, double s,
                              int t, double wlo, double whi, double tol = 1e-11) {
  GtIdentity out{};
  out.lhs = detail::integrate_adaptive(
      [&](double x) { return gt_product(x, s, n, tau, t); }, wlo, whi, tol);
  const double ns = n.eval(s);
  out.rhs = std::pow(tau.derivative(s), t) *
            detail::integrate_adaptive(
                [&](double y) {
                  double prod = 1.0;
                  double p = y;
                  for (int i = 0; i < t; ++i) {
                    prod *= n.eval(p) / ns;
                    p = tau.eval(p);
                  }
                  return prod;
                },
                wlo, whi, tol);
  return out;
}

// Least-squares slope of log density against log x over nodes in [xmin, xmax].
inline double fit_loglog_slope(const GridDistribution& d, double xmin, double xmax) {
  std::vector<double> lx, ly;
  const auto& xs = d.grid().nodes();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] < xmin || xs[i] > xmax) continue;
    if (!(d.density()[i] > 0.0)) continue;
    lx.push_back(std::log(xs[i]));
    ly.push_back(std::log(d.density()[i]));
  }
  if (lx.size() < 8) throw ConfigError("fit_loglog_slope: too few nodes in range");
  return detail::fit_line(lx, ly).slope;
}

} // namespace capflow
