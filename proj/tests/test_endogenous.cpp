// Endogenous-fertility growth model: parent problem, transmission,
// relative renormalization, regime classification, balanced growth,
// co-evolving simulation.

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "capflow/endogenous.hpp"

using namespace capflow;
using Catch::Approx;

namespace {

EndoParams pareto_params() { return {0.6, 0.6, 0.3, 0.2, 2.5, 0.0}; }
EndoParams degenerate_params() { return {0.4, 0.2, 0.3, 0.2, 2.5, 0.0}; }

} // namespace

TEST_CASE("parameter validation and interiority bound") {
  CHECK_NOTHROW(pareto_params().validate());
  EndoParams bad = pareto_params();
  bad.gamma = 0.5; // gamma must stay <= 1 - beta
  CHECK_THROWS_AS(bad.validate(), ParamError);
  bad = pareto_params();
  bad.alpha = 1.0;
  CHECK_THROWS_AS(bad.validate(), ParamError);
  bad = pareto_params();
  bad.varrho = -0.1;
  CHECK_THROWS_AS(bad.validate(), ParamError);

  // ((1-alpha)/(phi alpha))^alpha
  CHECK(interiority_bound(pareto_params()) ==
        Approx(std::pow(10.0 / 3.0, 0.6)).epsilon(1e-12));
  CHECK(interiority_ok(pareto_params()));
  EndoParams low = pareto_params();
  low.theta = 2.0;
  CHECK_FALSE(interiority_ok(low));

  // json round-trip
  const EndoParams p = pareto_params();
  const EndoParams q = EndoParams::from_json(p.to_json());
  CHECK(q.alpha == p.alpha);
  CHECK(q.theta == p.theta);
  CHECK(q.varrho == p.varrho);
}

TEST_CASE("parent optimum closed form") {
  const EndoParams p = pareto_params();
  // interior branch z >= 1
  const ParentChoice interior = solve_parent(2.0, 2.5, p);
  CHECK(interior.n == Approx(1.0).epsilon(1e-15));
  CHECK(interior.c == Approx(1.0).epsilon(1e-15));
  CHECK(interior.e == Approx(0.24).epsilon(1e-15));
  // corner branch z < 1
  const ParentChoice corner = solve_parent(0.5, 2.5, p);
  CHECK(corner.n == Approx(2.0).epsilon(1e-15));
  CHECK(corner.c == 0.0);
  CHECK(corner.e == Approx(0.06).epsilon(1e-15));
  // fertility is continuous across z = 1
  CHECK(solve_parent(1.0, 2.0, p).n ==
        Approx(solve_parent(1.0 - 1e-12, 2.0, p).n).epsilon(1e-9));
  CHECK_THROWS_AS(solve_parent(0.0, 1.0, p), ParamError);

  // the budget binds exactly at the optimum
  std::mt19937 rng(321);
  std::uniform_real_distribution<double> uz(0.3, 5.0), uzb(1.0, 6.0);
  for (int k = 0; k < 50; ++k) {
    const double z = uz(rng), zbar = uzb(rng);
    const ParentChoice ch = solve_parent(z, zbar, p);
    const double spent = ch.c + ch.n * ch.e * zbar + z * p.phi * ch.n;
    CHECK(spent == Approx(z).margin(1e-10));
  }

  // shape: fertility falls in z (above 1), schooling rises in z, falls in zbar
  CHECK(solve_parent(3.0, 2.0, p).n < solve_parent(2.0, 2.0, p).n);
  CHECK(solve_parent(3.0, 2.0, p).e > solve_parent(2.0, 2.0, p).e);
  CHECK(solve_parent(2.0, 4.0, p).e < solve_parent(2.0, 2.0, p).e);
  CHECK(solve_parent(2.0, 4.0, p).n == Approx(solve_parent(2.0, 2.0, p).n));
}

TEST_CASE("closed form beats the brute-force probe grid") {
  const EndoParams p = pareto_params();
  const OptimReport interior = verify_parent_optimum(2.0, 2.5, p);
  CHECK(interior.residual <= 1e-6);
  CHECK(interior.utility >= interior.best_probe_utility - 1e-6);
  const OptimReport corner = verify_parent_optimum(0.5, 2.5, p);
  CHECK(corner.residual <= 1e-6);

  // first-order condition in n at the interior optimum
  const ParentChoice ch = solve_parent(2.0, 2.5, p);
  const double y = ch.n * ch.e;
  const double h = 1e-6;
  const double du =
      (endo_detail::parent_utility(ch.n + h, y, 2.0, 2.5, p, 0) -
       endo_detail::parent_utility(ch.n - h, y, 2.0, 2.5, p, 0)) /
      (2.0 * h);
  CHECK(du == Approx(0.0).margin(1e-6));

  // an impossible tolerance trips the mismatch guard
  CHECK_THROWS_AS(verify_parent_optimum(2.0, 2.5, p, 0, 50, -1.0), OptimMismatch);
}

TEST_CASE("endogenous transmission map") {
  const EndoParams p = pareto_params();
  // zeta_t = theta_t (alpha phi / (1-alpha))^alpha
  const double zeta0 = 2.5 * std::pow(0.3, 0.6);
  CHECK(endo_zeta(p, 0) == Approx(zeta0).epsilon(1e-14));
  CHECK(endo_transmission(2.0, 2.5, p, 0) ==
        Approx(zeta0 * std::pow(2.0, 1.2) * std::pow(2.5, -0.3)).epsilon(1e-14));

  // gamma = alpha removes the average-capital externality
  EndoParams ga = {0.4, 0.2, 0.4, 0.2, 2.5, 0.0};
  CHECK(endo_transmission(2.0, 5.0, ga, 0) ==
        Approx(endo_transmission(2.0, 50.0, ga, 0)).epsilon(1e-14));

  // identity configuration: alpha+beta = 1, gamma = alpha, zeta_0 = 1
  EndoParams id = {0.5, 0.5, 0.5, 0.2, std::pow(0.2, -0.5), 0.0};
  for (double z : {1.0, 2.0, 7.5}) {
    CHECK(endo_transmission(z, 3.0, id, 0) == Approx(z).epsilon(1e-12));
  }

  // technology drift scales zeta geometrically
  EndoParams drift = pareto_params();
  drift.varrho = 0.1;
  CHECK(endo_zeta(drift, 3) / endo_zeta(drift, 2) ==
        Approx(std::pow(1.1, 1.0 - drift.beta - drift.gamma)).epsilon(1e-12));
}

TEST_CASE("relative renormalization") {
  const EndoParams p = pareto_params();
  const RelativeModel rel = to_relative(p, 1.0);
  CHECK(rel.fertility.eval(1.0) == Approx(2.0)); // (1-alpha)/(phi z_lo)
  CHECK(rel.fertility.eval(1.0) / rel.fertility.eval(2.0) == Approx(2.0));
  CHECK(rel.transmission.eval(2.0) == Approx(std::pow(2.0, 1.2)));
  CHECK(rel.transmission.eval(1.0) == Approx(1.0));
  const RelativeModel rel2 = to_relative(p, 2.0);
  CHECK(rel2.fertility.eval(1.0) == Approx(1.0));
  CHECK_THROWS_AS(to_relative(p, 0.5), ParamError);
}

TEST_CASE("regime classification") {
  const EndoClassifyResult pr = classify_endo(pareto_params());
  CHECK(pr.verdict.kind == LongRunKind::Atomless);
  REQUIRE(pr.expected_exponent.has_value());
  CHECK(*pr.expected_exponent == Approx(5.0));
  REQUIRE(pr.fitted_exponent.has_value());
  CHECK(*pr.fitted_exponent == Approx(5.0).margin(1e-6));
  REQUIRE(pr.core.has_value());
  CHECK(pr.core->report.well_behaved.holds);

  const EndoClassifyResult dr = classify_endo(degenerate_params());
  CHECK(dr.verdict.kind == LongRunKind::Degenerate);
  REQUIRE(dr.verdict.atom_location.has_value());
  CHECK(*dr.verdict.atom_location == Approx(1.0).margin(1e-9));

  EndoParams border = pareto_params();
  border.alpha = 0.4;
  border.beta = 0.6;
  const EndoClassifyResult br = classify_endo(border);
  CHECK(br.verdict.kind == LongRunKind::Inconclusive);
  REQUIRE_FALSE(br.verdict.reasons.empty());
  CHECK(br.verdict.reasons.front().find("identity") != std::string::npos);
}

TEST_CASE("balanced-growth fixed points") {
  const EndoParams p = pareto_params(); // beta + gamma = 0.9 < 1
  const GrowthFixedPoint fp_par = growth_fixed_point(p, EndoRegime::ParetoSS);
  const GrowthFixedPoint fp_deg = growth_fixed_point(p, EndoRegime::DegenerateSS);
  CHECK_FALSE(fp_par.is_ratio);
  CHECK_FALSE(fp_deg.is_ratio);
  // differential fertility drags long-run average capital down
  CHECK(fp_par.value < fp_deg.value);
  // both are genuine fixed points of the growth map
  CHECK(growth_map(fp_par.value, p, EndoRegime::ParetoSS) ==
        Approx(fp_par.value).epsilon(1e-12));
  CHECK(growth_map(fp_deg.value, p, EndoRegime::DegenerateSS) ==
        Approx(fp_deg.value).epsilon(1e-12));

  // coefficient one pins the fixed point at one
  EndoParams unit = pareto_params();
  unit.theta = std::pow(0.3, -0.6); // zeta_0 = 1, varrho = 0
  CHECK(growth_fixed_point(unit, EndoRegime::DegenerateSS).value ==
        Approx(1.0).margin(1e-12));

  // beta + gamma = 1 switches to a growth ratio
  EndoParams linear = {0.4, 0.6, 0.4, 0.2, 2.5, 0.0};
  const GrowthFixedPoint fr = growth_fixed_point(linear, EndoRegime::DegenerateSS);
  CHECK(fr.is_ratio);
  CHECK(fr.value == Approx(endo_zeta(linear, 0)).epsilon(1e-12));

  // the Pareto coefficient is undefined outside alpha + beta in (1, 2)
  CHECK_THROWS_AS(growth_map(1.0, degenerate_params(), EndoRegime::ParetoSS),
                  ParamError);
}

TEST_CASE("steady-state mean fertility") {
  const EndoParams p = pareto_params();
  CHECK(steady_mean_fertility(p, 1.0, EndoRegime::ParetoSS) ==
        Approx(2.0 / 1.2).epsilon(1e-14));
  CHECK(steady_mean_fertility(p, 1.0, EndoRegime::DegenerateSS) ==
        Approx(2.0).epsilon(1e-14));
  // the ratio is exactly alpha + beta
  CHECK(steady_mean_fertility(p, 1.0, EndoRegime::DegenerateSS) /
            steady_mean_fertility(p, 1.0, EndoRegime::ParetoSS) ==
        Approx(1.2).epsilon(1e-14));
  CHECK(steady_mean_fertility(p, 2.0, EndoRegime::ParetoSS) ==
        Approx(1.0 / 1.2).epsilon(1e-14));
  CHECK_THROWS_AS(steady_mean_fertility(degenerate_params(), 1.0, EndoRegime::ParetoSS),
                  ParamError);
}

TEST_CASE("co-evolving simulation from the analytic steady state") {
  const EndoParams p = pareto_params();
  const ClosedForm ss = analytic_steady_state(EndoRelative{p.alpha, p.beta});
  const GridPtr grid = build_grid({1.0, inf}, 2049, GridScheme::LogSpaced, 1e-8, &ss);
  const GridDistribution f0 = GridDistribution::from_closed_form(grid, ss);

  RunOptions opts;
  opts.tol = 0.0;
  const EndoSimulation sim = simulate_endo(p, f0, 10, opts);
  REQUIRE(sim.history.size() == 11);

  const double zeta0 = endo_zeta(p, 0);
  for (std::size_t t = 0; t + 1 < sim.history.size(); ++t) {
    const EndoState& a = sim.history[t];
    const EndoState& b = sim.history[t + 1];
    CHECK(a.z_lo >= 1.0);
    CHECK(a.z_bar >= a.z_lo); // average at least the lower support
    // support recursion
    CHECK(b.z_lo == Approx(zeta0 * std::pow(a.z_lo, 1.2) * std::pow(a.z_bar, -0.3))
                        .epsilon(1e-12));
    // fertility declines exactly at the support growth rate while the
    // relative distribution sits at its steady state
    if (t + 2 < sim.history.size()) {
      const EndoState& c = sim.history[t + 2];
      CHECK(b.mean_fertility / a.mean_fertility ==
            Approx(a.z_lo / b.z_lo).margin(1e-6));
      CHECK(c.z_lo > b.z_lo); // support keeps rising toward its fixed point
    }
  }
  // mean fertility starts at the steady-state value for z_lo = 1
  CHECK(sim.history.front().mean_fertility == Approx(2.0 / 1.2).margin(1e-4));
}

TEST_CASE("simulation guards") {
  const EndoParams p = pareto_params();
  const GridPtr ok = Grid::uniform(1.0, 64.0, 257);
  const GridDistribution f0 =
      GridDistribution::from_closed_form(ok, ClosedForm::pareto(1.0, 5.0));

  // initial support below one
  CHECK_THROWS_AS(simulate_endo(p, f0, 5, {}, 0.9), InteriorityViolation);
  // a grid that dips below relative capital one
  const GridPtr bad = Grid::uniform(0.5, 64.0, 257);
  const GridDistribution fbad =
      GridDistribution::from_closed_form(bad, ClosedForm::pareto(1.0, 5.0));
  CHECK_THROWS_AS(simulate_endo(p, fbad, 5), ConfigError);
  // theta below the interiority bound pushes the support under one
  EndoParams weak = p;
  weak.theta = 1.5;
  CHECK_THROWS_AS(simulate_endo(weak, f0, 5), InteriorityViolation);
}

TEST_CASE("low capital intensity collapses relative capital") {
  const EndoParams p = degenerate_params(); // alpha + beta = 0.6 < 1
  const GridPtr grid = Grid::uniform(1.0, 64.0, 1025);
  const GridDistribution f0 =
      GridDistribution::from_closed_form(grid, ClosedForm::pareto(1.0, 5.0));
  RunOptions opts;
  opts.tol = 0.0;
  const EndoSimulation sim = simulate_endo(p, f0, 60, opts);
  CHECK(sim.trajectory.stop_reason == StopReason::AtomCollapse);
  REQUIRE(sim.trajectory.collapse_location.has_value());
  CHECK(*sim.trajectory.collapse_location == Approx(1.0));
  for (const EndoState& st : sim.history) {
    CHECK(st.z_lo >= 1.0);
    CHECK(st.z_bar >= st.z_lo - 1e-12);
  }
}
