// Grids, gridded distributions, metrics, stochastic orders, atom detection.

#include <catch2/catch_amalgamated.hpp>

#include "capflow/distribution.hpp"

using namespace capflow;
using Catch::Approx;

TEST_CASE("grid factories") {
  const GridPtr u = Grid::uniform(-5.0, 5.0, 1025);
  CHECK(u->size() == 1025);
  CHECK(u->node(0) == -5.0);
  CHECK(u->node(512) == 0.0); // midpoint lands exactly on a node
  CHECK(u->node(1024) == 5.0);

  const GridPtr l = Grid::log_spaced(1.0, 1e6, 2049);
  CHECK(l->node(0) == 1.0);
  CHECK(l->node(2048) == 1e6);
  CHECK(l->node(1024) == Approx(1e3).epsilon(1e-12));
  CHECK_THROWS_AS(Grid::log_spaced(0.0, 1.0, 128), ConfigError);
  CHECK_THROWS_AS(Grid::uniform(0.0, 1.0, 8), ConfigError); // below minimum size

  const std::vector<double> want{3.3333};
  const GridPtr anchored = Grid::with_anchors(*Grid::uniform(0.0, 10.0, 129), want);
  bool hit = false;
  for (double x : anchored->nodes()) hit = hit || x == 3.3333;
  CHECK(hit);

  const GridPtr left = Grid::restricted(*u, -5.0, 0.0);
  CHECK(left->size() == 513);
  CHECK(left->lo() == -5.0);
  CHECK(left->hi() == 0.0);
}

TEST_CASE("build_grid truncates unbounded spaces by reference quantiles") {
  const ClosedForm ref = ClosedForm::exponential(1.0, 0.0);
  const GridPtr g = build_grid({0.0, inf}, 257, GridScheme::Uniform, 1e-6, &ref);
  CHECK(g->lo() == Approx(0.0));
  CHECK(g->hi() == Approx(-std::log(1e-6)).epsilon(1e-12)); // 13.8155...
  CHECK_THROWS_AS(build_grid({0.0, inf}, 257, GridScheme::Uniform), ConfigError);
  const GridPtr f = build_grid({0.0, inf}, 257, GridScheme::Uniform, 1e-6, nullptr, 40.0);
  CHECK(f->hi() == Approx(40.0));
}

TEST_CASE("gridded densities normalize and integrate") {
  const GridPtr g = Grid::uniform(0.0, 30.0, 4097);
  const GridDistribution d =
      GridDistribution::from_closed_form(g, ClosedForm::exponential(1.0, 0.0));
  CHECK(d.total_mass() == Approx(1.0).margin(1e-12));
  CHECK(d.mean() == Approx(1.0).margin(1e-4));
  CHECK(d.variance() == Approx(1.0).margin(1e-3));
  CHECK(d.expect([](double x) { return std::exp(-x); }) == Approx(0.5).margin(1e-4));
  CHECK(d.cdf(std::log(2.0)) == Approx(0.5).margin(1e-4));
  CHECK(d.density_at(1.0, InterpScheme::Cubic) ==
        Approx(std::exp(-1.0)).margin(1e-6));
}

TEST_CASE("cdf is right-continuous at atoms") {
  const GridPtr g = Grid::uniform(0.0, 4.0, 129);
  std::vector<double> flat(g->size(), 0.1); // density mass 0.4
  const GridDistribution d(g, flat, {{2.0, 0.6}});
  CHECK(d.total_mass() == Approx(1.0).margin(1e-12));
  CHECK(d.cdf(2.0) == Approx(0.8).margin(1e-12));
  CHECK(d.cdf_left(2.0) == Approx(0.2).margin(1e-12));
  CHECK(d.cdf(1.999) < d.cdf(2.0) - 0.5);
  CHECK(d.mass_in(1.5, 2.5) == Approx(0.7).margin(1e-12));
  CHECK(d.mean() == Approx(0.1 * 8.0 + 0.6 * 2.0).margin(1e-12));
}

TEST_CASE("metrics against analytic values") {
  // normalization matters for W1: the truncation-mass mismatch otherwise
  // integrates to ~2e-4 over the tail of |F1 - F2|
  const GridPtr g = Grid::uniform(0.0, 25.0, 4097);
  const GridDistribution e1 =
      GridDistribution::from_closed_form(g, ClosedForm::exponential(1.0, 0.0));
  const GridDistribution e2 =
      GridDistribution::from_closed_form(g, ClosedForm::exponential(2.0, 0.0));
  CHECK(distance(e1, e2, Metric::Kolmogorov) == Approx(0.25).margin(1e-4));
  CHECK(distance(e1, e2, Metric::L1Density) == Approx(0.5).margin(1e-4));
  CHECK(distance(e1, e2, Metric::Wasserstein1) == Approx(0.5).margin(1e-4));
  CHECK(distance(e1, e1, Metric::Kolmogorov) == Approx(0.0).margin(1e-15));

  const GridPtr other = Grid::uniform(0.0, 25.0, 4099);
  const GridDistribution e3 =
      GridDistribution::from_closed_form(other, ClosedForm::exponential(1.0, 0.0));
  CHECK_THROWS_AS(distance(e1, e3, Metric::Kolmogorov), GridMismatch);
}

TEST_CASE("first-order dominance verdicts") {
  const GridPtr g = Grid::uniform(0.0, 25.0, 2049);
  const GridDistribution heavy =
      GridDistribution::from_closed_form(g, ClosedForm::exponential(1.0, 0.0), false);
  const GridDistribution light =
      GridDistribution::from_closed_form(g, ClosedForm::exponential(2.0, 0.0), false);
  CHECK(check_fosd(heavy, light).relation == OrderRelation::StrictlyDominates);
  CHECK(check_fosd(light, heavy).relation == OrderRelation::Crosses);
  CHECK(check_fosd(heavy, heavy).relation == OrderRelation::Equal);

  // genuinely crossing pair: narrow vs wide bump with the same mean
  const GridPtr h = Grid::uniform(-10.0, 10.0, 1025);
  const GridDistribution narrow =
      GridDistribution::from_closed_form(h, ClosedForm::gaussian(0.0, 0.5));
  const GridDistribution wide =
      GridDistribution::from_closed_form(h, ClosedForm::gaussian(0.0, 4.0));
  CHECK(check_fosd(narrow, wide).relation == OrderRelation::Crosses);
  CHECK(check_fosd(narrow, wide).witness.has_value());
}

TEST_CASE("monotone likelihood ratio verdicts") {
  const GridPtr g = Grid::uniform(0.0, 25.0, 2049);
  const GridDistribution heavy =
      GridDistribution::from_closed_form(g, ClosedForm::exponential(1.0, 0.0), false);
  const GridDistribution light =
      GridDistribution::from_closed_form(g, ClosedForm::exponential(2.0, 0.0), false);
  // ratio exp(-x)/(2 exp(-2x)) increases: heavy dominates in the MLR order
  CHECK(check_mlr(heavy, light).relation == OrderRelation::StrictlyDominates);
  CHECK(check_mlr(light, heavy).relation == OrderRelation::Crosses);
  CHECK(check_mlr(heavy, heavy).relation == OrderRelation::Equal);

  // zero inside the shared support is undefined
  std::vector<double> a(g->size(), 1.0), b(g->size(), 1.0);
  a[1000] = 0.0;
  CHECK_THROWS_AS(check_mlr(a, b, *g), UndefinedRatio);
  // leading/trailing zeros are trimmed, not fatal
  std::vector<double> c(g->size(), 1.0), d(g->size(), 1.0);
  c[0] = 0.0;
  d[g->size() - 1] = 0.0;
  CHECK_NOTHROW(check_mlr(c, d, *g));
}

TEST_CASE("atom detection") {
  const GridPtr g = Grid::uniform(-5.0, 5.0, 1025);
  std::vector<double> none(g->size(), 0.0);
  const GridDistribution spike(g, none, {{0.0, 1.0}});
  CHECK(detect_atom(spike, 0.0, 0.05, 1e-3));
  CHECK_FALSE(detect_atom(spike, 1.0, 0.05, 1e-3));
  const GridDistribution spread =
      GridDistribution::from_closed_form(g, ClosedForm::gaussian(0.0, 1.0));
  CHECK_FALSE(detect_atom(spread, 0.0, 0.05, 1e-3));
  const GridDistribution empty(g, none, {});
  CHECK_THROWS_AS(detect_atom(empty, 0.0, 0.05, 1e-3), ZeroMass);
}

TEST_CASE("snapshot csv is deterministic and carries atoms") {
  const GridPtr g = Grid::uniform(0.0, 2.0, 65);
  std::vector<double> flat(g->size(), 0.25);
  const GridDistribution d(g, flat, {{1.0, 0.5}});
  const std::string a = d.to_csv();
  const std::string b = d.to_csv();
  CHECK(a == b);
  CHECK(a.rfind("x,density,cdf", 0) == 0);
  CHECK(a.find("ATOM") != std::string::npos);
}
