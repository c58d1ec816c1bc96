// Function-family layer: factories, evaluation/derivatives, inverses,
// serialization, and fixed-point analysis of transmission maps.

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "capflow/function_model.hpp"

using namespace capflow;
using Catch::Approx;

namespace {

double fd_derivative(const FunctionSpec& f, double x) {
  const double h = std::max(1e-6, 1e-6 * std::abs(x));
  return (f.eval(x + h) - f.eval(x - h)) / (2.0 * h);
}

} // namespace

TEST_CASE("factories validate parameters") {
  CHECK_THROWS_AS(FunctionSpec::affine(0.0, 1.0), ParamError);
  CHECK_THROWS_AS(FunctionSpec::affine(-2.0, 1.0), ParamError);
  CHECK_THROWS_AS(FunctionSpec::power(-1.0), ParamError);
  CHECK_THROWS_AS(FunctionSpec::power(2.0, {-1.0, inf}), ParamError);
  CHECK_THROWS_AS(FunctionSpec::tanh_shift(0.0), ParamError);
  CHECK_THROWS_AS(FunctionSpec::exp_decay(1.0, 0.0), ParamError);
  CHECK_THROWS_AS(FunctionSpec::power_decay(1.0, 1.0, {0.0, inf}), ParamError);
  CHECK_THROWS_AS(FunctionSpec::skew_gauss_bump(0.0, 0.0, 1.0, 1.0), ParamError);
  CHECK_THROWS_AS(FunctionSpec::poly_exp(-1.0, 2.0, 0.5, 1.0), ParamError);
  CHECK_THROWS_AS(FunctionSpec::flat(0.0), ParamError);
  CHECK_THROWS_AS(FunctionSpec::tabulated({1.0, 1.0, 2.0}, {1.0, 2.0, 3.0}), ParamError);
  CHECK_THROWS_AS(FunctionSpec::composite({}), ParamError);
}

TEST_CASE("evaluation matches the closed forms") {
  CHECK(FunctionSpec::affine(2.0, 1.0).eval(3.0) == Approx(7.0));
  CHECK(FunctionSpec::power(2.0).eval(3.0) == Approx(9.0));
  CHECK(FunctionSpec::exp_decay(0.5, 2.0).eval(2.0) == Approx(2.0 * std::exp(-1.0)));
  CHECK(FunctionSpec::power_decay(2.0, 3.0).eval(2.0) == Approx(0.75));
  CHECK(FunctionSpec::flat(4.0).eval(-17.0) == Approx(4.0));
  CHECK(FunctionSpec::poly_exp(1.0, 2.0, 0.5, 1.0).eval(1.0) ==
        Approx(4.0 * std::exp(-0.5)));
  CHECK(FunctionSpec::gauss_bump(1.0, 4.0, 2.0).eval(3.0) ==
        Approx(2.0 * std::exp(-0.5)));
  // mpmath: skew bump with loc=-0.5, width=2, skew=1 at x in {-5, 0, 5}
  const FunctionSpec nb = FunctionSpec::skew_gauss_bump(-0.5, 2.0, 1.0, 1.0, {-5.0, 5.0});
  CHECK(nb.eval(-5.0) == Approx(0.00097257303877476496).epsilon(1e-12));
  CHECK(nb.eval(0.0) == Approx(0.58028606854310763).epsilon(1e-12));
  CHECK(nb.eval(5.0) == Approx(0.022726259621442174).epsilon(1e-12));
  const FunctionSpec nb2 = FunctionSpec::skew_gauss_bump(-4.5, 2.0, 2.0, 1.0, {-5.0, 5.0});
  CHECK(nb2.eval(-5.0) == Approx(0.29904483661675855).epsilon(1e-12));
  CHECK(nb2.eval(0.0) == Approx(0.079559238401023094).epsilon(1e-12));
}

TEST_CASE("analytic derivatives agree with finite differences") {
  std::vector<FunctionSpec> specs;
  specs.push_back(FunctionSpec::affine(1.7, -0.3));
  specs.push_back(FunctionSpec::power(1.8));
  specs.push_back(FunctionSpec::tanh_shift(0.8));
  specs.push_back(FunctionSpec::exp_decay(0.7, 1.2));
  specs.push_back(FunctionSpec::power_decay(1.5, 2.0));
  specs.push_back(FunctionSpec::skew_gauss_bump(-0.5, 2.0, 1.0, 1.0));
  specs.push_back(FunctionSpec::gauss_bump(0.5, 2.0, 1.5));
  specs.push_back(FunctionSpec::poly_exp(1.0, 2.0, 0.5, 1.0));
  specs.push_back(FunctionSpec::flat(2.0));
  specs.push_back(
      FunctionSpec::composite({FunctionSpec::affine(2.0, 0.5), FunctionSpec::power(1.5)}));

  std::mt19937 rng(20240817);
  std::uniform_real_distribution<double> u(1.2, 4.0);
  for (const auto& f : specs) {
    for (int k = 0; k < 8; ++k) {
      const double x = u(rng);
      const double fd = fd_derivative(f, x);
      const double an = f.derivative(x);
      INFO(family_name(f.family()) << " at x=" << x);
      CHECK(an == Approx(fd).margin(1e-5).epsilon(1e-5));
    }
  }
}

TEST_CASE("second derivatives agree with finite differences of the first") {
  const FunctionSpec specs[] = {FunctionSpec::tanh_shift(0.8),
                                FunctionSpec::skew_gauss_bump(-0.5, 2.0, 1.0, 1.0),
                                FunctionSpec::gauss_bump(0.5, 2.0, 1.5),
                                FunctionSpec::poly_exp(1.0, 2.0, 0.5, 1.0),
                                FunctionSpec::power(1.8)};
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(1.1, 3.0);
  for (const auto& f : specs) {
    for (int k = 0; k < 6; ++k) {
      const double x = u(rng);
      const double h = 1e-5;
      const double fd = (f.derivative(x + h) - f.derivative(x - h)) / (2.0 * h);
      INFO(family_name(f.family()) << " at x=" << x);
      CHECK(f.second_derivative(x) == Approx(fd).margin(2e-5).epsilon(2e-5));
    }
  }
}

TEST_CASE("inverses round-trip") {
  std::vector<FunctionSpec> maps;
  maps.push_back(FunctionSpec::affine(1.5, 0.25));
  maps.push_back(FunctionSpec::power(1.3));
  maps.push_back(FunctionSpec::tanh_shift(0.8000181591474810));
  maps.push_back(
      FunctionSpec::composite({FunctionSpec::affine(2.0, 0.0), FunctionSpec::power(1.2)}));
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> u(1.05, 4.5);
  for (const auto& tau : maps) {
    for (int k = 0; k < 10; ++k) {
      const double x = u(rng);
      const double y = tau.eval(x);
      INFO(family_name(tau.family()) << " x=" << x);
      CHECK(tau.inverse(y) == Approx(x).epsilon(1e-10));
    }
  }
  // iterate: forward then inverse returns the start
  const FunctionSpec tau = FunctionSpec::affine(1.5, 0.0, {0.0, inf});
  const double x = 2.0;
  CHECK(tau.iterate(x, 3, IterDirection::Forward) == Approx(x * 1.5 * 1.5 * 1.5));
  CHECK(tau.iterate(tau.iterate(x, 4, IterDirection::Forward), 4, IterDirection::Inverse) ==
        Approx(x).epsilon(1e-12));
}

TEST_CASE("tabulated specs interpolate monotonically and hit the knots") {
  std::vector<double> xs{0.0, 1.0, 2.0, 3.0, 5.0};
  std::vector<double> ys{0.0, 0.4, 1.5, 1.7, 5.0};
  const FunctionSpec f = FunctionSpec::tabulated(xs, ys);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(f.eval(xs[i]) == Approx(ys[i]));
  double prev = f.eval(0.0);
  for (double x = 0.05; x <= 5.0; x += 0.05) {
    const double v = f.eval(x);
    CHECK(v >= prev - 1e-12); // monotone data stays monotone under the interpolant
    prev = v;
  }
  const double y = f.eval(2.6);
  CHECK(f.inverse(y) == Approx(2.6).epsilon(1e-9));
}

TEST_CASE("json round-trip preserves behaviour") {
  std::vector<FunctionSpec> specs;
  specs.push_back(FunctionSpec::exp_decay(0.5, 1.0, {0.0, inf}));
  specs.push_back(FunctionSpec::tanh_shift(0.8, {-5.0, 5.0}));
  specs.push_back(FunctionSpec::skew_gauss_bump(-0.5, 2.0, 1.0, 1.0, {-5.0, 5.0}));
  specs.push_back(
      FunctionSpec::composite({FunctionSpec::affine(2.0, 0.1), FunctionSpec::power(1.5)}));
  specs.push_back(FunctionSpec::tabulated({0.0, 1.0, 2.0}, {0.0, 0.7, 2.0}));
  for (const auto& f : specs) {
    const FunctionSpec g = FunctionSpec::from_json(f.to_json());
    CHECK(g.family() == f.family());
    for (double x : {0.3, 0.9, 1.4}) {
      const double lo = f.domain().lo;
      const double p = std::isfinite(lo) ? lo + x : x;
      if (p > f.domain().hi) continue;
      CHECK(g.eval(p) == Approx(f.eval(p)).epsilon(1e-14));
    }
  }
}

TEST_CASE("fixed points of the shifted-tanh map") {
  const double c = 0.80001815914748097; // 1 - tanh(5)/5: endpoints are fixed
  const FunctionSpec tau = FunctionSpec::tanh_shift(c, {-5.0, 5.0});
  const IntervalDecomposition d = find_fixed_points(tau);
  REQUIRE(d.fixed_points.size() == 3);
  CHECK(d.fixed_points[0].location == Approx(-5.0).margin(1e-9));
  CHECK(d.fixed_points[1].location == Approx(0.0).margin(1e-9));
  CHECK(d.fixed_points[2].location == Approx(5.0).margin(1e-9));
  CHECK(d.fixed_points[0].kind == FixedPointKind::Sink);
  CHECK(d.fixed_points[1].kind == FixedPointKind::Source);
  CHECK(d.fixed_points[2].kind == FixedPointKind::Sink);
  CHECK(d.fixed_points[1].tau_prime == Approx(1.800018159147481).epsilon(1e-12));
  CHECK(d.fixed_points[0].tau_prime == Approx(0.80019974237842478).epsilon(1e-9));
  // intervals: X_0 and X_3 empty, X_1 = [-5,0], X_2 = [0,5]
  REQUIRE(d.intervals.size() == 4);
  CHECK(d.intervals[0].empty);
  CHECK_FALSE(d.intervals[1].empty);
  CHECK(d.intervals[1].lo == Approx(-5.0));
  CHECK(d.intervals[1].hi == Approx(0.0).margin(1e-9));
  CHECK_FALSE(d.intervals[2].empty);
  CHECK(d.intervals[3].empty);
}

TEST_CASE("fixed points of affine and power maps") {
  const IntervalDecomposition up = find_fixed_points(FunctionSpec::affine(1.5, 0.0, {0.0, inf}));
  REQUIRE(up.fixed_points.size() == 1);
  CHECK(up.fixed_points[0].location == Approx(0.0).margin(1e-10));
  CHECK(up.fixed_points[0].kind == FixedPointKind::Source);

  const IntervalDecomposition down =
      find_fixed_points(FunctionSpec::affine(0.5, 0.0, {0.0, inf}));
  CHECK(down.fixed_points[0].kind == FixedPointKind::Sink);

  const IntervalDecomposition pw = find_fixed_points(FunctionSpec::power(2.0));
  REQUIRE(pw.fixed_points.size() == 1);
  CHECK(pw.fixed_points[0].location == Approx(1.0).margin(1e-10));
  CHECK(pw.fixed_points[0].kind == FixedPointKind::Source);
}

TEST_CASE("identity-like and fixed-point-free maps are flagged") {
  CHECK_THROWS_AS(find_fixed_points(FunctionSpec::affine(1.0, 0.5, {0.0, inf})),
                  NoFixedPoint);
  // identity on an unbounded window has no isolated fixed point to report
  CHECK_THROWS_AS(find_fixed_points(FunctionSpec::affine(1.0, 0.0)), NoFixedPoint);
  // on a bounded window the endpoints are reported as tangent
  const IntervalDecomposition id =
      find_fixed_points(FunctionSpec::affine(1.0, 0.0, {0.0, 5.0}));
  REQUIRE_FALSE(id.fixed_points.empty());
  for (const auto& fp : id.fixed_points) CHECK(fp.kind == FixedPointKind::Tangent);
}

TEST_CASE("transmission and fertility validation") {
  CHECK_NOTHROW(check_transmission(FunctionSpec::affine(1.5, 0.0, {0.0, inf})));
  // endpoint not fixed: tau(0) = 1 != 0
  CHECK_THROWS_AS(check_transmission(FunctionSpec::affine(1.5, 1.0, {0.0, inf})), ParamError);
  CHECK_NOTHROW(check_fertility(FunctionSpec::exp_decay(0.5, 1.0, {0.0, inf}), {0.0, inf}));
  CHECK_THROWS_AS(check_fertility(FunctionSpec::affine(1.0, -10.0), {0.0, inf}), ParamError);
}
