#pragma once

// Parametric 1-D function families used as fertility profiles n and
// transmission maps tau, plus fixed-point analysis of transmission maps.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "capflow/detail/numerics.hpp"
#include "capflow/errors.hpp"
#include "capflow/interval.hpp"

namespace capflow {

using json = nlohmann::json;

enum class Family {
  Affine,        // a*x + b
  Power,         // x^a
  TanhShift,     // c*x + tanh(x)
  ExpDecay,      // scale * exp(-m*x)
  PowerDecay,    // scale * x^(-m)
  SkewGaussBump, // scale * exp(-u^2/2) * Phi(skew*u), u = (x-loc)/width
  GaussBump,     // scale * exp(-(x-m)^2 / (2*sigma2))
  PolyExp,       // scale * (x+c)^eta * exp(-m*x)
  Flat,          // c
  Tabulated,     // monotone cubic (PCHIP) interpolant of samples
  Composite      // composition parts[n-1] ∘ ... ∘ parts[0]
};

inline const char* family_name(Family f) {
  switch (f) {
    case Family::Affine: return "affine";
    case Family::Power: return "power";
    case Family::TanhShift: return "tanh_shift";
    case Family::ExpDecay: return "exp_decay";
    case Family::PowerDecay: return "power_decay";
    case Family::SkewGaussBump: return "skew_gauss_bump";
    case Family::GaussBump: return "gauss_bump";
    case Family::PolyExp: return "poly_exp";
    case Family::Flat: return "flat";
    case Family::Tabulated: return "tabulated";
    case Family::Composite: return "composite";
  }
  return "unknown";
}

inline Family family_from_name(const std::string& s) {
  if (s == "affine") return Family::Affine;
  if (s == "power") return Family::Power;
  if (s == "tanh_shift") return Family::TanhShift;
  if (s == "exp_decay") return Family::ExpDecay;
  if (s == "power_decay") return Family::PowerDecay;
  if (s == "skew_gauss_bump") return Family::SkewGaussBump;
  if (s == "gauss_bump") return Family::GaussBump;
  if (s == "poly_exp") return Family::PolyExp;
  if (s == "flat") return Family::Flat;
  if (s == "tabulated") return Family::Tabulated;
  if (s == "composite") return Family::Composite;
  throw ConfigError("unknown function family '" + s + "'");
}

enum class IterDirection { Forward, Inverse };

class FunctionSpec;

namespace fspec_detail {

struct AffineP {
  double a, b;
};
struct PowerP {
  double a;
};
struct TanhShiftP {
  double c;
};
struct ExpDecayP {
  double m, scale;
};
struct PowerDecayP {
  double m, scale;
};
struct SkewGaussP {
  double loc, width, skew, scale;
};
struct GaussP {
  double m, sigma2, scale;
};
struct PolyExpP {
  double c, eta, m, scale;
};
struct FlatP {
  double c;
};

// PCHIP (Fritsch-Carlson) monotone cubic interpolant.
struct TabulatedP {
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<double> slopes; // derived at construction

  void build_slopes() {
    const std::size_t n = grid.size();
    slopes.assign(n, 0.0);
    if (n == 2) {
      const double d = (values[1] - values[0]) / (grid[1] - grid[0]);
      slopes[0] = slopes[1] = d;
      return;
    }
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      h[i] = grid[i + 1] - grid[i];
      delta[i] = (values[i + 1] - values[i]) / h[i];
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (delta[i - 1] * delta[i] <= 0.0) {
        slopes[i] = 0.0;
      } else {
        const double w1 = 2.0 * h[i] + h[i - 1];
        const double w2 = h[i] + 2.0 * h[i - 1];
        slopes[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
      }
    }
    auto end_slope = [](double h0, double h1, double d0, double d1) {
      double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
      if (d * d0 <= 0.0) return 0.0;
      if (d0 * d1 <= 0.0 && std::abs(d) > 3.0 * std::abs(d0)) return 3.0 * d0;
      return d;
    };
    slopes[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    slopes[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  }

  std::size_t cell(double x) const {
    // grid is strictly increasing; x must lie within (validated by caller)
    auto it = std::upper_bound(grid.begin(), grid.end(), x);
    std::size_t i = static_cast<std::size_t>(it - grid.begin());
    if (i == 0) i = 1;
    if (i >= grid.size()) i = grid.size() - 1;
    return i - 1;
  }

  double eval(double x) const {
    const std::size_t i = cell(x);
    const double h = grid[i + 1] - grid[i];
    const double s = (x - grid[i]) / h;
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    return h00 * values[i] + h * h10 * slopes[i] + h01 * values[i + 1] +
           h * h11 * slopes[i + 1];
  }
};

struct CompositeP {
  std::vector<FunctionSpec> parts;
};

using Params = std::variant<AffineP, PowerP, TanhShiftP, ExpDecayP, PowerDecayP,
                            SkewGaussP, GaussP, PolyExpP, FlatP, TabulatedP,
                            std::shared_ptr<CompositeP>>;

} // namespace fspec_detail

// Immutable description of a model primitive. Evaluation, differentiation,
// inversion and map iteration all live here; the rest of the engine treats
// primitives through this one type.
class FunctionSpec {
public:
  using json = nlohmann::json;

  Family family() const { return family_; }
  const Interval& domain() const { return domain_; }

  // --- factories -----------------------------------------------------------

  static FunctionSpec affine(double a, double b, Interval dom = {-inf, inf}) {
    if (!(a > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
      throw ParamError("affine: requires finite a > 0");
    }
    return FunctionSpec(Family::Affine, fspec_detail::AffineP{a, b}, dom);
  }

  static FunctionSpec power(double a, Interval dom = {1.0, inf}) {
    if (!(a > 0.0) || !std::isfinite(a)) throw ParamError("power: requires a > 0");
    if (dom.lo < 0.0) throw ParamError("power: domain must satisfy lo >= 0");
    return FunctionSpec(Family::Power, fspec_detail::PowerP{a}, dom);
  }

  static FunctionSpec tanh_shift(double c, Interval dom = {-inf, inf}) {
    if (!(c > 0.0) || !std::isfinite(c)) throw ParamError("tanh_shift: requires c > 0");
    return FunctionSpec(Family::TanhShift, fspec_detail::TanhShiftP{c}, dom);
  }

  static FunctionSpec exp_decay(double m, double scale, Interval dom = {0.0, inf}) {
    if (!(scale > 0.0) || !std::isfinite(m)) {
      throw ParamError("exp_decay: requires finite m and scale > 0");
    }
    return FunctionSpec(Family::ExpDecay, fspec_detail::ExpDecayP{m, scale}, dom);
  }

  static FunctionSpec power_decay(double m, double scale, Interval dom = {1.0, inf}) {
    if (!(scale > 0.0) || !std::isfinite(m)) {
      throw ParamError("power_decay: requires finite m and scale > 0");
    }
    if (!(dom.lo > 0.0)) throw ParamError("power_decay: domain must satisfy lo > 0");
    return FunctionSpec(Family::PowerDecay, fspec_detail::PowerDecayP{m, scale}, dom);
  }

  static FunctionSpec skew_gauss_bump(double loc, double width, double skew,
                                      double scale, Interval dom = {-inf, inf}) {
    if (!(width > 0.0) || !(scale > 0.0) || !std::isfinite(loc) || !std::isfinite(skew)) {
      throw ParamError("skew_gauss_bump: requires width > 0, scale > 0");
    }
    return FunctionSpec(Family::SkewGaussBump,
                        fspec_detail::SkewGaussP{loc, width, skew, scale}, dom);
  }

  static FunctionSpec gauss_bump(double m, double sigma2, double scale,
                                 Interval dom = {-inf, inf}) {
    if (!(sigma2 > 0.0) || !(scale > 0.0) || !std::isfinite(m)) {
      throw ParamError("gauss_bump: requires sigma2 > 0, scale > 0");
    }
    return FunctionSpec(Family::GaussBump, fspec_detail::GaussP{m, sigma2, scale}, dom);
  }

  static FunctionSpec poly_exp(double c, double eta, double m, double scale,
                               Interval dom = {0.0, inf}) {
    if (!(c > 0.0) || !(eta >= 0.0) || !(scale > 0.0) || !std::isfinite(m)) {
      throw ParamError("poly_exp: requires c > 0, eta >= 0, scale > 0");
    }
    return FunctionSpec(Family::PolyExp, fspec_detail::PolyExpP{c, eta, m, scale}, dom);
  }

  static FunctionSpec flat(double c, Interval dom = {-inf, inf}) {
    if (!(c > 0.0)) throw ParamError("flat: requires c > 0");
    return FunctionSpec(Family::Flat, fspec_detail::FlatP{c}, dom);
  }

  static FunctionSpec tabulated(std::vector<double> grid, std::vector<double> values) {
    if (grid.size() < 2 || grid.size() != values.size()) {
      throw ParamError("tabulated: need >= 2 samples with matching sizes");
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!std::isfinite(grid[i]) || !std::isfinite(values[i])) {
        throw ParamError("tabulated: samples must be finite");
      }
      if (i > 0 && !(grid[i] > grid[i - 1])) {
        throw ParamError("tabulated: grid must be strictly increasing");
      }
    }
    fspec_detail::TabulatedP p{std::move(grid), std::move(values), {}};
    p.build_slopes();
    Interval dom{p.grid.front(), p.grid.back()};
    return FunctionSpec(Family::Tabulated, std::move(p), dom);
  }

  static FunctionSpec composite(std::vector<FunctionSpec> parts) {
    if (parts.empty()) throw ParamError("composite: needs at least one part");
    Interval dom = parts.front().domain();
    auto p = std::make_shared<fspec_detail::CompositeP>();
    p->parts = std::move(parts);
    return FunctionSpec(Family::Composite, std::move(p), dom);
  }

  // --- evaluation ----------------------------------------------------------

  double operator()(double x) const { return eval(x); }

  double eval(double x) const {
    using namespace fspec_detail;
    switch (family_) {
      case Family::Affine: {
        const auto& p = std::get<AffineP>(params_);
        return p.a * x + p.b;
      }
      case Family::Power: {
        const auto& p = std::get<PowerP>(params_);
        return std::pow(x, p.a);
      }
      case Family::TanhShift: {
        const auto& p = std::get<TanhShiftP>(params_);
        return p.c * x + std::tanh(x);
      }
      case Family::ExpDecay: {
        const auto& p = std::get<ExpDecayP>(params_);
        return p.scale * std::exp(-p.m * x);
      }
      case Family::PowerDecay: {
        const auto& p = std::get<PowerDecayP>(params_);
        return p.scale * std::pow(x, -p.m);
      }
      case Family::SkewGaussBump: {
        const auto& p = std::get<SkewGaussP>(params_);
        const double u = (x - p.loc) / p.width;
        return p.scale * std::exp(-0.5 * u * u) * detail::norm_cdf(p.skew * u);
      }
      case Family::GaussBump: {
        const auto& p = std::get<GaussP>(params_);
        const double d = x - p.m;
        return p.scale * std::exp(-0.5 * d * d / p.sigma2);
      }
      case Family::PolyExp: {
        const auto& p = std::get<PolyExpP>(params_);
        return p.scale * std::pow(x + p.c, p.eta) * std::exp(-p.m * x);
      }
      case Family::Flat:
        return std::get<FlatP>(params_).c;
      case Family::Tabulated: {
        const auto& p = std::get<TabulatedP>(params_);
        const double slack = 1e-9 * std::max(1.0, std::abs(x));
        if (x < p.grid.front() - slack || x > p.grid.back() + slack) {
          throw DomainError("tabulated: evaluation outside sample range");
        }
        return p.eval(std::clamp(x, p.grid.front(), p.grid.back()));
      }
      case Family::Composite: {
        const auto& p = *std::get<std::shared_ptr<CompositeP>>(params_);
        double v = x;
        for (const auto& part : p.parts) v = part.eval(v);
        return v;
      }
    }
    throw Error("eval: unreachable");
  }

  double derivative(double x) const {
    using namespace fspec_detail;
    switch (family_) {
      case Family::Affine:
        return std::get<AffineP>(params_).a;
      case Family::Power: {
        const auto& p = std::get<PowerP>(params_);
        return p.a * std::pow(x, p.a - 1.0);
      }
      case Family::TanhShift: {
        const auto& p = std::get<TanhShiftP>(params_);
        const double ch = std::cosh(x);
        return p.c + 1.0 / (ch * ch);
      }
      case Family::ExpDecay: {
        const auto& p = std::get<ExpDecayP>(params_);
        return -p.m * p.scale * std::exp(-p.m * x);
      }
      case Family::PowerDecay: {
        const auto& p = std::get<PowerDecayP>(params_);
        return -p.m * p.scale * std::pow(x, -p.m - 1.0);
      }
      case Family::SkewGaussBump: {
        const auto& p = std::get<SkewGaussP>(params_);
        const double u = (x - p.loc) / p.width;
        const double e = std::exp(-0.5 * u * u);
        return p.scale / p.width * e *
               (-u * detail::norm_cdf(p.skew * u) + p.skew * detail::norm_pdf(p.skew * u));
      }
      case Family::GaussBump: {
        const auto& p = std::get<GaussP>(params_);
        const double d = x - p.m;
        return -d / p.sigma2 * eval(x);
      }
      case Family::PolyExp: {
        const auto& p = std::get<PolyExpP>(params_);
        const double base = std::pow(x + p.c, p.eta - 1.0) * std::exp(-p.m * x);
        return p.scale * base * (p.eta - p.m * (x + p.c));
      }
      case Family::Flat:
        return 0.0;
      case Family::Tabulated:
        // central finite difference on the interpolant (documented choice)
        return detail::central_diff([this](double t) { return eval(t); }, x);
      case Family::Composite: {
        const auto& p = *std::get<std::shared_ptr<CompositeP>>(params_);
        double v = x, acc = 1.0;
        for (const auto& part : p.parts) {
          acc *= part.derivative(v);
          v = part.eval(v);
        }
        return acc;
      }
    }
    throw Error("derivative: unreachable");
  }

  double second_derivative(double x) const {
    using namespace fspec_detail;
    switch (family_) {
      case Family::Affine:
      case Family::Flat:
        return 0.0;
      case Family::Power: {
        const auto& p = std::get<PowerP>(params_);
        return p.a * (p.a - 1.0) * std::pow(x, p.a - 2.0);
      }
      case Family::TanhShift: {
        const double ch = std::cosh(x);
        const double sech2 = 1.0 / (ch * ch);
        return -2.0 * sech2 * std::tanh(x);
      }
      case Family::ExpDecay: {
        const auto& p = std::get<ExpDecayP>(params_);
        return p.m * p.m * p.scale * std::exp(-p.m * x);
      }
      case Family::PowerDecay: {
        const auto& p = std::get<PowerDecayP>(params_);
        return p.m * (p.m + 1.0) * p.scale * std::pow(x, -p.m - 2.0);
      }
      case Family::SkewGaussBump: {
        const auto& p = std::get<SkewGaussP>(params_);
        const double u = (x - p.loc) / p.width;
        const double e = std::exp(-0.5 * u * u);
        const double k = p.skew;
        return p.scale / (p.width * p.width) * e *
               ((u * u - 1.0) * detail::norm_cdf(k * u) -
                u * k * (2.0 + k * k) * detail::norm_pdf(k * u));
      }
      case Family::GaussBump: {
        const auto& p = std::get<GaussP>(params_);
        const double d = x - p.m;
        return eval(x) * (d * d / (p.sigma2 * p.sigma2) - 1.0 / p.sigma2);
      }
      case Family::PolyExp: {
        const auto& p = std::get<PolyExpP>(params_);
        const double base = std::pow(x + p.c, p.eta - 2.0) * std::exp(-p.m * x);
        const double q = p.eta * (p.eta - 1.0) -
                         2.0 * p.m * p.eta * (x + p.c) +
                         p.m * p.m * (x + p.c) * (x + p.c);
        return p.scale * base * q;
      }
      case Family::Tabulated:
      case Family::Composite:
        return detail::central_diff([this](double t) { return derivative(t); }, x);
    }
    throw Error("second_derivative: unreachable");
  }

  // Inverse for strictly monotone specs; |f(x)-y| <= 1e-12*max(1,|y|) for
  // numeric branches. Throws DomainError for non-invertible families.
  double inverse(double y) const {
    using namespace fspec_detail;
    switch (family_) {
      case Family::Affine: {
        const auto& p = std::get<AffineP>(params_);
        return (y - p.b) / p.a;
      }
      case Family::Power: {
        const auto& p = std::get<PowerP>(params_);
        if (!(y >= 0.0)) throw DomainError("power inverse: y must be >= 0");
        return std::pow(y, 1.0 / p.a);
      }
      case Family::TanhShift: {
        const auto& p = std::get<TanhShiftP>(params_);
        // |tanh| < 1 brackets the root in [(y-1)/c, (y+1)/c]
        return inverse_numeric(y, (y - 1.0) / p.c, (y + 1.0) / p.c);
      }
      case Family::ExpDecay: {
        const auto& p = std::get<ExpDecayP>(params_);
        if (p.m == 0.0) throw DomainError("exp_decay inverse: constant map");
        if (!(y > 0.0)) throw DomainError("exp_decay inverse: y must be > 0");
        return -std::log(y / p.scale) / p.m;
      }
      case Family::PowerDecay: {
        const auto& p = std::get<PowerDecayP>(params_);
        if (p.m == 0.0) throw DomainError("power_decay inverse: constant map");
        if (!(y > 0.0)) throw DomainError("power_decay inverse: y must be > 0");
        return std::pow(y / p.scale, -1.0 / p.m);
      }
      case Family::Tabulated: {
        const auto& p = std::get<TabulatedP>(params_);
        if (!(p.values.front() < p.values.back())) {
          throw DomainError("tabulated inverse: values not increasing");
        }
        if (y < p.values.front() || y > p.values.back()) {
          throw DomainError("tabulated inverse: y outside sampled range");
        }
        return inverse_numeric(y, p.grid.front(), p.grid.back());
      }
      case Family::Composite: {
        const auto& p = *std::get<std::shared_ptr<CompositeP>>(params_);
        double v = y;
        for (auto it = p.parts.rbegin(); it != p.parts.rend(); ++it) {
          v = it->inverse(v);
        }
        return v;
      }
      default:
        throw DomainError(std::string("inverse: family '") + family_name(family_) +
                          "' is not invertible");
    }
  }

  // t-fold forward or inverse iteration of the map.
  double iterate(double x, int t, IterDirection dir = IterDirection::Forward) const {
    if (t < 0) throw ParamError("iterate: t must be >= 0");
    double v = x;
    for (int i = 0; i < t; ++i) {
      v = (dir == IterDirection::Forward) ? eval(v) : inverse(v);
    }
    return v;
  }

  // --- JSON ---------------------------------------------------------------

  json to_json() const {
    using namespace fspec_detail;
    json j;
    j["family"] = family_name(family_);
    json p;
    switch (family_) {
      case Family::Affine: {
        const auto& q = std::get<AffineP>(params_);
        p = {{"a", q.a}, {"b", q.b}};
        break;
      }
      case Family::Power:
        p = {{"a", std::get<PowerP>(params_).a}};
        break;
      case Family::TanhShift:
        p = {{"c", std::get<TanhShiftP>(params_).c}};
        break;
      case Family::ExpDecay: {
        const auto& q = std::get<ExpDecayP>(params_);
        p = {{"m", q.m}, {"scale", q.scale}};
        break;
      }
      case Family::PowerDecay: {
        const auto& q = std::get<PowerDecayP>(params_);
        p = {{"m", q.m}, {"scale", q.scale}};
        break;
      }
      case Family::SkewGaussBump: {
        const auto& q = std::get<SkewGaussP>(params_);
        p = {{"loc", q.loc}, {"width", q.width}, {"skew", q.skew}, {"scale", q.scale}};
        break;
      }
      case Family::GaussBump: {
        const auto& q = std::get<GaussP>(params_);
        p = {{"m", q.m}, {"sigma2", q.sigma2}, {"scale", q.scale}};
        break;
      }
      case Family::PolyExp: {
        const auto& q = std::get<PolyExpP>(params_);
        p = {{"c", q.c}, {"eta", q.eta}, {"m", q.m}, {"scale", q.scale}};
        break;
      }
      case Family::Flat:
        p = {{"c", std::get<FlatP>(params_).c}};
        break;
      case Family::Tabulated: {
        const auto& q = std::get<TabulatedP>(params_);
        p = {{"grid", q.grid}, {"values", q.values}};
        break;
      }
      case Family::Composite: {
        const auto& q = *std::get<std::shared_ptr<CompositeP>>(params_);
        json parts = json::array();
        for (const auto& part : q.parts) parts.push_back(part.to_json());
        p = {{"parts", parts}};
        break;
      }
    }
    j["params"] = p;
    j["domain"] = domain_to_json(domain_);
    return j;
  }

  static json domain_to_json(const Interval& d) {
    json lo = d.lo_finite() ? json(d.lo) : json("-inf");
    json hi = d.hi_finite() ? json(d.hi) : json("inf");
    return json::array({lo, hi});
  }

  static double domain_endpoint_from_json(const json& v, const char* which) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      if (s == "inf" || s == "+inf") return inf;
      if (s == "-inf") return -inf;
    }
    throw ConfigError(std::string("domain ") + which +
                      " must be a number or \"inf\"/\"-inf\"");
  }

  static Interval domain_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2) {
      throw ConfigError("domain must be an array [lo, hi]");
    }
    Interval d{domain_endpoint_from_json(j[0], "lo"), domain_endpoint_from_json(j[1], "hi")};
    d.validate();
    return d;
  }

  static FunctionSpec from_json(const json& j) {
    if (!j.is_object() || !j.contains("family") || !j.contains("params")) {
      throw ConfigError("function spec requires 'family' and 'params'");
    }
    const Family fam = family_from_name(j.at("family").get<std::string>());
    Interval dom{-inf, inf};
    const bool has_domain = j.contains("domain");
    if (has_domain) dom = domain_from_json(j.at("domain"));
    const json& p = j.at("params");
    auto need = [&p](const char* key) -> double {
      if (!p.contains(key) || !p.at(key).is_number()) {
        throw ConfigError(std::string("param '") + key + "' missing or non-numeric");
      }
      return p.at(key).get<double>();
    };
    auto opt = [&p](const char* key, double fallback) -> double {
      if (!p.contains(key)) return fallback;
      return p.at(key).get<double>();
    };
    switch (fam) {
      case Family::Affine: return affine(need("a"), need("b"), dom);
      case Family::Power: return power(need("a"), has_domain ? dom : Interval{1.0, inf});
      case Family::TanhShift: return tanh_shift(need("c"), dom);
      case Family::ExpDecay: return exp_decay(need("m"), opt("scale", 1.0), dom);
      case Family::PowerDecay:
        return power_decay(need("m"), opt("scale", 1.0),
                           has_domain ? dom : Interval{1.0, inf});
      case Family::SkewGaussBump:
        return skew_gauss_bump(need("loc"), need("width"), need("skew"),
                               opt("scale", 1.0), dom);
      case Family::GaussBump:
        return gauss_bump(need("m"), need("sigma2"), opt("scale", 1.0), dom);
      case Family::PolyExp:
        return poly_exp(need("c"), need("eta"), need("m"), opt("scale", 1.0), dom);
      case Family::Flat: return flat(need("c"), dom);
      case Family::Tabulated: {
        if (!p.contains("grid") || !p.contains("values")) {
          throw ConfigError("tabulated requires 'grid' and 'values' arrays");
        }
        return tabulated(p.at("grid").get<std::vector<double>>(),
                         p.at("values").get<std::vector<double>>());
      }
      case Family::Composite: {
        if (!p.contains("parts") || !p.at("parts").is_array()) {
          throw ConfigError("composite requires a 'parts' array");
        }
        std::vector<FunctionSpec> parts;
        for (const auto& part : p.at("parts")) parts.push_back(from_json(part));
        return composite(std::move(parts));
      }
    }
    throw ConfigError("from_json: unreachable");
  }

private:
  FunctionSpec(Family f, fspec_detail::Params p, Interval dom)
      : family_(f), params_(std::move(p)), domain_(dom) {
    domain_.validate();
  }

  double inverse_numeric(double y, double lo, double hi) const {
    const double tol = 1e-12 * std::max(1.0, std::abs(y));
    std::function<double(double)> g = [this, y](double x) { return eval(x) - y; };
    std::function<double(double)> d = [this](double x) { return derivative(x); };
    // x-tolerance scaled by local slope so the residual criterion is met
    double mid_slope = std::abs(derivative(0.5 * (lo + hi)));
    if (!(mid_slope > 0.0) || !std::isfinite(mid_slope)) mid_slope = 1.0;
    double x = detail::solve_bracketed(g, lo, hi, tol / std::max(1.0, mid_slope), &d, 300);
    // Newton polish until the residual contract holds
    for (int i = 0; i < 50 && std::abs(eval(x) - y) > tol; ++i) {
      const double der = derivative(x);
      if (der == 0.0 || !std::isfinite(der)) break;
      x -= (eval(x) - y) / der;
    }
    if (std::abs(eval(x) - y) > tol) {
      throw NoConvergence("inverse: residual tolerance not met");
    }
    return x;
  }

  Family family_;
  fspec_detail::Params params_;
  Interval domain_;
};

// ---------------------------------------------------------------------------
// Fixed points of transmission maps and the induced interval decomposition.
// ---------------------------------------------------------------------------

enum class FixedPointKind { Sink, Source, Tangent };

inline const char* fixed_point_kind_name(FixedPointKind k) {
  switch (k) {
    case FixedPointKind::Sink: return "sink";
    case FixedPointKind::Source: return "source";
    case FixedPointKind::Tangent: return "tangent";
  }
  return "unknown";
}

struct FixedPointReport {
  double location = 0.0;
  double tau_prime = 0.0;
  FixedPointKind kind = FixedPointKind::Tangent;
};

// X_k between consecutive fixed points; `empty` marks the degenerate
// boundary intervals X_0 (when s_1 = inf X) and X_K (when s_K = sup X).
struct IntervalInfo {
  double lo = 0.0;
  double hi = 0.0;
  bool empty = false;
};

struct IntervalDecomposition {
  Interval space;
  std::vector<FixedPointReport> fixed_points; // s_1 .. s_K ascending
  std::vector<IntervalInfo> intervals;        // X_0 .. X_K

  std::size_t n_fixed_points() const { return fixed_points.size(); }

  // Fixed points adjacent to interval k: s_k (left, k>=1) and s_{k+1} (right,
  // k<=K-1), using the 1-based fixed point indexing of the decomposition.
  std::optional<std::size_t> left_fp(std::size_t k) const {
    if (k == 0) return std::nullopt;
    return k - 1; // index into fixed_points
  }
  std::optional<std::size_t> right_fp(std::size_t k) const {
    if (k >= fixed_points.size()) return std::nullopt;
    return k;
  }
};

struct FixedPointOptions {
  int probes = 4096;           // initial scan resolution
  double refine_tol = 1e-12;   // root refinement tolerance (in x)
  double classify_tol = 1e-8;  // |tau'(s)-1| below this => Tangent
  double scan_cap = 1e6;       // truncation of infinite scan windows
  double endpoint_tol = 1e-9;  // |tau(e)-e| tolerance for endpoint fixed points
};

inline IntervalDecomposition find_fixed_points(const FunctionSpec& tau,
                                               FixedPointOptions opts = {}) {
  const Interval dom = tau.domain();
  dom.validate();
  const double wlo = std::max(dom.lo, -opts.scan_cap);
  const double whi = std::min(dom.hi, opts.scan_cap);
  if (!(wlo < whi)) throw ConfigError("find_fixed_points: empty scan window");

  const int n = std::max(16, opts.probes);
  std::vector<double> xs(static_cast<std::size_t>(n) + 1);
  std::vector<double> gs(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = wlo + (whi - wlo) * static_cast<double>(i) / static_cast<double>(n);
    gs[i] = tau.eval(xs[i]) - xs[i];
  }

  std::vector<double> roots;
  auto push_root = [&roots, &opts](double r) {
    for (double existing : roots) {
      if (std::abs(existing - r) <= 64.0 * opts.refine_tol * std::max(1.0, std::abs(r))) {
        return;
      }
    }
    roots.push_back(r);
  };

  // identity-like map: everything is (numerically) fixed
  std::size_t zero_probes = 0;
  for (std::size_t i = 0; i < gs.size(); ++i) {
    if (std::abs(gs[i]) <= 1e-12 * std::max(1.0, std::abs(xs[i]))) ++zero_probes;
  }
  const bool identity_like = zero_probes >= gs.size() - gs.size() / 8;

  if (identity_like) {
    if (dom.lo_finite()) push_root(dom.lo);
    if (dom.hi_finite()) push_root(dom.hi);
    if (roots.empty()) {
      throw NoFixedPoint("find_fixed_points: identity-like map on unbounded window");
    }
  } else {
    // finite endpoints fixed by the bijection requirement
    if (dom.lo_finite() &&
        std::abs(tau.eval(dom.lo) - dom.lo) <= opts.endpoint_tol * std::max(1.0, std::abs(dom.lo))) {
      push_root(dom.lo);
    }
    if (dom.hi_finite() &&
        std::abs(tau.eval(dom.hi) - dom.hi) <= opts.endpoint_tol * std::max(1.0, std::abs(dom.hi))) {
      push_root(dom.hi);
    }
    std::function<double(double)> g = [&tau](double x) { return tau.eval(x) - x; };
    std::function<double(double)> gd = [&tau](double x) { return tau.derivative(x) - 1.0; };
    for (std::size_t i = 1; i < xs.size(); ++i) {
      if (gs[i - 1] == 0.0) {
        push_root(xs[i - 1]);
        continue;
      }
      if (gs[i] == 0.0) continue; // handled at next iteration start
      if ((gs[i - 1] > 0) != (gs[i] > 0)) {
        const double r =
            detail::solve_bracketed(g, xs[i - 1], xs[i], opts.refine_tol, &gd, 300);
        push_root(r);
      }
    }
  }

  std::sort(roots.begin(), roots.end());
  if (roots.empty()) {
    throw NoFixedPoint("find_fixed_points: no fixed point in scan window");
  }

  IntervalDecomposition out;
  out.space = dom;
  for (double r : roots) {
    FixedPointReport fp;
    fp.location = r;
    fp.tau_prime = tau.derivative(r);
    if (identity_like || std::abs(fp.tau_prime - 1.0) <= opts.classify_tol) {
      fp.kind = FixedPointKind::Tangent;
    } else if (fp.tau_prime > 1.0) {
      fp.kind = FixedPointKind::Source;
    } else {
      fp.kind = FixedPointKind::Sink;
    }
    out.fixed_points.push_back(fp);
  }

  const std::size_t K = out.fixed_points.size();
  out.intervals.resize(K + 1);
  for (std::size_t k = 0; k <= K; ++k) {
    const double lo = (k == 0) ? dom.lo : out.fixed_points[k - 1].location;
    const double hi = (k == K) ? dom.hi : out.fixed_points[k].location;
    out.intervals[k] = IntervalInfo{lo, hi, !(lo < hi)};
  }
  return out;
}

// Transmission validity: strictly increasing on its domain and finite
// endpoints fixed (tau maps X onto X). Rejects rather than extrapolates.
inline void check_transmission(const FunctionSpec& tau, int probes = 512) {
  const Interval dom = tau.domain();
  const double wlo = std::max(dom.lo, -1e6);
  const double whi = std::min(dom.hi, 1e6);
  double prev = tau.eval(wlo);
  for (int i = 1; i <= probes; ++i) {
    const double x = wlo + (whi - wlo) * static_cast<double>(i) / probes;
    const double v = tau.eval(x);
    if (!(v > prev)) {
      throw ParamError("transmission must be strictly increasing");
    }
    if (!(tau.derivative(x) > 0.0)) {
      throw ParamError("transmission must have positive derivative");
    }
    prev = v;
  }
  // tau maps X onto X: a finite endpoint of the space must be fixed
  auto endpoint_fixed = [&tau](double e) {
    return std::abs(tau.eval(e) - e) <= 1e-9 * std::max(1.0, std::abs(e));
  };
  if (dom.lo_finite() && !endpoint_fixed(dom.lo)) {
    throw ParamError("transmission must fix the finite lower endpoint of X");
  }
  if (dom.hi_finite() && !endpoint_fixed(dom.hi)) {
    throw ParamError("transmission must fix the finite upper endpoint of X");
  }
}

// Fertility validity: strictly positive and bounded on the (truncated) space.
inline void check_fertility(const FunctionSpec& n, const Interval& space,
                            int probes = 512) {
  const double wlo = std::max(space.lo, -1e6);
  const double whi = std::min(space.hi, 1e6);
  bool any_positive = false;
  for (int i = 0; i <= probes; ++i) {
    const double x = wlo + (whi - wlo) * static_cast<double>(i) / probes;
    const double v = n.eval(x);
    // An analytically positive tail can underflow to exact zero in double
    // precision, so isolated zeros are tolerated; negative, NaN, or infinite
    // values are definitive violations, as is an identically zero profile.
    if (v < 0.0 || !std::isfinite(v)) {
      throw ParamError("fertility must be strictly positive and finite on X");
    }
    if (v > 0.0) any_positive = true;
  }
  if (!any_positive) {
    throw ParamError("fertility must be strictly positive and finite on X");
  }
}

} // namespace capflow
