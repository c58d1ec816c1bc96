#pragma once

// Analytic steady-state catalogue: exponential, Pareto, Gaussian and the
// q-Pochhammer-exponential family, with densities, CDFs, moments and tail
// quantiles. Used for grid sizing, overlays and oracle comparisons.

#include <cmath>
#include <functional>
#include <string>
#include <variant>

#include <json.hpp>

#include "capflow/detail/numerics.hpp"
#include "capflow/errors.hpp"
#include "capflow/interval.hpp"

namespace capflow {

// Infinite q-Pochhammer symbol (x; q)_inf = prod_{i>=0} (1 - x q^i), |q| < 1.
// The product is truncated once |x q^i| < 1e-16.
inline double qpochhammer_inf(double x, double q) {
  if (!(std::abs(q) < 1.0)) throw ParamError("qpochhammer_inf: requires |q| < 1");
  double acc = 0.0; // log-space when factors positive, else direct product
  bool log_ok = true;
  double direct = 1.0;
  double xq = x;
  for (int i = 0; i < 4096; ++i) {
    if (std::abs(xq) < 1e-16) break;
    const double factor = 1.0 - xq;
    direct *= factor;
    if (factor > 0.0 && log_ok) {
      acc += std::log1p(-xq);
    } else {
      log_ok = false;
    }
    xq *= q;
  }
  return log_ok ? std::exp(acc) : direct;
}

enum class ClosedFormFamily { Exponential, Pareto, GaussianCF, QPochhammerExp, EndoPareto };

inline const char* closed_form_name(ClosedFormFamily f) {
  switch (f) {
    case ClosedFormFamily::Exponential: return "exponential";
    case ClosedFormFamily::Pareto: return "pareto";
    case ClosedFormFamily::GaussianCF: return "gaussian";
    case ClosedFormFamily::QPochhammerExp: return "q_pochhammer_exp";
    case ClosedFormFamily::EndoPareto: return "endo_pareto";
  }
  return "unknown";
}

class ClosedForm {
public:
  using json = nlohmann::json;

  static ClosedForm exponential(double rate, double lo = 0.0) {
    if (!(rate > 0.0)) throw ParamError("exponential: rate must be > 0");
    ClosedForm f(ClosedFormFamily::Exponential);
    f.p1_ = rate;
    f.p2_ = lo;
    return f;
  }

  // cdf 1 - (lo/x)^nu on [lo, inf)
  static ClosedForm pareto(double lo, double nu) {
    if (!(lo > 0.0) || !(nu > 0.0)) throw ParamError("pareto: requires lo > 0, nu > 0");
    ClosedForm f(ClosedFormFamily::Pareto);
    f.p1_ = lo;
    f.p2_ = nu;
    return f;
  }

  static ClosedForm endo_pareto(double nu) {
    ClosedForm f = pareto(1.0, nu);
    f.family_ = ClosedFormFamily::EndoPareto;
    return f;
  }

  static ClosedForm gaussian(double mean, double var) {
    if (!(var > 0.0)) throw ParamError("gaussian: variance must be > 0");
    ClosedForm f(ClosedFormFamily::GaussianCF);
    f.p1_ = mean;
    f.p2_ = var;
    return f;
  }

  // density on [0, inf) proportional to
  //   exp(-m x / (a-1)) * ( (-x/c; 1/a)_inf / (1 + x/c) )^eta
  static ClosedForm qpochhammer_exp(double m, double a, double c, double eta) {
    if (!(m > 0.0) || !(a > 1.0) || !(c > 0.0) || !(eta >= 0.0)) {
      throw ParamError("qpochhammer_exp: requires m > 0, a > 1, c > 0, eta >= 0");
    }
    ClosedForm f(ClosedFormFamily::QPochhammerExp);
    f.p1_ = m;
    f.p2_ = a;
    f.p3_ = c;
    f.p4_ = eta;
    f.normalize_qpoch();
    return f;
  }

  ClosedFormFamily family() const { return family_; }

  Interval support() const {
    switch (family_) {
      case ClosedFormFamily::Exponential: return {p2_, inf};
      case ClosedFormFamily::Pareto:
      case ClosedFormFamily::EndoPareto: return {p1_, inf};
      case ClosedFormFamily::GaussianCF: return {-inf, inf};
      case ClosedFormFamily::QPochhammerExp: return {0.0, inf};
    }
    return {0.0, inf};
  }

  double density(double x) const {
    switch (family_) {
      case ClosedFormFamily::Exponential:
        return x < p2_ ? 0.0 : p1_ * std::exp(-p1_ * (x - p2_));
      case ClosedFormFamily::Pareto:
      case ClosedFormFamily::EndoPareto:
        return x < p1_ ? 0.0 : p2_ * std::pow(p1_, p2_) * std::pow(x, -p2_ - 1.0);
      case ClosedFormFamily::GaussianCF: {
        const double d = x - p1_;
        return std::exp(-0.5 * d * d / p2_) / std::sqrt(2.0 * M_PI * p2_);
      }
      case ClosedFormFamily::QPochhammerExp:
        return x < 0.0 ? 0.0 : unnormalized_qpoch(x) / norm_;
    }
    return 0.0;
  }

  double cdf(double x) const {
    switch (family_) {
      case ClosedFormFamily::Exponential:
        return x < p2_ ? 0.0 : 1.0 - std::exp(-p1_ * (x - p2_));
      case ClosedFormFamily::Pareto:
      case ClosedFormFamily::EndoPareto:
        return x < p1_ ? 0.0 : 1.0 - std::pow(p1_ / x, p2_);
      case ClosedFormFamily::GaussianCF:
        return detail::norm_cdf((x - p1_) / std::sqrt(p2_));
      case ClosedFormFamily::QPochhammerExp:
        break;
    }
    // q-Pochhammer: numeric cdf
    if (x <= 0.0) return 0.0;
    return detail::integrate_adaptive([this](double t) { return unnormalized_qpoch(t); },
                                      0.0, x, 1e-12) /
           norm_;
  }

  double mean() const {
    switch (family_) {
      case ClosedFormFamily::Exponential: return p2_ + 1.0 / p1_;
      case ClosedFormFamily::Pareto:
      case ClosedFormFamily::EndoPareto:
        if (!(p2_ > 1.0)) throw ParamError("pareto mean diverges for nu <= 1");
        return p2_ * p1_ / (p2_ - 1.0);
      case ClosedFormFamily::GaussianCF: return p1_;
      case ClosedFormFamily::QPochhammerExp: break;
    }
    return detail::integrate_adaptive(
               [this](double t) { return t * unnormalized_qpoch(t); }, 0.0,
               qpoch_cutoff(), 1e-12) /
           norm_;
  }

  double variance() const {
    switch (family_) {
      case ClosedFormFamily::Exponential: return 1.0 / (p1_ * p1_);
      case ClosedFormFamily::Pareto:
      case ClosedFormFamily::EndoPareto: {
        if (!(p2_ > 2.0)) throw ParamError("pareto variance diverges for nu <= 2");
        const double nu = p2_, lo = p1_;
        return nu * lo * lo / ((nu - 1.0) * (nu - 1.0) * (nu - 2.0));
      }
      case ClosedFormFamily::GaussianCF: return p2_;
      case ClosedFormFamily::QPochhammerExp: break;
    }
    const double mu = mean();
    const double m2 = detail::integrate_adaptive(
                          [this](double t) { return t * t * unnormalized_qpoch(t); },
                          0.0, qpoch_cutoff(), 1e-12) /
                      norm_;
    return m2 - mu * mu;
  }

  // x such that 1 - cdf(x) = tail
  double quantile_hi(double tail) const {
    if (!(tail > 0.0 && tail < 1.0)) throw ParamError("quantile_hi: tail in (0,1)");
    switch (family_) {
      case ClosedFormFamily::Exponential: return p2_ - std::log(tail) / p1_;
      case ClosedFormFamily::Pareto:
      case ClosedFormFamily::EndoPareto: return p1_ * std::pow(tail, -1.0 / p2_);
      case ClosedFormFamily::GaussianCF:
      case ClosedFormFamily::QPochhammerExp: break;
    }
    return invert_cdf(1.0 - tail);
  }

  // x such that cdf(x) = tail (lower tail; equals support lo for one-sided)
  double quantile_lo(double tail) const {
    if (!(tail > 0.0 && tail < 1.0)) throw ParamError("quantile_lo: tail in (0,1)");
    if (family_ != ClosedFormFamily::GaussianCF) return support().lo;
    return invert_cdf(tail);
  }

  json to_json() const {
    json j;
    j["family"] = closed_form_name(family_);
    switch (family_) {
      case ClosedFormFamily::Exponential:
        j["rate"] = p1_;
        j["lo"] = p2_;
        break;
      case ClosedFormFamily::Pareto:
      case ClosedFormFamily::EndoPareto:
        j["lo"] = p1_;
        j["nu"] = p2_;
        break;
      case ClosedFormFamily::GaussianCF:
        j["mean"] = p1_;
        j["variance"] = p2_;
        break;
      case ClosedFormFamily::QPochhammerExp:
        j["m"] = p1_;
        j["a"] = p2_;
        j["c"] = p3_;
        j["eta"] = p4_;
        break;
    }
    return j;
  }

private:

  explicit ClosedForm(ClosedFormFamily f) : family_(f) {}

  double unnormalized_qpoch(double x) const {
    // p1_=m, p2_=a, p3_=c, p4_=eta
    const double expo = std::exp(-p1_ * x / (p2_ - 1.0));
    if (p4_ == 0.0) return expo;
    const double qp = qpochhammer_inf(-x / p3_, 1.0 / p2_) / (1.0 + x / p3_);
    return expo * std::pow(qp, p4_);
  }

  double qpoch_cutoff() const {
    // exponential factor dominates the (sub-exponential) product tail
    double hi = 8.0 * (p2_ - 1.0) / p1_;
    double prev = -1.0, cur = 0.0;
    for (int i = 0; i < 40; ++i) {
      cur = detail::integrate_adaptive(
          [this](double t) { return unnormalized_qpoch(t); }, 0.0, hi, 1e-13);
      if (prev > 0.0 && std::abs(cur - prev) <= 1e-14 * cur) break;
      prev = cur;
      hi *= 2.0;
    }
    return hi;
  }

  void normalize_qpoch() {
    const double hi = qpoch_cutoff();
    norm_ = detail::integrate_adaptive(
        [this](double t) { return unnormalized_qpoch(t); }, 0.0, hi, 1e-13);
    if (!(norm_ > 0.0) || !std::isfinite(norm_)) {
      throw ParamError("qpochhammer_exp: normalization failed");
    }
  }

  double invert_cdf(double target) const {
    double lo, hi;
    if (family_ == ClosedFormFamily::GaussianCF) {
      const double sd = std::sqrt(p2_);
      lo = p1_ - 16.0 * sd;
      hi = p1_ + 16.0 * sd;
    } else {
      lo = support().lo;
      hi = std::max(1.0, lo * 2.0 + 1.0);
      while (cdf(hi) < target && hi < 1e300) hi *= 2.0;
    }
    std::function<double(double)> g = [this, target](double x) { return cdf(x) - target; };
    return detail::solve_bracketed(g, lo, hi, 1e-12 * std::max(1.0, std::abs(hi)), nullptr, 400);
  }

  ClosedFormFamily family_;
  double p1_ = 0.0, p2_ = 0.0, p3_ = 0.0, p4_ = 0.0;
  double norm_ = 1.0;
};

} // namespace capflow
