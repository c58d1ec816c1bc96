#pragma once

// Scenario configuration: JSON schema for driving the engine from the CLI,
// plus builders that materialize grids, initial distributions, and the
// worked-example catalogue (fertility/transmission pairs with analytic
// steady states).

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "capflow/closed_form.hpp"
#include "capflow/distribution.hpp"
#include "capflow/dynamics.hpp"
#include "capflow/endogenous.hpp"
#include "capflow/errors.hpp"
#include "capflow/function_model.hpp"

namespace capflow {

// ---------------------------------------------------------------------------
// JSON plumbing with anchored error messages
// ---------------------------------------------------------------------------

namespace scenario_detail {

inline std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

} // namespace scenario_detail

inline json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ":" + scenario_detail::line_col(text, e.byte) + ": " +
                      e.what());
  }
}

inline json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

namespace scenario_detail {

inline const json& require(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw ConfigError("missing required key \"" + std::string(key) + "\" in " + where);
  }
  return *it;
}

inline double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + " must be a number");
  return j.get<double>();
}

// Bound values accept a number or the strings "inf" / "-inf".
inline double as_bound(const json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return inf;
    if (s == "-inf") return -inf;
  }
  throw ConfigError(where + " must be a number, \"inf\", or \"-inf\"");
}

} // namespace scenario_detail

// ---------------------------------------------------------------------------
// Config schema
// ---------------------------------------------------------------------------

struct SpaceConfig {
  Interval space{0.0, inf};
  int grid_points = 1025;
  GridScheme scheme = GridScheme::Uniform;
  double tail_mass_tol = 1e-6;
  std::optional<double> window_hi; // truncation fallback for unbounded ends
  std::optional<double> window_lo;

  static SpaceConfig from_json(const json& j) {
    SpaceConfig s;
    s.space.lo = scenario_detail::as_bound(scenario_detail::require(j, "lo", "space"),
                                           "space.lo");
    s.space.hi = scenario_detail::as_bound(scenario_detail::require(j, "hi", "space"),
                                           "space.hi");
    s.space.validate();
    if (j.contains("grid_points")) s.grid_points = j.at("grid_points").get<int>();
    if (s.grid_points < 64) throw ConfigError("space.grid_points must be >= 64");
    if (j.contains("scheme")) {
      s.scheme = grid_scheme_from_name(j.at("scheme").get<std::string>());
    }
    if (j.contains("tail_mass_tol")) {
      s.tail_mass_tol = scenario_detail::as_number(j.at("tail_mass_tol"), "space.tail_mass_tol");
      if (!(s.tail_mass_tol > 0.0 && s.tail_mass_tol < 0.5)) {
        throw ConfigError("space.tail_mass_tol must be in (0, 0.5)");
      }
    }
    if (j.contains("window_hi")) {
      s.window_hi = scenario_detail::as_number(j.at("window_hi"), "space.window_hi");
    }
    if (j.contains("window_lo")) {
      s.window_lo = scenario_detail::as_number(j.at("window_lo"), "space.window_lo");
    }
    return s;
  }

  GridPtr make_grid(const ClosedForm* reference = nullptr) const {
    return build_grid(space, grid_points, scheme, tail_mass_tol, reference, window_hi,
                      window_lo);
  }
};

enum class Mode { Simulate, Classify, Steady, Compare, Endogenous, Example };

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Simulate: return "simulate";
    case Mode::Classify: return "classify";
    case Mode::Steady: return "steady";
    case Mode::Compare: return "compare";
    case Mode::Endogenous: return "endogenous";
    case Mode::Example: return "example";
  }
  return "simulate";
}

inline Mode mode_from_name(const std::string& s) {
  if (s == "simulate") return Mode::Simulate;
  if (s == "classify") return Mode::Classify;
  if (s == "steady") return Mode::Steady;
  if (s == "compare") return Mode::Compare;
  if (s == "endogenous") return Mode::Endogenous;
  if (s == "example") return Mode::Example;
  throw ConfigError("unknown mode \"" + s + "\"");
}

// ClosedForm from a JSON object mirroring ClosedForm::to_json.
inline ClosedForm closed_form_from_json(const json& j) {
  const std::string fam =
      scenario_detail::require(j, "family", "closed form").get<std::string>();
  using scenario_detail::require;
  if (fam == "exponential") {
    return ClosedForm::exponential(require(j, "rate", fam).get<double>(),
                                   j.value("lo", 0.0));
  }
  if (fam == "pareto") {
    return ClosedForm::pareto(require(j, "lo", fam).get<double>(),
                              require(j, "nu", fam).get<double>());
  }
  if (fam == "endo_pareto") {
    return ClosedForm::endo_pareto(require(j, "nu", fam).get<double>());
  }
  if (fam == "gaussian") {
    return ClosedForm::gaussian(require(j, "mean", fam).get<double>(),
                                require(j, "variance", fam).get<double>());
  }
  if (fam == "qpochhammer_exp") {
    return ClosedForm::qpochhammer_exp(
        require(j, "m", fam).get<double>(), require(j, "a", fam).get<double>(),
        require(j, "c", fam).get<double>(), require(j, "eta", fam).get<double>());
  }
  throw ConfigError("unknown closed-form family \"" + fam + "\"");
}

// Initial-distribution spec. Kinds:
//   uniform            {}                       flat density over the grid window
//   gaussian_mixture   {components: [{weight, mean, sigma}]}
//   closed_form        {family, ...}            density of a catalogue distribution
//   function           {spec: FunctionSpec}     unnormalized density
//   atoms              {list: [{location, mass}]}
inline GridDistribution make_initial(const json& init, GridPtr grid) {
  if (init.is_null()) {
    // default: a smooth off-center bump inside the window
    const double lo = grid->lo(), hi = grid->hi();
    const double center = lo + 0.35 * (hi - lo);
    const double sigma = 0.12 * (hi - lo);
    return GridDistribution::from_density(std::move(grid), [=](double x) {
      const double u = (x - center) / sigma;
      return std::exp(-0.5 * u * u);
    });
  }
  const std::string kind =
      scenario_detail::require(init, "kind", "initial").get<std::string>();
  if (kind == "uniform") {
    return GridDistribution::from_density(std::move(grid), [](double) { return 1.0; });
  }
  if (kind == "gaussian_mixture") {
    const json& comps = scenario_detail::require(init, "components", "initial");
    if (!comps.is_array() || comps.empty()) {
      throw ConfigError("initial.components must be a non-empty array");
    }
    struct Comp {
      double w, mu, sigma;
    };
    std::vector<Comp> cs;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      const json& c = comps[i];
      const std::string where = "initial.components[" + std::to_string(i) + "]";
      Comp comp{scenario_detail::require(c, "weight", where).get<double>(),
                scenario_detail::require(c, "mean", where).get<double>(),
                scenario_detail::require(c, "sigma", where).get<double>()};
      if (!(comp.w > 0.0)) throw ConfigError(where + ".weight must be positive");
      if (!(comp.sigma > 0.0)) throw ConfigError(where + ".sigma must be positive");
      cs.push_back(comp);
    }
    return GridDistribution::from_density(std::move(grid), [cs](double x) {
      double v = 0.0;
      for (const auto& c : cs) v += c.w * detail::norm_pdf((x - c.mu) / c.sigma) / c.sigma;
      return v;
    });
  }
  if (kind == "closed_form") {
    return GridDistribution::from_closed_form(std::move(grid), closed_form_from_json(init));
  }
  if (kind == "function") {
    const FunctionSpec f =
        FunctionSpec::from_json(scenario_detail::require(init, "spec", "initial"));
    return GridDistribution::from_density(std::move(grid),
                                          [f](double x) { return f.eval(x); });
  }
  if (kind == "atoms") {
    const json& list = scenario_detail::require(init, "list", "initial");
    if (!list.is_array() || list.empty()) {
      throw ConfigError("initial.list must be a non-empty array");
    }
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string where = "initial.list[" + std::to_string(i) + "]";
      atoms.push_back({scenario_detail::require(list[i], "location", where).get<double>(),
                       scenario_detail::require(list[i], "mass", where).get<double>()});
      if (!(atoms.back().mass > 0.0)) throw ConfigError(where + ".mass must be positive");
    }
    return GridDistribution::pure_atoms(std::move(grid), std::move(atoms)).normalized();
  }
  throw ConfigError("unknown initial.kind \"" + kind + "\"");
}

// ---------------------------------------------------------------------------
// Worked-example catalogue
// ---------------------------------------------------------------------------

// A ready-to-run model: primitives, space, analytic steady state when the
// catalogue provides one, and a sensible default start.
struct BuiltExample {
  std::string name;
  FunctionSpec fertility;
  FunctionSpec transmission;
  Interval space;
  std::optional<ClosedForm> analytic;
  std::optional<json> default_initial; // overrides the generic default bump
  GridScheme preferred_scheme = GridScheme::Uniform;
};

inline BuiltExample build_example(const std::string& which, const json& params) {
  using scenario_detail::require;
  if (which == "A") {
    const double m = require(params, "m", "example A params").get<double>();
    const double a = require(params, "a", "example A params").get<double>();
    BuiltExample ex{"A",
                    FunctionSpec::exp_decay(m, 1.0, {0.0, inf}),
                    FunctionSpec::affine(a, 0.0, {0.0, inf}),
                    {0.0, inf},
                    std::nullopt,
                    std::nullopt,
                    GridScheme::Uniform};
    if (a > 1.0 && m > 0.0) ex.analytic = analytic_steady_state(ExampleA{m, a});
    return ex;
  }
  if (which == "B") {
    const std::string variant = params.value("case", "a");
    const double hi = 5.0;
    const double c = 1.0 - std::tanh(hi) / hi; // endpoints +-5 are fixed points
    FunctionSpec n = variant == "a"
                         ? FunctionSpec::skew_gauss_bump(-0.5, 2.0, 1.0, 1.0, {-hi, hi})
                         : variant == "b"
                               ? FunctionSpec::skew_gauss_bump(-4.5, 2.0, 2.0, 1.0, {-hi, hi})
                               : FunctionSpec::flat(1.0, {-hi, hi});
    if (variant != "a" && variant != "b" && variant != "c") {
      throw ConfigError("example B case must be \"a\", \"b\", or \"c\"");
    }
    return BuiltExample{"B(" + variant + ")", std::move(n),
                        FunctionSpec::tanh_shift(c, {-hi, hi}),
                        {-hi, hi},
                        std::nullopt,
                        std::nullopt,
                        GridScheme::Uniform};
  }
  if (which == "C") {
    const double m = require(params, "m", "example C params").get<double>();
    const double a = require(params, "a", "example C params").get<double>();
    BuiltExample ex{"C",
                    FunctionSpec::power_decay(m, 1.0, {1.0, inf}),
                    FunctionSpec::power(a, {1.0, inf}),
                    {1.0, inf},
                    std::nullopt,
                    json{{"kind", "function"},
                         {"spec", FunctionSpec::exp_decay(1.0, 1.0, {1.0, inf}).to_json()}},
                    GridScheme::LogSpaced};
    if (a > 1.0 && m > 0.0) ex.analytic = analytic_steady_state(ExampleC{m, a});
    return ex;
  }
  if (which == "D") {
    const double m = require(params, "m", "example D params").get<double>();
    const double a = require(params, "a", "example D params").get<double>();
    const double c = require(params, "c", "example D params").get<double>();
    const double eta = require(params, "eta", "example D params").get<double>();
    BuiltExample ex{"D",
                    FunctionSpec::poly_exp(c, eta, m, 1.0, {0.0, inf}),
                    FunctionSpec::affine(a, 0.0, {0.0, inf}),
                    {0.0, inf},
                    std::nullopt,
                    std::nullopt,
                    GridScheme::Uniform};
    if (a > 1.0 && m > 0.0) ex.analytic = analytic_steady_state(ExampleD{m, c, eta, a});
    return ex;
  }
  if (which == "E") {
    const double m = require(params, "m", "example E params").get<double>();
    const double s2 = require(params, "sigma2", "example E params").get<double>();
    const double a = require(params, "a", "example E params").get<double>();
    const double b = require(params, "b", "example E params").get<double>();
    BuiltExample ex{"E",
                    FunctionSpec::gauss_bump(m, s2, 1.0, {-inf, inf}),
                    FunctionSpec::affine(a, b, {-inf, inf}),
                    {-inf, inf},
                    std::nullopt,
                    std::nullopt,
                    GridScheme::Uniform};
    if (a > 1.0) ex.analytic = analytic_steady_state(ExampleE{m, s2, a, b});
    return ex;
  }
  throw ConfigError("unknown example \"" + which + "\" (expected A, B, C, D, or E)");
}

// ---------------------------------------------------------------------------
// Top-level scenario
// ---------------------------------------------------------------------------

struct CompareConfig {
  std::optional<json> fertility_b; // FunctionSpec JSON replacing fertility
  std::optional<json> initial_b;   // initial spec replacing the start
};

struct EndoConfig {
  EndoParams params{};
  double z_lo0 = 1.0;
  json initial; // relative-capital initial spec (null => default bump)
};

struct ScenarioConfig {
  Mode mode = Mode::Simulate;
  std::optional<SpaceConfig> space;
  std::optional<FunctionSpec> fertility;
  std::optional<FunctionSpec> transmission;
  json initial;       // null => default
  RunOptions run;
  bool auto_snapshots = true; // geometric cadence after t=10 (CLI default)
  bool decompose = false;     // also run the interval decomposition (simulate)
  std::optional<CompareConfig> compare;
  std::optional<EndoConfig> endo;
  std::optional<std::string> example_which;
  json example_params;
  json echo; // verbatim parsed config

  static ScenarioConfig parse(const json& j) {
    ScenarioConfig c;
    c.echo = j;
    c.mode = mode_from_name(
        scenario_detail::require(j, "mode", "config root").get<std::string>());

    if (j.contains("space")) c.space = SpaceConfig::from_json(j.at("space"));
    if (j.contains("fertility")) c.fertility = FunctionSpec::from_json(j.at("fertility"));
    if (j.contains("transmission")) {
      c.transmission = FunctionSpec::from_json(j.at("transmission"));
    }
    c.initial = j.value("initial", json());
    c.decompose = j.value("decompose", false);

    if (j.contains("run")) {
      const json& r = j.at("run");
      if (r.contains("max_generations")) {
        c.run.max_generations = r.at("max_generations").get<int>();
        if (c.run.max_generations < 1) throw ConfigError("run.max_generations must be >= 1");
      }
      if (r.contains("tol")) c.run.tol = r.at("tol").get<double>();
      if (r.contains("metric")) {
        c.run.metric = metric_from_name(r.at("metric").get<std::string>());
      }
      if (r.contains("interp")) {
        c.run.interp = interp_from_name(r.at("interp").get<std::string>());
      }
      if (r.contains("snapshot_every")) {
        c.run.snapshot_every = r.at("snapshot_every").get<int>();
        if (c.run.snapshot_every < 1) throw ConfigError("run.snapshot_every must be >= 1");
        c.auto_snapshots = false;
      }
    }

    switch (c.mode) {
      case Mode::Simulate:
      case Mode::Classify:
      case Mode::Steady:
        if (!c.fertility) throw ConfigError("mode " + std::string(mode_name(c.mode)) +
                                            " requires a \"fertility\" spec");
        if (!c.transmission) throw ConfigError("mode " + std::string(mode_name(c.mode)) +
                                               " requires a \"transmission\" spec");
        if (!c.space) throw ConfigError("mode " + std::string(mode_name(c.mode)) +
                                        " requires a \"space\" block");
        break;
      case Mode::Compare: {
        if (!c.fertility || !c.transmission || !c.space) {
          throw ConfigError("mode compare requires fertility, transmission, and space");
        }
        const json& cmp = scenario_detail::require(j, "compare", "config root");
        CompareConfig cc;
        if (cmp.contains("fertility_b")) cc.fertility_b = cmp.at("fertility_b");
        if (cmp.contains("initial_b")) cc.initial_b = cmp.at("initial_b");
        if (!cc.fertility_b.has_value() && !cc.initial_b.has_value()) {
          throw ConfigError("compare needs \"fertility_b\" or \"initial_b\"");
        }
        c.compare = std::move(cc);
        break;
      }
      case Mode::Endogenous: {
        const json& e = scenario_detail::require(j, "endogenous", "config root");
        EndoConfig ec;
        ec.params = EndoParams::from_json(e);
        ec.z_lo0 = e.value("z_lo0", 1.0);
        ec.initial = e.value("initial", json());
        c.endo = std::move(ec);
        break;
      }
      case Mode::Example: {
        const json& e = scenario_detail::require(j, "example", "config root");
        c.example_which =
            scenario_detail::require(e, "which", "example block").get<std::string>();
        c.example_params = e.value("params", json::object());
        break;
      }
    }
    return c;
  }

  static ScenarioConfig parse_file(const std::string& path) {
    return parse(parse_json_file(path));
  }
};

} // namespace capflow
