// Config parsing, initial-state construction, example catalogue, and
// end-to-end scenario runs through the library runner.

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "capflow/runner.hpp"
#include "capflow/scenario.hpp"

using namespace capflow;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "capflow_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json minimal_simulate_config() {
  json j;
  j["mode"] = "simulate";
  j["space"] = {{"lo", 0.0}, {"hi", 40.0}, {"grid_points", 257}};
  j["fertility"] = FunctionSpec::exp_decay(0.5, 1.0, {0.0, inf}).to_json();
  j["transmission"] = FunctionSpec::affine(1.5, 0.0, {0.0, inf}).to_json();
  j["run"] = {{"max_generations", 10}, {"tol", 0.0}, {"snapshot_every", 5}};
  return j;
}

} // namespace

TEST_CASE("json parse errors carry the origin and position") {
  CHECK_THROWS_AS(parse_json_text("{ \"mode\": ", "inline-config"), ConfigError);
  try {
    parse_json_text("{\n  \"mode\": oops\n}", "inline-config");
    FAIL("expected a parse failure");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("inline-config") != std::string::npos);
    CHECK(msg.find("line") != std::string::npos);
  }
}

TEST_CASE("config validation names the missing pieces") {
  json j = minimal_simulate_config();
  j.erase("transmission");
  try {
    ScenarioConfig::parse(j);
    FAIL("expected a config failure");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("transmission") != std::string::npos);
  }

  json bad_mode = minimal_simulate_config();
  bad_mode["mode"] = "simulate-harder";
  CHECK_THROWS_AS(ScenarioConfig::parse(bad_mode), ConfigError);

  json bad_run = minimal_simulate_config();
  bad_run["run"]["snapshot_every"] = 0;
  CHECK_THROWS_AS(ScenarioConfig::parse(bad_run), ConfigError);

  json bad_grid = minimal_simulate_config();
  bad_grid["space"]["grid_points"] = 16;
  CHECK_THROWS_AS(ScenarioConfig::parse(bad_grid), ConfigError);

  json cmp = minimal_simulate_config();
  cmp["mode"] = "compare";
  cmp["compare"] = json::object();
  CHECK_THROWS_AS(ScenarioConfig::parse(cmp), ConfigError); // needs a b-side
}

TEST_CASE("initial-state kinds") {
  const GridPtr grid = Grid::uniform(0.0, 20.0, 129);

  const GridDistribution dflt = make_initial(json(), grid);
  CHECK(dflt.total_mass() == Approx(1.0).margin(1e-12));
  CHECK(dflt.mean() == Approx(7.0).margin(0.2)); // bump at lo + 0.35 span

  const GridDistribution flat = make_initial(json{{"kind", "uniform"}}, grid);
  CHECK(flat.density()[10] == Approx(flat.density()[100]));

  const json mix{{"kind", "gaussian_mixture"},
                 {"components",
                  json::array({json{{"weight", 0.75}, {"mean", 4.0}, {"sigma", 1.0}},
                               json{{"weight", 0.25}, {"mean", 12.0}, {"sigma", 1.5}}})}};
  const GridDistribution gm = make_initial(mix, grid);
  CHECK(gm.total_mass() == Approx(1.0).margin(1e-12));
  CHECK(gm.mean() == Approx(0.75 * 4.0 + 0.25 * 12.0).margin(1e-2));

  const GridDistribution cf = make_initial(
      json{{"kind", "closed_form"}, {"family", "exponential"}, {"rate", 1.0}}, grid);
  CHECK(cf.density_at(0.0) == Approx(1.0).margin(1e-2));

  const json fn{{"kind", "function"},
                {"spec", FunctionSpec::exp_decay(0.5, 7.0, {0.0, inf}).to_json()}};
  const GridDistribution fd = make_initial(fn, grid);
  CHECK(fd.total_mass() == Approx(1.0).margin(1e-12)); // scale normalized away
  CHECK(fd.mean() == Approx(2.0).margin(1e-2));

  const json atoms{{"kind", "atoms"},
                   {"list", json::array({json{{"location", 2.0}, {"mass", 3.0}},
                                         json{{"location", 5.0}, {"mass", 1.0}}})}};
  const GridDistribution ad = make_initial(atoms, grid);
  CHECK(ad.atoms().size() == 2);
  CHECK(ad.total_mass() == Approx(1.0).margin(1e-15));
  CHECK(ad.atoms()[0].mass == Approx(0.75));

  CHECK_THROWS_AS(make_initial(json{{"kind", "bootstrap"}}, grid), ConfigError);
}

TEST_CASE("example catalogue wiring") {
  const BuiltExample a = build_example("A", json{{"m", 0.5}, {"a", 1.5}});
  REQUIRE(a.analytic.has_value());
  CHECK(a.analytic->mean() == Approx(1.0));
  CHECK(a.fertility.eval(0.0) == Approx(1.0));
  CHECK(a.transmission.eval(2.0) == Approx(3.0));

  const BuiltExample sub = build_example("A", json{{"m", 0.5}, {"a", 0.5}});
  CHECK_FALSE(sub.analytic.has_value()); // contracting variant has no density limit

  const BuiltExample bc = build_example("B", json{{"case", "c"}});
  CHECK(bc.name == "B(c)");
  CHECK(bc.fertility.eval(1.0) == Approx(1.0)); // flat
  CHECK_THROWS_AS(build_example("B", json{{"case", "z"}}), ConfigError);

  const BuiltExample c = build_example("C", json{{"m", 1.0}, {"a", 2.0}});
  CHECK(c.preferred_scheme == GridScheme::LogSpaced);
  CHECK(c.default_initial.has_value());
  REQUIRE(c.analytic.has_value());
  CHECK(c.analytic->cdf(2.0) == Approx(0.5));

  CHECK_THROWS_AS(build_example("F", json::object()), ConfigError);
}

TEST_CASE("simulate scenario writes a complete bundle") {
  const std::string dir = fresh_dir("simulate");
  const RunManifest m = run_scenario(ScenarioConfig::parse(minimal_simulate_config()), dir);
  CHECK(m.exit_code == 0);
  CHECK(fs::exists(fs::path(dir) / "summary.json"));
  CHECK(fs::exists(fs::path(dir) / "manifest.json"));
  CHECK(fs::exists(fs::path(dir) / "figure_data.csv"));
  CHECK(fs::exists(fs::path(dir) / "snapshots" / "t000000.csv"));
  CHECK(fs::exists(fs::path(dir) / "snapshots" / "t000010.csv"));

  const json summary = parse_json_file((fs::path(dir) / "summary.json").string());
  CHECK(summary.at("mode") == "simulate");
  CHECK(summary.at("trajectory").at("generations") == 10);
  const json manifest = parse_json_file((fs::path(dir) / "manifest.json").string());
  CHECK(manifest.at("exit_code") == 0);
  CHECK(manifest.at("outputs").is_array());
  CHECK(manifest.at("config") == minimal_simulate_config());
}

TEST_CASE("example scenario reruns are byte-identical") {
  json j;
  j["mode"] = "example";
  j["example"] = {{"which", "A"}, {"params", {{"m", 0.5}, {"a", 1.5}}}};
  j["space"] = {{"lo", 0.0}, {"hi", "inf"}, {"grid_points", 257}};
  j["run"] = {{"max_generations", 25}, {"tol", 0.0}, {"snapshot_every", 5}};

  const std::string d1 = fresh_dir("example-a1");
  const std::string d2 = fresh_dir("example-a2");
  const RunManifest m1 = run_scenario(ScenarioConfig::parse(j), d1);
  const RunManifest m2 = run_scenario(ScenarioConfig::parse(j), d2);
  CHECK(m1.exit_code == 0);

  // analytic overlay exists for the expanding variant
  CHECK(fs::exists(fs::path(d1) / "analytic_overlay.csv"));

  for (const char* rel : {"summary.json", "figure_data.csv", "analytic_overlay.csv",
                          "snapshots/t000000.csv", "snapshots/t000025.csv"}) {
    INFO(rel);
    CHECK(slurp(fs::path(d1) / rel) == slurp(fs::path(d2) / rel));
  }
}

TEST_CASE("classify and steady scenarios settle the bounded catalogue") {
  const double c = 0.80001815914748097;
  json j;
  j["mode"] = "classify";
  j["space"] = {{"lo", -5.0}, {"hi", 5.0}, {"grid_points", 257}};
  j["fertility"] = FunctionSpec::skew_gauss_bump(-4.5, 2.0, 2.0, 1.0, {-5.0, 5.0}).to_json();
  j["transmission"] = FunctionSpec::tanh_shift(c, {-5.0, 5.0}).to_json();

  const std::string dir = fresh_dir("classify-sink");
  const RunManifest m = run_scenario(ScenarioConfig::parse(j), dir);
  CHECK(m.exit_code == 0);
  const json summary = parse_json_file((fs::path(dir) / "summary.json").string());
  CHECK(summary.at("verdict").at("kind") == "degenerate");
  CHECK(summary.at("verdict").at("atom_location").get<double>() == Approx(-5.0).margin(1e-6));
  CHECK(fs::exists(fs::path(dir) / "verdict.json"));

  j["mode"] = "steady";
  const std::string dir2 = fresh_dir("steady-sink");
  const RunManifest m2 = run_scenario(ScenarioConfig::parse(j), dir2);
  CHECK(m2.exit_code == 0);
  const std::string csv = slurp(fs::path(dir2) / "steady_state.csv");
  CHECK(csv.find("ATOM") != std::string::npos);

  // flat fertility ties the sinks: inconclusive, exit code 2
  j["mode"] = "classify";
  j["fertility"] = FunctionSpec::flat(1.0, {-5.0, 5.0}).to_json();
  const std::string dir3 = fresh_dir("classify-tie");
  const RunManifest m3 = run_scenario(ScenarioConfig::parse(j), dir3);
  CHECK(m3.exit_code == 2);
  const json s3 = parse_json_file((fs::path(dir3) / "summary.json").string());
  CHECK(s3.at("verdict").at("kind") == "inconclusive");
  CHECK_FALSE(s3.at("verdict").at("reasons").empty());
}

TEST_CASE("compare scenario orders a fertility drop") {
  json j;
  j["mode"] = "compare";
  j["space"] = {{"lo", 0.0}, {"hi", "inf"}, {"window_hi", 40.0}, {"grid_points", 257}};
  j["fertility"] = FunctionSpec::exp_decay(0.5, 1.0, {0.0, inf}).to_json();
  j["transmission"] = FunctionSpec::affine(1.5, 0.0, {0.0, inf}).to_json();
  j["compare"] = {{"fertility_b", FunctionSpec::exp_decay(0.4, 1.0, {0.0, inf}).to_json()}};
  j["run"] = {{"max_generations", 8}, {"snapshot_every", 1}};

  const std::string dir = fresh_dir("compare");
  const RunManifest m = run_scenario(ScenarioConfig::parse(j), dir);
  CHECK(m.exit_code == 0);
  CHECK(fs::exists(fs::path(dir) / "fosd.csv"));
  const json summary = parse_json_file((fs::path(dir) / "summary.json").string());
  // the flatter fertility profile (b) dominates every generation after t = 0
  CHECK(summary.at("fosd").at("final_relation") == "strictly_dominates");
  const json counts = summary.at("fosd").at("relation_counts");
  CHECK(counts.at("strictly_dominates").get<int>() == 8);
  CHECK(counts.at("equal").get<int>() == 1);
}

TEST_CASE("endogenous scenario records the co-evolving state") {
  json j;
  j["mode"] = "endogenous";
  j["endogenous"] = {{"alpha", 0.6}, {"beta", 0.6},  {"gamma", 0.3},
                     {"phi", 0.2},   {"theta", 2.5}, {"varrho", 0.0}};
  j["space"] = {{"lo", 1.0}, {"hi", "inf"}, {"grid_points", 257}};
  j["run"] = {{"max_generations", 5}, {"tol", 0.0}, {"snapshot_every", 1}};

  const std::string dir = fresh_dir("endo");
  const RunManifest m = run_scenario(ScenarioConfig::parse(j), dir);
  CHECK(m.exit_code == 0);
  const std::string csv = slurp(fs::path(dir) / "endo_state.csv");
  CHECK(csv.rfind("t,z_lo,z_bar,chi,mean_fertility", 0) == 0);
  const json summary = parse_json_file((fs::path(dir) / "summary.json").string());
  CHECK(summary.at("endogenous").at("expected_exponent").get<double>() == Approx(5.0));
  CHECK(summary.at("endogenous").at("interiority_ok") == true);
  CHECK(summary.at("endogenous").at("verdict").at("kind") == "atomless");

  // a config file on disk drives the same path end to end
  const std::string cfg_path = (fs::path(dir) / "config.json").string();
  {
    std::ofstream out(cfg_path, std::ios::binary);
    out << j.dump(2) << "\n";
  }
  const std::string dir2 = fresh_dir("endo-file");
  const RunManifest m2 = run_scenario_file(cfg_path, dir2);
  CHECK(m2.exit_code == 0);
}
