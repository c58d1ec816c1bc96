// capflow: scenario-driven CLI for the capital-transmission engine.
//
// Subcommands select the execution mode declared in the JSON config; the
// config is authoritative for all model content. Exit codes: 0 success,
// 2 inconclusive verdict, 1 error.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "capflow/runner.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string out = "out";
  std::optional<int> grid_points;
  std::optional<int> max_gen;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "Scenario config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out, "Output directory (created if missing)");
  cmd->add_option("--grid-points", args.grid_points, "Override space.grid_points");
  cmd->add_option("--max-gen", args.max_gen, "Override run.max_generations");
  cmd->add_flag("--quiet", args.quiet, "Suppress the completion summary line");
}

int run_mode(capflow::Mode mode, const CommonArgs& args) {
  capflow::ScenarioConfig cfg = capflow::ScenarioConfig::parse_file(args.config);
  if (cfg.mode != mode) {
    throw capflow::ConfigError(std::string("config declares mode \"") +
                               capflow::mode_name(cfg.mode) +
                               "\" but the subcommand is \"" + capflow::mode_name(mode) +
                               "\"");
  }
  capflow::CliOverrides over;
  over.grid_points = args.grid_points;
  over.max_generations = args.max_gen;
  over.quiet = args.quiet;
  capflow::RunManifest manifest = capflow::run_scenario(cfg, args.out, over);
  if (!args.quiet) {
    std::printf("capflow %s: wrote %s (exit %d)\n", capflow::mode_name(mode),
                manifest.out_dir.c_str(), manifest.exit_code);
  }
  return manifest.exit_code;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"capflow: deterministic capital-transmission dynamics engine"};
  app.require_subcommand(1);

  struct Entry {
    const char* name;
    const char* help;
    capflow::Mode mode;
  };
  const Entry entries[] = {
      {"simulate", "Iterate the density recursion and export the trajectory",
       capflow::Mode::Simulate},
      {"classify", "Check the long-run conditions and name the steady state",
       capflow::Mode::Classify},
      {"steady", "Compute the steady state selected by the leading fixed point",
       capflow::Mode::Steady},
      {"compare", "Run two variants and report per-generation dominance",
       capflow::Mode::Compare},
      {"endogenous", "Run the endogenous-fertility growth model", capflow::Mode::Endogenous},
      {"example", "Run a catalogue example with its analytic overlay",
       capflow::Mode::Example},
  };

  CommonArgs args[std::size(entries)];
  CLI::App* cmds[std::size(entries)];
  for (std::size_t i = 0; i < std::size(entries); ++i) {
    cmds[i] = app.add_subcommand(entries[i].name, entries[i].help);
    add_common(cmds[i], args[i]);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    for (std::size_t i = 0; i < std::size(entries); ++i) {
      if (cmds[i]->parsed()) return run_mode(entries[i].mode, args[i]);
    }
    std::fprintf(stderr, "capflow: no subcommand selected\n");
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "capflow: error: %s\n", e.what());
    return 1;
  }
}
