// Command-line front end: one subcommand per experiment family.
//
//   cutoff <constants|profile|fp|mc|doublewell|compare> --config PATH [--out DIR] [--seed N] [--force]
//
// Exit codes: 0 success, 1 validation error, 2 engine error.
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cutoff/error.hpp"
#include "cutoff/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Profile cut-off experiments for small-noise gradient diffusions"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", std::string(CUTOFF_VERSION));

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool force = false;

  const char* names[] = {"constants", "profile", "fp", "mc", "doublewell", "compare"};
  const char* help[] = {"semiflow limit constants",
                        "linearized or first-order profile curves",
                        "Fokker-Planck distance curves",
                        "ensembles and pathwise bound checks",
                        "local cut-off near a metastable well",
                        "engine triangulation"};
  for (int i = 0; i < 6; ++i) {
    auto* sub = app.add_subcommand(names[i], help[i]);
    sub->add_option("--config", config_path, "experiment config (YAML)")->required();
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
    sub->add_option("--seed", seed, "seed for the ensemble engine (overrides the config)");
    sub->add_flag("--force", force, "overwrite existing outputs");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const auto command = cutoff::parse_command(app.get_subcommands().front()->get_name());
    const auto config = cutoff::load_config(config_path, seed);
    const auto manifest = cutoff::run(config, command, {out_dir, force});
    std::cout << manifest.command << " done, config " << manifest.config_hash << ", "
              << manifest.outputs.size() << " file(s)\n";
    for (const auto& w : manifest.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& e : manifest.errors) std::cerr << "engine error: " << e << "\n";
    return manifest.status;
  } catch (const cutoff::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const cutoff::EngineError& e) {
    std::cerr << "engine error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "engine error: " << e.what() << "\n";
    return 2;
  }
}
