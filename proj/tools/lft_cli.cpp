#include <CLI11.hpp>
#include <iostream>

#include "lft/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"finite-volume transport experiments"};
  app.require_subcommand(1);

  std::string config, out = "out";
  int workers = lft::cli::default_workers();
  std::optional<uint64_t> seed_override;
  uint64_t seed_val = 0;

  CLI::App* run = app.add_subcommand("run", "run an experiment from a config");
  run->add_option("--config", config, "INI config file")->required();
  run->add_option("--out", out, "output directory");
  run->add_option("--workers", workers, "worker pool size");
  CLI::Option* so =
      run->add_option("--seed-override", seed_val, "replace the config seed");

  std::string vconfig;
  CLI::App* val = app.add_subcommand("validate", "report config diagnostics");
  val->add_option("--config", vconfig, "INI config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream dump;
    int code = app.exit(e, dump, dump);
    std::cerr << dump.str();
    return code == 0 ? 0 : 2;
  }

  if (run->parsed()) {
    if (so->count()) seed_override = seed_val;
    if (workers < 1) {
      std::cerr << "error: --workers must be >= 1\n";
      return 2;
    }
    return lft::cli::run_command(config, out, workers, seed_override, std::cout);
  }
  return lft::cli::validate_command(vconfig, std::cout);
}
