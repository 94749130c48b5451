#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "tllarch/cli/commands.hpp"
#include "tllarch/serialization.hpp"

int main(int argc, char** argv) {
  using namespace tllarch::cli;
  CLI::App app{"Size, build, compile and audit two-level-lattice controller networks"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string out_dir = ".";
  app.add_option("--config", config_path, "JSON configuration file");
  auto* seed_opt = app.add_option("--seed", seed, "Probe seed (overrides the config)");
  app.add_option("--workers", workers, "Worker threads for probe work")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "Directory for reports and artifacts");

  std::string verify_which, audit_which;
  app.add_subcommand("size", "Budget formulas and architecture sizes");
  app.add_subcommand("grid", "Eta-grid and tiling statistics");
  app.add_subcommand("build", "Sample a controller oracle into an interpolant");
  app.add_subcommand("compile", "Compile an interpolant into a TLL network");
  app.add_subcommand("verify", "Check an interpolant or network")
      ->add_option("check", verify_which, "approx | lipschitz | continuity | tll-equiv | regions")
      ->required();
  app.add_subcommand("audit", "Closed-loop audits")
      ->add_option("check", audit_which, "invariance | gronwall | sysid")
      ->required();
  app.add_subcommand("ads-check", "Abstract-disturbance simulation between two transition systems");
  app.add_subcommand("sysid", "Fit a TLL surrogate of a model's vector field");
  app.add_subcommand("export", "Expand a network into dense ReLU layers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  RunOptions options;
  options.workers = workers;
  options.out_dir = out_dir;
  if (*seed_opt) options.seed = seed;
  if (!config_path.empty()) {
    try {
      options.config = tllarch::read_json_file(config_path);
    } catch (const tllarch::Error& e) {
      std::cerr << e.what() << '\n';
      return kConfigError;
    }
  }

  const auto* sub = app.get_subcommands().front();
  const std::string& name = sub->get_name();
  const std::string which = name == "verify" ? verify_which : name == "audit" ? audit_which : "";
  return run_and_report(name, which, options, std::cerr);
}
