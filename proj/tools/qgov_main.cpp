#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <stdexcept>
#include <string>

#include "qgov/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "qgov: distillation-pulse synthesis and the cyclic noise-suppression "
      "protocol on a four-level system"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string field_path;
  std::string scenario;
  std::uint64_t seed = 0;
  int table = 2;

  auto* opt = app.add_subcommand("optimize", "Synthesize a distillation pulse");
  opt->add_option("--config", config_path, "key=value config file")->required();
  opt->add_option("--out", out_path, "output field file")->required();

  auto* run = app.add_subcommand("run", "Run the governor protocol");
  run->add_option("--config", config_path, "key=value config file")->required();
  run->add_option("--field", field_path, "optimized field file");
  run->add_option("--scenario", scenario, "scenario name (overrides config)");
  auto* seed_opt = run->add_option("--seed", seed, "noise seed (overrides config)");
  run->add_option("--out", out_path, "output series file")->required();

  auto* rep = app.add_subcommand("reproduce", "Reproduce the published tables");
  rep->add_option("--table", table, "table number")
      ->check(CLI::IsMember({2, 3}))
      ->required();
  rep->add_option("--config", config_path, "key=value config file")->required();
  rep->add_option("--outdir", out_path, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;
  }

  try {
    const qgov::RunConfig config = qgov::load_config(config_path);
    if (opt->parsed()) return qgov::cmd_optimize(config, out_path, std::cout);
    if (run->parsed()) {
      const std::uint64_t use_seed = seed_opt->count() ? seed : config.seed;
      return qgov::cmd_run(config, field_path, scenario, use_seed, out_path,
                           std::cout);
    }
    return qgov::cmd_reproduce(table, config, out_path, std::cout);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
}
