// dgne: run, verify and inspect distributed v-GNE experiments.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dgne/config.hpp"
#include "dgne/errors.hpp"
#include "dgne/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Distributed Douglas-Rachford v-GNE seeking on Nash-Cournot games"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string mode;
  std::size_t max_iters = 0;
  std::size_t workers = 0;

  auto* run_cmd = app.add_subcommand("run", "run the distributed method and write metrics");
  run_cmd->add_option("config", config_path, "JSON run config")->required()->check(CLI::ExistingFile);
  auto* out_opt = run_cmd->add_option("--out", out_dir, "output directory");
  auto* seed_opt = run_cmd->add_option("--seed", seed, "instance and graph seed");
  auto* mode_opt = run_cmd->add_option("--mode", mode, "A or B")->check(CLI::IsMember({"A", "B"}));
  auto* iters_opt = run_cmd->add_option("--max-iters", max_iters, "iteration cap");
  auto* workers_opt = run_cmd->add_option("--workers", workers, "worker threads, 0 = sequential");

  auto* verify_cmd = app.add_subcommand("verify", "compare against the centralized and grid oracles");
  verify_cmd->add_option("config", config_path, "JSON run config")->required()->check(CLI::ExistingFile);

  auto* const_cmd = app.add_subcommand("constants", "print eta, theta1, theta2, sigma1 and the rho_mu bound");
  const_cmd->add_option("config", config_path, "JSON run config")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : dgne::kExitConfig;
  }

  try {
    dgne::RunConfig cfg = dgne::load_config(config_path);
    if (*run_cmd) {
      if (*out_opt) cfg.output.dir = out_dir;
      if (*seed_opt) cfg.seed = seed;
      if (*mode_opt) cfg.mode = cfg.dr.mode = mode == "A" ? dgne::Mode::AssumptionA : dgne::Mode::AssumptionB;
      if (*iters_opt) cfg.dr.max_iters = max_iters;
      if (*workers_opt) cfg.dr.workers = workers;
      return dgne::run_experiment(cfg, std::cerr).exit_code;
    }
    if (*verify_cmd) return dgne::verify(cfg, std::cout);
    return dgne::print_constants(cfg, std::cout);
  } catch (const dgne::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return dgne::kExitConfig;
  } catch (const dgne::NoConvergence& e) {
    std::cerr << "no convergence: " << e.what() << '\n';
    return dgne::kExitNoConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
