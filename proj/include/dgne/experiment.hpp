#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgne/config.hpp"
#include "dgne/cournot.hpp"
#include "dgne/oracle.hpp"
#include "dgne/splitting.hpp"

namespace dgne {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNoConvergence = 3, kExitMismatch = 4 };

/// Everything a run needs, derived deterministically from a config.
struct Setup {
  cournot::Instance instance;
  Game game;
  Graph graph;
  cournot::Constants constants;
  double rho_mu = 0.0;
  bool rho_mu_auto = false;
  StepSizes steps;
  std::vector<std::string> warnings;
};

/// Samples or loads the instance, builds the graph, resolves "auto" penalties
/// and sets margin-scaled step sizes. Config-level problems surface as ConfigError.
Setup prepare(const RunConfig& cfg);

struct Outcome {
  RunResult result;
  std::optional<OracleSolution> oracle;
  double wall_seconds = 0.0;
  int exit_code = kExitOk;
};

/// Runs the distributed method (with the oracle first when enabled), writes the
/// metrics CSV, summary JSON and optional checkpoint under cfg.output.dir.
/// Exit code is 0 iff the final point is certified, 3 otherwise.
Outcome run_experiment(const RunConfig& cfg, std::ostream& log);

nlohmann::json summary_json(const RunConfig& cfg, const Setup& setup, const Outcome& outcome);

/// Distributed run against the centralized oracle, plus the brute-force grid
/// when n <= 3. Prints an agreement table; returns 0, 3 or 4.
int verify(const RunConfig& cfg, std::ostream& out);

/// Prints eta, theta1, theta2, sigma1 and the sufficient rho_mu bound.
int print_constants(const RunConfig& cfg, std::ostream& out);

}  // namespace dgne
