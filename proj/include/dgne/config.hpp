#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgne/cournot.hpp"
#include "dgne/game.hpp"
#include "dgne/graph.hpp"
#include "dgne/splitting.hpp"

namespace dgne {

struct GraphSource {
  // Explicit edge list (stored 0-based), or a seeded directed cycle plus
  // `cycle_plus` random extra edges over the game's players (default: 10, or
  // as many as fit on small graphs).
  std::optional<std::vector<Edge>> edges;
  std::size_t num_nodes = 0;
  std::optional<std::size_t> cycle_plus;
  std::optional<std::uint64_t> seed;  // defaults to the run seed
};

struct OutputPaths {
  std::filesystem::path dir = "out";
  std::string metrics = "metrics.csv";
  std::string summary = "summary.json";
  std::string checkpoint;  // empty: no checkpoint written
};

struct RunConfig {
  std::optional<cournot::SamplingParams> sampler;  // set unless an instance is given
  std::optional<cournot::Instance> instance;
  GraphSource graph;
  Mode mode = Mode::AssumptionB;
  std::optional<double> rho_mu;  // nullopt: "auto"
  double rho_z = 1.0;
  double margin = 0.05;
  DRConfig dr;
  std::uint64_t seed = 1;
  BSplit b_split;
  bool oracle = true;
  double oracle_tol = 1e-8;
  double agreement_tol = 1e-4;  // verify: relative distance DR vs oracle
  double grid_step = 1e-6;      // verify: brute-force resolution
  OutputPaths output;
  std::filesystem::path resume;  // empty: start from zeros
};

/// Parses a config document. `base_dir` resolves relative file references.
/// Throws ConfigError with a JSON-pointer-like field path on bad input.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

/// Reads and parses a config file; syntax errors report line and column.
RunConfig load_config(const std::filesystem::path& path);

}  // namespace dgne
