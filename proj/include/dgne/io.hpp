#pragma once

// Serialization used by the command-line driver: metrics CSV, the binary
// checkpoint of the governing sequence, and Cournot instances as JSON.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgne/cournot.hpp"
#include "dgne/game.hpp"
#include "dgne/graph.hpp"
#include "dgne/splitting.hpp"

namespace dgne::io {

inline constexpr const char* kMetricsHeader =
    "iter,avg_norm_dist,rel_step,y_consensus,lambda_consensus,kkt_stationarity,kkt_primal,kkt_dual,"
    "kkt_compl";

/// Shortest-safe round-trip text: 17 significant digits, "nan" for NaN.
std::string format_double(double v);

void write_metrics(std::ostream& out, const std::vector<MetricsRecord>& trajectory);
void write_metrics(const std::filesystem::path& path, const std::vector<MetricsRecord>& trajectory);
/// Inverse of write_metrics; t_residual is not stored and reads back as 0.
std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path);

inline constexpr char kCheckpointMagic[8] = {'D', 'G', 'N', 'E', 'C', 'K', 'P', '1'};

/// Little-endian layout: magic, u64 N, u64 E, u64 m, N x u64 n_i, then the
/// flattened state as f64.
void save_checkpoint(const std::filesystem::path& path, const Game& game, const Graph& graph,
                     const AugmentedState& shadow);
/// Throws ConfigError when the file is malformed or its shape differs from (game, graph).
AugmentedState load_checkpoint(const std::filesystem::path& path, const Game& game, const Graph& graph);

/// Markets are written 1-based.
nlohmann::json instance_to_json(const cournot::Instance& inst);
/// Throws ConfigError naming the offending field.
cournot::Instance instance_from_json(const nlohmann::json& j, const std::string& where = "instance");

}  // namespace dgne::io
