#include "dgne/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dgne/errors.hpp"

namespace dgne::io {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_metrics(std::ostream& out, const std::vector<MetricsRecord>& trajectory) {
  out << kMetricsHeader << '\n';
  for (const auto& r : trajectory) {
    out << r.iter;
    for (double v : {r.avg_norm_dist, r.rel_step, r.y_consensus, r.lambda_consensus, r.kkt_stationarity,
                     r.kkt_primal, r.kkt_dual, r.kkt_compl}) {
      out << ',' << format_double(v);
    }
    out << '\n';
  }
}

void write_metrics(const std::filesystem::path& path, const std::vector<MetricsRecord>& trajectory) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_metrics(out, trajectory);
  if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kMetricsHeader) throw std::runtime_error(path.string() + ": unexpected header");
  std::vector<MetricsRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) throw std::runtime_error(path.string() + ": row with wrong column count");
    MetricsRecord r;
    r.iter = std::stoull(cells[0]);
    double* fields[] = {&r.avg_norm_dist, &r.rel_step, &r.y_consensus, &r.lambda_consensus,
                        &r.kkt_stationarity, &r.kkt_primal, &r.kkt_dual, &r.kkt_compl};
    for (int k = 0; k < 8; ++k) *fields[k] = std::strtod(cells[static_cast<std::size_t>(k + 1)].c_str(), nullptr);
    out.push_back(r);
  }
  return out;
}

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xffu);
  out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in, const std::string& where) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw ConfigError(where + ": checkpoint truncated");
  std::uint64_t v = 0;
  for (int k = 7; k >= 0; --k) v = (v << 8) | b[k];
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Game& game, const Graph& graph,
                     const AugmentedState& shadow) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kCheckpointMagic, 8);
  put_u64(out, game.num_players());
  put_u64(out, graph.num_edges());
  put_u64(out, static_cast<std::uint64_t>(game.num_constraints()));
  for (std::size_t i = 0; i < game.num_players(); ++i) put_u64(out, static_cast<std::uint64_t>(game.player_dim(i)));
  const Eigen::VectorXd flat = shadow.flatten();
  for (Eigen::Index k = 0; k < flat.size(); ++k) put_u64(out, std::bit_cast<std::uint64_t>(flat(k)));
  if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

AugmentedState load_checkpoint(const std::filesystem::path& path, const Game& game, const Graph& graph) {
  const std::string where = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(where + ": cannot open checkpoint");
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw ConfigError(where + ": not a checkpoint file");
  }
  auto expect = [&](std::uint64_t got, std::uint64_t want, const char* what) {
    if (got != want) {
      throw ConfigError(where + ": checkpoint " + what + " is " + std::to_string(got) + ", run expects " +
                        std::to_string(want));
    }
  };
  expect(get_u64(in, where), game.num_players(), "player count");
  expect(get_u64(in, where), graph.num_edges(), "edge count");
  expect(get_u64(in, where), static_cast<std::uint64_t>(game.num_constraints()), "constraint count");
  for (std::size_t i = 0; i < game.num_players(); ++i) {
    expect(get_u64(in, where), static_cast<std::uint64_t>(game.player_dim(i)), "player dimension");
  }
  Eigen::VectorXd flat(AugmentedState::zeros(game, graph).size());
  for (Eigen::Index k = 0; k < flat.size(); ++k) flat(k) = std::bit_cast<double>(get_u64(in, where));
  if (in.peek() != std::char_traits<char>::eof()) throw ConfigError(where + ": trailing bytes in checkpoint");
  return AugmentedState::unflatten(game, graph, flat);
}

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd vec_field(const nlohmann::json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
  const auto& a = j.at(key);
  if (!a.is_array()) throw ConfigError(where + "/" + key + ": expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!a[k].is_number()) throw ConfigError(where + "/" + key + "/" + std::to_string(k) + ": expected a number");
    v(static_cast<Eigen::Index>(k)) = a[k].get<double>();
  }
  return v;
}

}  // namespace

nlohmann::json instance_to_json(const cournot::Instance& inst) {
  nlohmann::json j;
  j["price_intercept"] = to_vec(inst.price_intercept);
  j["price_slope"] = to_vec(inst.price_slope);
  j["capacity"] = to_vec(inst.capacity);
  j["firms"] = nlohmann::json::array();
  for (const auto& f : inst.firms) {
    std::vector<std::size_t> markets;
    for (std::size_t k : f.markets) markets.push_back(k + 1);
    j["firms"].push_back({{"markets", markets},
                          {"cost_quadratic", to_vec(f.cost_quadratic)},
                          {"cost_linear", to_vec(f.cost_linear)},
                          {"production_cap", to_vec(f.production_cap)}});
  }
  return j;
}

cournot::Instance instance_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  cournot::Instance inst;
  inst.price_intercept = vec_field(j, "price_intercept", where);
  inst.price_slope = vec_field(j, "price_slope", where);
  inst.capacity = vec_field(j, "capacity", where);
  if (!j.contains("firms") || !j.at("firms").is_array()) throw ConfigError(where + "/firms: expected an array");
  const auto& firms = j.at("firms");
  for (std::size_t i = 0; i < firms.size(); ++i) {
    const std::string at = where + "/firms/" + std::to_string(i);
    const auto& fj = firms[i];
    if (!fj.is_object()) throw ConfigError(at + ": expected an object");
    cournot::Firm f;
    const Eigen::VectorXd markets = vec_field(fj, "markets", at);
    for (Eigen::Index k = 0; k < markets.size(); ++k) {
      const double v = markets(k);
      if (v < 1.0 || v != std::floor(v)) {
        throw ConfigError(at + "/markets/" + std::to_string(k) + ": markets are 1-based integers");
      }
      f.markets.push_back(static_cast<std::size_t>(v) - 1);
    }
    f.cost_quadratic = vec_field(fj, "cost_quadratic", at);
    f.cost_linear = vec_field(fj, "cost_linear", at);
    f.production_cap = vec_field(fj, "production_cap", at);
    inst.firms.push_back(std::move(f));
  }
  try {
    cournot::validate(inst);
  } catch (const InvalidGame& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return inst;
}

}  // namespace dgne::io
