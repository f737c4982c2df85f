#include "dgne/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dgne/errors.hpp"
#include "dgne/io.hpp"

namespace dgne {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> known) {
  std::set<std::string> allowed(known.begin(), known.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError(where + "/" + it.key() + ": unknown field");
  }
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(where + ": must be finite");
  return v;
}

double positive(const json& j, const std::string& where) {
  const double v = number(j, where);
  if (!(v > 0.0)) throw ConfigError(where + ": must be positive");
  return v;
}

std::uint64_t count(const json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    throw ConfigError(where + ": expected a nonnegative integer");
  }
  return j.get<std::uint64_t>();
}

cournot::Interval interval(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(where + ": expected [lo, hi]");
  cournot::Interval iv{number(j[0], where + "/0"), number(j[1], where + "/1")};
  if (iv.lo > iv.hi) throw ConfigError(where + ": lower bound above upper bound");
  return iv;
}

void parse_game(const json& g, const std::filesystem::path& base, RunConfig& cfg) {
  const std::string where = "/game";
  if (!g.is_object()) throw ConfigError(where + ": expected an object");
  const std::string type = g.value("type", "cournot");
  if (type == "cournot") {
    reject_unknown(g, where, {"type", "num_players", "num_markets", "markets_per_player", "capacity",
                              "price_intercept", "price_slope", "cost_quadratic", "cost_linear",
                              "production_cap"});
    cournot::SamplingParams p;
    if (g.contains("num_players")) p.num_players = count(g["num_players"], where + "/num_players");
    if (g.contains("num_markets")) p.num_markets = count(g["num_markets"], where + "/num_markets");
    if (g.contains("markets_per_player")) {
      const auto& r = g["markets_per_player"];
      if (!r.is_array() || r.size() != 2) throw ConfigError(where + "/markets_per_player: expected [min, max]");
      p.min_markets_per_player = count(r[0], where + "/markets_per_player/0");
      p.max_markets_per_player = count(r[1], where + "/markets_per_player/1");
    }
    if (p.num_players == 0) throw ConfigError(where + "/num_players: must be at least 1");
    if (p.num_markets == 0) throw ConfigError(where + "/num_markets: must be at least 1");
    if (p.min_markets_per_player == 0 || p.min_markets_per_player > p.max_markets_per_player ||
        p.max_markets_per_player > p.num_markets) {
      throw ConfigError(where + "/markets_per_player: need 1 <= min <= max <= num_markets");
    }
    const std::pair<const char*, cournot::Interval*> ivs[] = {
        {"capacity", &p.capacity},         {"price_intercept", &p.price_intercept},
        {"price_slope", &p.price_slope},   {"cost_quadratic", &p.cost_quadratic},
        {"cost_linear", &p.cost_linear},   {"production_cap", &p.production_cap}};
    for (const auto& [key, dst] : ivs) {
      if (g.contains(key)) *dst = interval(g[key], where + "/" + key);
    }
    cfg.sampler = p;
  } else if (type == "instance") {
    reject_unknown(g, where, {"type", "file", "instance"});
    if (g.contains("instance") == g.contains("file")) {
      throw ConfigError(where + ": give exactly one of 'file' and 'instance'");
    }
    if (g.contains("instance")) {
      cfg.instance = io::instance_from_json(g["instance"], where + "/instance");
    } else {
      if (!g["file"].is_string()) throw ConfigError(where + "/file: expected a path");
      const std::filesystem::path p = base / g["file"].get<std::string>();
      std::ifstream in(p);
      if (!in) throw ConfigError(where + "/file: cannot open " + p.string());
      json inst;
      try {
        inst = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ConfigError(p.string() + ": " + e.what());
      }
      cfg.instance = io::instance_from_json(inst, p.string());
    }
  } else {
    throw ConfigError(where + "/type: expected 'cournot' or 'instance'");
  }
}

void parse_graph(const json& g, RunConfig& cfg) {
  const std::string where = "/graph";
  if (!g.is_object()) throw ConfigError(where + ": expected an object");
  reject_unknown(g, where, {"num_nodes", "edges", "cycle_plus", "seed"});
  if (g.contains("edges")) {
    if (g.contains("cycle_plus") || g.contains("seed")) {
      throw ConfigError(where + ": 'edges' cannot be combined with 'cycle_plus' or 'seed'");
    }
    if (!g.contains("num_nodes")) throw ConfigError(where + "/num_nodes: required with 'edges'");
    cfg.graph.num_nodes = count(g["num_nodes"], where + "/num_nodes");
    const auto& es = g["edges"];
    if (!es.is_array()) throw ConfigError(where + "/edges: expected an array of [tail, head] pairs");
    std::vector<Edge> edges;
    for (std::size_t k = 0; k < es.size(); ++k) {
      const std::string at = where + "/edges/" + std::to_string(k);
      if (!es[k].is_array() || es[k].size() != 2) throw ConfigError(at + ": expected [tail, head]");
      const std::uint64_t t = count(es[k][0], at + "/0");
      const std::uint64_t h = count(es[k][1], at + "/1");
      if (t < 1 || h < 1 || t > cfg.graph.num_nodes || h > cfg.graph.num_nodes) {
        throw ConfigError(at + ": nodes are numbered 1.." + std::to_string(cfg.graph.num_nodes));
      }
      edges.push_back({static_cast<std::size_t>(t - 1), static_cast<std::size_t>(h - 1)});
    }
    cfg.graph.edges = std::move(edges);
  } else {
    if (g.contains("num_nodes")) throw ConfigError(where + "/num_nodes: only valid with 'edges'");
    if (g.contains("cycle_plus")) cfg.graph.cycle_plus = count(g["cycle_plus"], where + "/cycle_plus");
    if (g.contains("seed")) cfg.graph.seed = count(g["seed"], where + "/seed");
  }
}

BSplit parse_split(const json& j) {
  const std::string where = "/b_split";
  if (j.is_string()) {
    if (j == "uniform") return BSplit::uniform();
    if (j == "first_player") return BSplit::first_player();
    throw ConfigError(where + ": expected 'uniform', 'first_player' or a list of vectors");
  }
  if (!j.is_array()) throw ConfigError(where + ": expected 'uniform', 'first_player' or a list of vectors");
  std::vector<Eigen::VectorXd> parts;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string at = where + "/" + std::to_string(i);
    if (!j[i].is_array()) throw ConfigError(at + ": expected an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j[i].size()));
    for (std::size_t k = 0; k < j[i].size(); ++k) {
      v(static_cast<Eigen::Index>(k)) = number(j[i][k], at + "/" + std::to_string(k));
    }
    parts.push_back(v);
  }
  return BSplit::from_list(std::move(parts));
}

}  // namespace

RunConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("/: expected a JSON object");
  reject_unknown(j, "", {"game", "graph", "mode", "rho_mu", "rho_z", "margin", "gamma", "max_iters",
                         "stop_tol", "cert_tol", "certify_tol", "seed", "workers", "b_split", "oracle",
                         "oracle_tol", "agreement_tol", "grid_step", "output", "resume"});
  RunConfig cfg;
  if (j.contains("seed")) cfg.seed = count(j["seed"], "/seed");
  if (j.contains("game")) {
    parse_game(j["game"], base_dir, cfg);
  } else {
    cfg.sampler = cournot::SamplingParams{};
  }
  if (j.contains("graph")) parse_graph(j["graph"], cfg);

  if (j.contains("mode")) {
    const auto& m = j["mode"];
    if (m == "A" || m == "AssumptionA") cfg.mode = Mode::AssumptionA;
    else if (m == "B" || m == "AssumptionB") cfg.mode = Mode::AssumptionB;
    else throw ConfigError("/mode: expected 'A' or 'B'");
  }
  cfg.dr.mode = cfg.mode;
  if (j.contains("rho_mu")) {
    if (j["rho_mu"] == "auto") cfg.rho_mu.reset();
    else cfg.rho_mu = positive(j["rho_mu"], "/rho_mu");
  }
  if (j.contains("rho_z")) {
    if (j["rho_z"] != "auto") cfg.rho_z = positive(j["rho_z"], "/rho_z");
  }
  if (j.contains("margin")) cfg.margin = positive(j["margin"], "/margin");
  if (j.contains("gamma")) {
    cfg.dr.gamma = number(j["gamma"], "/gamma");
    if (!(cfg.dr.gamma > 0.0 && cfg.dr.gamma < 1.0)) throw ConfigError("/gamma: must lie in (0, 1)");
  }
  if (j.contains("max_iters")) cfg.dr.max_iters = count(j["max_iters"], "/max_iters");
  if (j.contains("stop_tol")) cfg.dr.stop_tol = number(j["stop_tol"], "/stop_tol");
  if (j.contains("cert_tol")) cfg.dr.cert_tol = number(j["cert_tol"], "/cert_tol");
  if (j.contains("certify_tol")) cfg.dr.certify_tol = positive(j["certify_tol"], "/certify_tol");
  if (cfg.dr.stop_tol < 0.0) throw ConfigError("/stop_tol: must be nonnegative");
  if (cfg.dr.cert_tol < 0.0) throw ConfigError("/cert_tol: must be nonnegative");
  if (j.contains("workers")) cfg.dr.workers = count(j["workers"], "/workers");
  if (j.contains("b_split")) cfg.b_split = parse_split(j["b_split"]);
  if (j.contains("oracle")) {
    if (!j["oracle"].is_boolean()) throw ConfigError("/oracle: expected true or false");
    cfg.oracle = j["oracle"].get<bool>();
  }
  if (j.contains("oracle_tol")) cfg.oracle_tol = positive(j["oracle_tol"], "/oracle_tol");
  if (j.contains("agreement_tol")) cfg.agreement_tol = positive(j["agreement_tol"], "/agreement_tol");
  if (j.contains("grid_step")) cfg.grid_step = positive(j["grid_step"], "/grid_step");
  if (j.contains("output")) {
    const auto& o = j["output"];
    if (!o.is_object()) throw ConfigError("/output: expected an object");
    reject_unknown(o, "/output", {"dir", "metrics", "summary", "checkpoint"});
    auto str = [&](const char* key, std::string& dst) {
      if (!o.contains(key)) return;
      if (!o[key].is_string()) throw ConfigError(std::string("/output/") + key + ": expected a string");
      dst = o[key].get<std::string>();
    };
    std::string dir = cfg.output.dir.string();
    str("dir", dir);
    cfg.output.dir = base_dir / dir;
    str("metrics", cfg.output.metrics);
    str("summary", cfg.output.summary);
    str("checkpoint", cfg.output.checkpoint);
  } else {
    cfg.output.dir = base_dir / cfg.output.dir;
  }
  if (j.contains("resume")) {
    if (!j["resume"].is_string()) throw ConfigError("/resume: expected a path");
    cfg.resume = base_dir / j["resume"].get<std::string>();
    if (!std::filesystem::exists(cfg.resume)) {
      throw ConfigError("/resume: checkpoint " + cfg.resume.string() + " does not exist");
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": JSON syntax error: " + e.what());
  }
  try {
    return parse_config(j, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace dgne
