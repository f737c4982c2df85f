#include "dgne/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>

#include "dgne/errors.hpp"
#include "dgne/io.hpp"

namespace dgne {

namespace {

Graph make_graph(const RunConfig& cfg, std::size_t num_players) {
  try {
    if (cfg.graph.edges) {
      if (cfg.graph.num_nodes != num_players) {
        throw ConfigError("/graph/num_nodes: graph has " + std::to_string(cfg.graph.num_nodes) +
                          " nodes but the game has " + std::to_string(num_players) + " players");
      }
      return build_graph(num_players, *cfg.graph.edges);
    }
    if (num_players == 1) return build_graph(1, {});
    const std::size_t room = num_players * (num_players - 1) - num_players;
    const std::size_t extra = cfg.graph.cycle_plus.value_or(std::min<std::size_t>(10, room));
    return random_experiment_graph(cfg.graph.seed.value_or(cfg.seed), num_players, extra);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("/graph: ") + e.what());
  }
}

double mean_norm_distance(const AugmentedState& omega, const Eigen::VectorXd& ref) {
  double acc = 0.0;
  for (const auto& y : omega.y) acc += (y - ref).norm() / ref.norm();
  return acc / static_cast<double>(omega.y.size());
}

nlohmann::json metrics_json(const MetricsRecord& r) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isnan(v)) return nullptr;
    return v;
  };
  return {{"iter", r.iter},
          {"avg_norm_dist", num(r.avg_norm_dist)},
          {"rel_step", num(r.rel_step)},
          {"y_consensus", num(r.y_consensus)},
          {"lambda_consensus", num(r.lambda_consensus)},
          {"kkt_stationarity", num(r.kkt_stationarity)},
          {"kkt_primal", num(r.kkt_primal)},
          {"kkt_dual", num(r.kkt_dual)},
          {"kkt_compl", num(r.kkt_compl)},
          {"t_residual", num(r.t_residual)}};
}

}  // namespace

Setup prepare(const RunConfig& cfg) {
  cournot::Instance inst;
  if (cfg.instance) {
    inst = *cfg.instance;
  } else {
    try {
      inst = cournot::sample_instance(cfg.seed, cfg.sampler.value_or(cournot::SamplingParams{}));
    } catch (const InvalidInterval& e) {
      throw ConfigError(std::string("/game: ") + e.what());
    }
  }
  std::optional<Game> game;
  try {
    game.emplace(cournot::make_game(inst, cfg.b_split));
  } catch (const Error& e) {
    throw ConfigError(std::string("/b_split: ") + e.what());
  }
  Graph graph = make_graph(cfg, inst.num_players());
  const cournot::Constants c = cournot::constants(inst, graph);

  std::vector<std::string> warnings;
  double rho = 0.0;
  const bool rho_auto = !cfg.rho_mu.has_value();
  if (cfg.mode == Mode::AssumptionA) {
    rho = rho_auto ? cournot::assumption_a_rho(*game, graph) : *cfg.rho_mu;
    if (!rho_auto && !cournot::assumption_a_holds(*game, graph, rho)) {
      warnings.push_back("rho_mu = " + io::format_double(rho) +
                         " does not make the extended pseudogradient plus consensus term monotone");
    }
  } else {
    if (rho_auto) {
      if (!std::isfinite(c.rho_mu_bound)) {
        throw ConfigError("/rho_mu: the graph has no algebraic connectivity, so 'auto' has no finite bound");
      }
      rho = c.rho_mu_bound;
    } else {
      rho = *cfg.rho_mu;
      if (rho < c.rho_mu_bound) {
        warnings.push_back("rho_mu = " + io::format_double(rho) + " is below the sufficient bound " +
                           io::format_double(c.rho_mu_bound) + "; proceeding");
      }
    }
  }
  StepSizes steps = lemma1_step_sizes(*game, graph, rho, cfg.rho_z, cfg.margin);
  return Setup{std::move(inst), std::move(*game), std::move(graph), c, rho, rho_auto, std::move(steps),
               std::move(warnings)};
}

nlohmann::json summary_json(const RunConfig& cfg, const Setup& setup, const Outcome& outcome) {
  const RunResult& r = outcome.result;
  nlohmann::json j;
  j["status"] = r.status == RunStatus::Converged ? "converged" : "max_iters_exceeded";
  j["certified"] = r.certified;
  j["certificate"] = r.certificate;
  j["iterations"] = r.iterations;
  j["final"] = metrics_json(r.trajectory.back());
  j["constants"] = {{"eta", setup.constants.eta},
                    {"theta1", setup.constants.theta1},
                    {"theta2", setup.constants.theta2},
                    {"sigma1", setup.constants.sigma1},
                    {"rho_mu_bound", setup.constants.rho_mu_bound}};
  j["mode"] = cfg.mode == Mode::AssumptionA ? "A" : "B";
  j["rho_mu"] = setup.rho_mu;
  j["rho_mu_auto"] = setup.rho_mu_auto;
  j["rho_z"] = setup.steps.rho_z;
  j["margin"] = cfg.margin;
  j["gamma"] = cfg.dr.gamma;
  j["seed"] = cfg.seed;
  j["num_players"] = setup.game.num_players();
  j["num_constraints"] = setup.game.num_constraints();
  j["dim"] = setup.game.dim();
  j["num_edges"] = setup.graph.num_edges();
  j["tau1_range"] = {setup.steps.tau1.minCoeff(), setup.steps.tau1.maxCoeff()};
  j["tau2_range"] = {setup.steps.tau2.minCoeff(), setup.steps.tau2.maxCoeff()};
  j["wall_time_s"] = outcome.wall_seconds;
  j["warnings"] = setup.warnings;
  j["normalized_distance"] =
      "avg_norm_dist = (1/N) sum_j ||y_j - x*|| / ||x*||, x* from the centralized oracle";
  j["rel_step"] = "||w~(k) - w~(k-1)|| / (||w~(k-1)|| + 1)";
  if (outcome.oracle) {
    j["oracle"] = {{"iterations", outcome.oracle->iterations},
                   {"kkt_max", outcome.oracle->certificate.max()},
                   {"x_star", std::vector<double>(outcome.oracle->x_star.data(),
                                                  outcome.oracle->x_star.data() + outcome.oracle->x_star.size())}};
  } else {
    j["oracle"] = nullptr;
  }
  return j;
}

Outcome run_experiment(const RunConfig& cfg, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const Setup setup = prepare(cfg);
  for (const auto& w : setup.warnings) log << "warning: " << w << '\n';

  Outcome outcome;
  RunOptions options;
  if (cfg.oracle) {
    outcome.oracle = centralized_vgne(setup.game, default_oracle_step(setup.game), cfg.oracle_tol);
    options.reference = outcome.oracle->x_star;
  }
  const AugmentedState initial = cfg.resume.empty() ? AugmentedState::zeros(setup.game, setup.graph)
                                                    : io::load_checkpoint(cfg.resume, setup.game, setup.graph);
  outcome.result = run(setup.game, setup.graph, setup.steps, cfg.dr, initial, options);
  outcome.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  outcome.exit_code = outcome.result.certified ? kExitOk : kExitNoConvergence;

  std::filesystem::create_directories(cfg.output.dir);
  io::write_metrics(cfg.output.dir / cfg.output.metrics, outcome.result.trajectory);
  {
    std::ofstream out(cfg.output.dir / cfg.output.summary);
    out << summary_json(cfg, setup, outcome).dump(2) << '\n';
  }
  if (!cfg.output.checkpoint.empty()) {
    io::save_checkpoint(cfg.output.dir / cfg.output.checkpoint, setup.game, setup.graph,
                        outcome.result.shadow);
  }

  log << (outcome.result.certified ? "certified" : "not certified") << " after "
      << outcome.result.iterations << " iterations, certificate "
      << io::format_double(outcome.result.certificate) << ", wall time " << std::fixed
      << std::setprecision(2) << outcome.wall_seconds << " s\n";
  log.unsetf(std::ios::floatfield);
  return outcome;
}

int verify(const RunConfig& cfg, std::ostream& out) {
  const Setup setup = prepare(cfg);
  for (const auto& w : setup.warnings) out << "warning: " << w << '\n';
  const Game& game = setup.game;

  RunOptions options;
  std::optional<OracleSolution> oracle;
  if (cfg.oracle) {
    oracle = centralized_vgne(game, default_oracle_step(game), cfg.oracle_tol);
    options.reference = oracle->x_star;
  }
  const RunResult run_result =
      run(game, setup.graph, setup.steps, cfg.dr, AugmentedState::zeros(game, setup.graph), options);
  const MetricsRecord& last = run_result.trajectory.back();
  const Eigen::VectorXd y_bar = network_mean(run_result.omega.y);

  bool mismatch = false;
  auto row = [&](const std::string& name, const std::string& value, const std::string& tol, bool ok) {
    out << std::left << std::setw(34) << name << std::setw(14) << value << std::setw(12) << tol
        << (ok ? "ok" : "FAIL") << '\n';
  };
  auto sci = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return std::string(buf);
  };

  out << std::left << std::setw(34) << "check" << std::setw(14) << "value" << std::setw(12) << "tolerance"
      << "result\n";
  row("dr iterations", std::to_string(run_result.iterations), "-", true);
  row("dr certificate", sci(run_result.certificate), sci(cfg.dr.certify_tol), run_result.certified);
  row("dr y_consensus", sci(last.y_consensus), sci(cfg.dr.certify_tol), last.y_consensus <= cfg.dr.certify_tol);
  row("dr lambda_consensus", sci(last.lambda_consensus), sci(cfg.dr.certify_tol),
      last.lambda_consensus <= cfg.dr.certify_tol);
  row("dr kkt (max)",
      sci(std::max({last.kkt_stationarity, last.kkt_primal, last.kkt_dual, last.kkt_compl})),
      sci(cfg.dr.certify_tol),
      std::max({last.kkt_stationarity, last.kkt_primal, last.kkt_dual, last.kkt_compl}) <= cfg.dr.certify_tol);
  row("dr t_residual", sci(last.t_residual), sci(cfg.dr.certify_tol), last.t_residual <= cfg.dr.certify_tol);

  if (!oracle) {
    out << "oracle disabled: distance metrics unavailable\n";
  } else {
    row("oracle kkt (max)", sci(oracle->certificate.max()), sci(cfg.oracle_tol),
        oracle->certificate.max() <= cfg.oracle_tol);
    const double rel = mean_norm_distance(run_result.omega, oracle->x_star);
    const bool rel_ok = rel <= cfg.agreement_tol;
    mismatch |= !rel_ok;
    row("dr vs oracle (avg rel. dist.)", sci(rel), sci(cfg.agreement_tol), rel_ok);
    if (game.dim() <= 3) {
      const BruteForceResult bf = brute_force_vgne_report(game, cfg.grid_step);
      const double tol = std::max(cfg.agreement_tol, 2.0 * cfg.grid_step);
      const double d_or = (bf.x - oracle->x_star).cwiseAbs().maxCoeff();
      const double d_dr = (bf.x - y_bar).cwiseAbs().maxCoeff();
      row("grid vs oracle (max abs)", sci(d_or), sci(tol), d_or <= tol);
      row("grid vs dr (max abs)", sci(d_dr), sci(tol), d_dr <= tol);
      row("grid VI gap", sci(bf.gap), sci(bf.threshold), bf.gap <= bf.threshold);
      mismatch |= d_or > tol || d_dr > tol;
    } else {
      out << "brute force skipped: n = " << game.dim() << " > 3\n";
    }
  }
  if (!run_result.certified) return kExitNoConvergence;
  return mismatch ? kExitMismatch : kExitOk;
}

int print_constants(const RunConfig& cfg, std::ostream& out) {
  const Setup setup = prepare(cfg);
  const auto& c = setup.constants;
  out << "eta          " << io::format_double(c.eta) << '\n'
      << "theta1       " << io::format_double(c.theta1) << '\n'
      << "theta2       " << io::format_double(c.theta2) << '\n'
      << "sigma1       " << io::format_double(c.sigma1) << '\n'
      << "rho_mu_bound " << io::format_double(c.rho_mu_bound) << '\n';
  return kExitOk;
}

}  // namespace dgne
