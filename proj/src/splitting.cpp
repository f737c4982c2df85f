#include "dgne/splitting.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "dgne/errors.hpp"

namespace dgne {
namespace {

// Runs fn(k) for k in [0, count). With workers > 1 the indices are spread
// over threads; every fn(k) must write only its own output slot.
template <typename F>
void parallel_for(std::size_t count, std::size_t workers, F&& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  const std::size_t nthreads = std::min(workers, count);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (std::size_t t = 0; t < nthreads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t k = t; k < count; k += nthreads) fn(k);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

Eigen::VectorXd own_block(const Game& game, const Eigen::VectorXd& y, std::size_t i) {
  return y.segment(game.offset(i), game.player_dim(i));
}

}  // namespace

StepSizes StepSizes::uniform(const Game& game, const Graph& graph, double tau1, double tau2,
                             double tau3, double tau4, double rho_mu, double rho_z) {
  const auto np = static_cast<Eigen::Index>(game.num_players());
  const auto ne = static_cast<Eigen::Index>(graph.num_edges());
  return {Eigen::VectorXd::Constant(np, tau1), Eigen::VectorXd::Constant(np, tau2),
          Eigen::VectorXd::Constant(ne, tau3), Eigen::VectorXd::Constant(ne, tau4),
          rho_mu, rho_z};
}

StepBounds step_bounds(const Game& game, const Graph& graph, double rho_mu, double rho_z) {
  const auto np = static_cast<Eigen::Index>(game.num_players());
  const auto ne = static_cast<Eigen::Index>(graph.num_edges());
  StepBounds sb{Eigen::VectorXd(np), Eigen::VectorXd(np), Eigen::VectorXd::Ones(ne),
                Eigen::VectorXd::Ones(ne)};
  for (std::size_t i = 0; i < game.num_players(); ++i) {
    const Eigen::MatrixXd& a = game.player(i).coupling;
    const double norm1 = a.cols() > 0 ? a.cwiseAbs().colwise().sum().maxCoeff() : 0.0;
    const double norm_inf = a.rows() > 0 ? a.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
    const double d = static_cast<double>(graph.degree(i));
    sb.inv_tau1(static_cast<Eigen::Index>(i)) = 0.5 * norm1 + (0.5 + rho_mu) * d;
    sb.inv_tau2(static_cast<Eigen::Index>(i)) = 0.5 * norm_inf + (0.5 + rho_z) * d;
  }
  return sb;
}

StepSizes lemma1_step_sizes(const Game& game, const Graph& graph, double rho_mu, double rho_z,
                            double margin) {
  if (!(margin > 0.0)) {
    throw NonpositiveMargin("step-size margin must be positive, got " + std::to_string(margin));
  }
  if (!(rho_mu > 0.0) || !(rho_z > 0.0)) {
    throw std::invalid_argument("consensus penalties rho_mu and rho_z must be positive");
  }
  const StepBounds sb = step_bounds(game, graph, rho_mu, rho_z);
  const double scale = 1.0 + margin;
  StepSizes s;
  // A player with no edges and no coupling has bound 0; any positive step works there.
  auto invert = [&](const Eigen::VectorXd& bound) {
    return (bound * scale).cwiseMax(1e-300).cwiseInverse().eval();
  };
  s.tau1 = invert(sb.inv_tau1);
  s.tau2 = invert(sb.inv_tau2);
  s.tau3 = invert(sb.inv_tau3);
  s.tau4 = invert(sb.inv_tau4);
  s.rho_mu = rho_mu;
  s.rho_z = rho_z;
  return s;
}

std::vector<std::string> lemma1_violations(const Game& game, const Graph& graph,
                                           const StepSizes& steps) {
  const StepBounds sb = step_bounds(game, graph, steps.rho_mu, steps.rho_z);
  std::vector<std::string> out;
  auto check = [&](const char* name, const Eigen::VectorXd& tau, const Eigen::VectorXd& bound) {
    for (Eigen::Index k = 0; k < tau.size(); ++k) {
      if (!(1.0 / tau(k) > bound(k))) {
        std::ostringstream os;
        os << "1/" << name << "[" << k << "] = " << 1.0 / tau(k) << " is not above " << bound(k);
        out.push_back(os.str());
      }
    }
  };
  check("tau1", steps.tau1, sb.inv_tau1);
  check("tau2", steps.tau2, sb.inv_tau2);
  check("tau3", steps.tau3, sb.inv_tau3);
  check("tau4", steps.tau4, sb.inv_tau4);
  return out;
}

AugmentedState resolvent_A(const Game& game, const Graph& graph, const StepSizes& steps,
                           const AugmentedState& s, std::size_t workers) {
  const std::size_t np = game.num_players();
  const Eigen::Index n = game.dim();
  const Eigen::Index m = game.num_constraints();
  AugmentedState out;
  out.y.resize(np);
  out.lambda.resize(np);
  out.mu.resize(graph.num_edges());
  out.z.resize(graph.num_edges());

  // (a) estimates of the others, explicit; (b) own block, player subproblem.
  parallel_for(np, workers, [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double tau = steps.tau1(ii);
    const Eigen::VectorXd lap = laplacian_apply_at(graph, s.y, i);
    const Eigen::VectorXd inc = incidence_apply_at(graph, s.mu, i, n);
    Eigen::VectorXd yi = s.y[i] - tau * (0.5 * steps.rho_mu * lap + 0.5 * inc);

    const Eigen::Index off = game.offset(i);
    const Eigen::Index ni = game.player_dim(i);
    const Eigen::VectorXd linear = 0.5 * game.player(i).coupling.transpose() * s.lambda[i] +
                                   0.5 * steps.rho_mu * lap.segment(off, ni) +
                                   0.5 * inc.segment(off, ni);
    yi.segment(off, ni) = game.local_argmin(i, yi, linear, s.y[i].segment(off, ni), 1.0 / tau);
    out.y[i] = std::move(yi);
  });

  // (c) multipliers, projected onto the nonnegative orthant.
  parallel_for(np, workers, [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const Eigen::MatrixXd& a = game.player(i).coupling;
    const Eigen::VectorXd lap = laplacian_apply_at(graph, s.lambda, i);
    const Eigen::VectorXd inc = incidence_apply_at(graph, s.z, i, m);
    const Eigen::VectorXd arg =
        s.lambda[i] + steps.tau2(ii) * (a * own_block(game, out.y[i], i) -
                                        0.5 * a * own_block(game, s.y[i], i) -
                                        0.5 * steps.rho_z * lap - 0.5 * inc - game.b_part(i));
    out.lambda[i] = arg.cwiseMax(0.0);
  });

  // (d) edge multipliers.
  parallel_for(graph.num_edges(), workers, [&](std::size_t e) {
    const auto ee = static_cast<Eigen::Index>(e);
    const std::size_t h = graph.edge(e).head;
    const std::size_t t = graph.edge(e).tail;
    out.mu[e] = s.mu[e] + steps.tau3(ee) * ((out.y[h] - out.y[t]) - 0.5 * (s.y[h] - s.y[t]));
    out.z[e] = s.z[e] +
               steps.tau4(ee) * ((out.lambda[h] - out.lambda[t]) - 0.5 * (s.lambda[h] - s.lambda[t]));
  });
  return out;
}

AugmentedState resolvent_B(const Game& game, const Graph& graph, const StepSizes& steps,
                           const AugmentedState& u, std::size_t workers) {
  const std::size_t np = game.num_players();
  const Eigen::Index n = game.dim();
  const Eigen::Index m = game.num_constraints();
  AugmentedState v;
  v.y.resize(np);
  v.lambda.resize(np);
  v.mu.resize(graph.num_edges());
  v.z.resize(graph.num_edges());

  parallel_for(np, workers, [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    Eigen::VectorXd dir = 0.5 * steps.rho_mu * laplacian_apply_at(graph, u.y, i) +
                          0.5 * incidence_apply_at(graph, u.mu, i, n);
    dir.segment(game.offset(i), game.player_dim(i)) +=
        0.5 * game.player(i).coupling.transpose() * u.lambda[i];
    v.y[i] = u.y[i] - steps.tau1(ii) * dir;
  });

  parallel_for(np, workers, [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const Eigen::MatrixXd& a = game.player(i).coupling;
    v.lambda[i] = u.lambda[i] + steps.tau2(ii) * (a * own_block(game, v.y[i], i) -
                                                   0.5 * a * own_block(game, u.y[i], i) -
                                                   0.5 * steps.rho_z * laplacian_apply_at(graph, u.lambda, i) -
                                                   0.5 * incidence_apply_at(graph, u.z, i, m));
  });

  parallel_for(graph.num_edges(), workers, [&](std::size_t e) {
    const auto ee = static_cast<Eigen::Index>(e);
    const std::size_t h = graph.edge(e).head;
    const std::size_t t = graph.edge(e).tail;
    v.mu[e] = u.mu[e] + steps.tau3(ee) * ((v.y[h] - v.y[t]) - 0.5 * (u.y[h] - u.y[t]));
    v.z[e] = u.z[e] + steps.tau4(ee) * ((v.lambda[h] - v.lambda[t]) - 0.5 * (u.lambda[h] - u.lambda[t]));
  });
  return v;
}

DrRoundResult dr_round(const Game& game, const Graph& graph, const StepSizes& steps,
                       const AugmentedState& shadow, double gamma, std::size_t workers) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("relaxation must lie in (0, 1)");
  DrRoundResult r;
  r.omega = resolvent_A(game, graph, steps, shadow, workers);
  AugmentedState reflected = 2.0 * r.omega;
  reflected -= shadow;
  AugmentedState correction = resolvent_B(game, graph, steps, reflected, workers);
  correction -= r.omega;
  r.next = shadow;
  r.next += (2.0 * gamma) * std::move(correction);
  return r;
}

double phi_quadratic_form(const Game& game, const Graph& graph, const StepSizes& steps,
                          const AugmentedState& w) {
  const Eigen::Index n = game.dim();
  const Eigen::Index m = game.num_constraints();
  double q = 0.0;
  for (std::size_t i = 0; i < game.num_players(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    q += w.y[i].squaredNorm() / steps.tau1(ii) + w.lambda[i].squaredNorm() / steps.tau2(ii);
    q -= (game.player(i).coupling * own_block(game, w.y[i], i)).dot(w.lambda[i]);
    q -= w.y[i].dot(incidence_apply_at(graph, w.mu, i, n));
    q -= w.lambda[i].dot(incidence_apply_at(graph, w.z, i, m));
  }
  for (std::size_t e = 0; e < graph.num_edges(); ++e) {
    const auto ee = static_cast<Eigen::Index>(e);
    const std::size_t h = graph.edge(e).head;
    const std::size_t t = graph.edge(e).tail;
    q -= 0.5 * steps.rho_mu * (w.y[h] - w.y[t]).squaredNorm();
    q -= 0.5 * steps.rho_z * (w.lambda[h] - w.lambda[t]).squaredNorm();
    q += w.mu[e].squaredNorm() / steps.tau3(ee) + w.z[e].squaredNorm() / steps.tau4(ee);
  }
  return q;
}

double phi_norm(const Game& game, const Graph& graph, const StepSizes& steps,
                const AugmentedState& w) {
  const double q = phi_quadratic_form(game, graph, steps, w);
  if (q >= 0.0) return std::sqrt(q);
  // Rounding can push a tiny form below zero; scale the tolerance by the diagonal part.
  double diag = 0.0;
  for (std::size_t i = 0; i < game.num_players(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    diag += w.y[i].squaredNorm() / steps.tau1(ii) + w.lambda[i].squaredNorm() / steps.tau2(ii);
  }
  for (std::size_t e = 0; e < graph.num_edges(); ++e) {
    const auto ee = static_cast<Eigen::Index>(e);
    diag += w.mu[e].squaredNorm() / steps.tau3(ee) + w.z[e].squaredNorm() / steps.tau4(ee);
  }
  if (q < -1e-12 * diag) {
    throw NegativeQuadraticForm("w^T Phi w = " + std::to_string(q) +
                                " < 0; the step sizes do not make Phi positive definite");
  }
  return 0.0;
}

double TResidual::total() const {
  return std::sqrt(y_row * y_row + lambda_row * lambda_row + y_consensus * y_consensus +
                   lambda_consensus * lambda_consensus);
}

TResidual t_residual_parts(const Game& game, const Graph& graph, const StepSizes& steps,
                           const AugmentedState& w) {
  const Eigen::Index n = game.dim();
  const Eigen::Index m = game.num_constraints();
  TResidual r;
  double y_sq = 0.0;
  double l_sq = 0.0;
  for (std::size_t i = 0; i < game.num_players(); ++i) {
    const Eigen::MatrixXd& a = game.player(i).coupling;
    const Eigen::Index off = game.offset(i);
    const Eigen::Index ni = game.player_dim(i);

    Eigen::VectorXd gy = incidence_apply_at(graph, w.mu, i, n) +
                         steps.rho_mu * laplacian_apply_at(graph, w.y, i);
    gy.segment(off, ni) += game.player(i).own_subgradient(w.y[i]) + a.transpose() * w.lambda[i];
    // Only the own block is constrained; elsewhere the natural map is gy itself.
    const Eigen::VectorXd own = w.y[i].segment(off, ni);
    const Eigen::VectorXd own_res = own - game.player(i).project(own - gy.segment(off, ni));
    y_sq += gy.squaredNorm() - gy.segment(off, ni).squaredNorm() + own_res.squaredNorm();

    const Eigen::VectorXd gl = -a * own + game.b_part(i) + incidence_apply_at(graph, w.z, i, m) +
                               steps.rho_z * laplacian_apply_at(graph, w.lambda, i);
    l_sq += (w.lambda[i] - (w.lambda[i] - gl).cwiseMax(0.0)).squaredNorm();
  }
  r.y_row = std::sqrt(y_sq);
  r.lambda_row = std::sqrt(l_sq);
  double cy = 0.0;
  double cl = 0.0;
  for (const Edge& e : graph.edges()) {
    cy += (w.y[e.head] - w.y[e.tail]).squaredNorm();
    cl += (w.lambda[e.head] - w.lambda[e.tail]).squaredNorm();
  }
  r.y_consensus = std::sqrt(cy);
  r.lambda_consensus = std::sqrt(cl);
  return r;
}

double t_residual(const Game& game, const Graph& graph, const StepSizes& steps,
                  const AugmentedState& w) {
  return t_residual_parts(game, graph, steps, w).total();
}

AugmentedState zero_from_vgne(const Game& game, const Graph& graph, const GraphAlgebra& algebra,
                              const Eigen::VectorXd& x, const Eigen::VectorXd& lambda) {
  const auto np = static_cast<Eigen::Index>(game.num_players());
  const Eigen::Index n = game.dim();
  const Eigen::Index m = game.num_constraints();
  AugmentedState w = AugmentedState::zeros(game, graph);
  for (auto& yi : w.y) yi = x;
  for (auto& li : w.lambda) li = lambda;

  // Targets for (B (x) I) mu and (B (x) I) z, one row per node.
  Eigen::MatrixXd target_mu = Eigen::MatrixXd::Zero(np, n);
  Eigen::MatrixXd target_z(np, m);
  const Eigen::VectorXd slack = game.b() - game.coupling() * x;
  for (std::size_t i = 0; i < game.num_players(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const Eigen::MatrixXd& a = game.player(i).coupling;
    const Eigen::Index off = game.offset(i);
    const Eigen::Index ni = game.player_dim(i);
    const Eigen::VectorXd own = x.segment(off, ni);
    const Eigen::VectorXd g = game.player(i).own_subgradient(x) + a.transpose() * lambda;
    // The part of g that the normal cone cannot absorb is the natural-map residual.
    const Eigen::VectorXd residual = own - game.player(i).project(own - g);
    target_mu.block(ii, off, 1, ni) = -residual.transpose();
    target_z.row(ii) = (-(game.b_part(i) - a * own) + slack / static_cast<double>(np)).transpose();
  }

  // Minimum-norm least squares of B X = T is X = B^T L^+ T.
  const Eigen::MatrixXd solve = algebra.incidence.transpose() * algebra.laplacian_pinv();
  const Eigen::MatrixXd mu = solve * target_mu;
  const Eigen::MatrixXd z = solve * target_z;
  for (std::size_t e = 0; e < graph.num_edges(); ++e) {
    w.mu[e] = mu.row(static_cast<Eigen::Index>(e)).transpose();
    w.z[e] = z.row(static_cast<Eigen::Index>(e)).transpose();
  }
  return w;
}

Eigen::VectorXd network_mean(std::span<const Eigen::VectorXd> values) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(values.front().size());
  for (const auto& v : values) mean += v;
  return mean / static_cast<double>(values.size());
}

double consensus_spread(std::span<const Eigen::VectorXd> values) {
  const Eigen::VectorXd mean = network_mean(values);
  Eigen::VectorXd var = Eigen::VectorXd::Zero(mean.size());
  for (const auto& v : values) var += (v - mean).cwiseAbs2();
  return (var / static_cast<double>(values.size())).cwiseSqrt().sum();
}

MetricsRecord compute_metrics(const Game& game, const Graph& graph, const StepSizes& steps,
                              std::size_t iter, const AugmentedState& omega, double rel_step,
                              const std::optional<Eigen::VectorXd>& reference) {
  MetricsRecord r;
  r.iter = iter;
  r.rel_step = rel_step;
  if (reference) {
    const double ref_norm = reference->norm();
    double acc = 0.0;
    for (const auto& yj : omega.y) acc += (yj - *reference).norm() / ref_norm;
    r.avg_norm_dist = acc / static_cast<double>(omega.y.size());
  }
  r.y_consensus = consensus_spread(omega.y);
  r.lambda_consensus = consensus_spread(omega.lambda);
  const KktResidual kkt = kkt_residual(game, network_mean(omega.y), network_mean(omega.lambda));
  r.kkt_stationarity = kkt.stationarity;
  r.kkt_primal = kkt.primal;
  r.kkt_dual = kkt.dual;
  r.kkt_compl = kkt.compl_slack;
  r.t_residual = t_residual(game, graph, steps, omega);
  return r;
}

double certificate_of(const MetricsRecord& r) {
  return std::max({r.kkt_stationarity, r.kkt_primal, r.kkt_dual, r.kkt_compl, r.y_consensus,
                   r.lambda_consensus, r.t_residual});
}

RunResult run(const Game& game, const Graph& graph, const StepSizes& steps, const DRConfig& cfg,
              const AugmentedState& initial, const RunOptions& options) {
  RunResult result;
  result.shadow = initial;
  result.omega = initial;

  auto record = [&](MetricsRecord rec) {
    if (options.on_iteration) options.on_iteration(rec);
    result.trajectory.push_back(rec);
    if (options.fejer_reference) {
      result.fejer_distances.push_back(
          phi_norm(game, graph, steps, result.shadow - *options.fejer_reference));
    }
  };

  record(compute_metrics(game, graph, steps, 0, result.omega, 0.0, options.reference));

  for (std::size_t k = 1; k <= cfg.max_iters; ++k) {
    DrRoundResult round = dr_round(game, graph, steps, result.shadow, cfg.gamma, cfg.workers);
    const double rel = (round.next - result.shadow).norm() / (result.shadow.norm() + 1.0);
    result.shadow = std::move(round.next);
    result.omega = std::move(round.omega);
    result.iterations = k;
    MetricsRecord rec = compute_metrics(game, graph, steps, k, result.omega, rel, options.reference);
    const bool certified_stop = cfg.cert_tol > 0.0 && certificate_of(rec) <= cfg.cert_tol;
    record(rec);
    if (rel <= cfg.stop_tol || certified_stop) {
      result.status = RunStatus::Converged;
      break;
    }
  }

  result.certificate = certificate_of(result.trajectory.back());
  result.certified = result.certificate <= cfg.certify_tol;
  return result;
}

}  // namespace dgne
