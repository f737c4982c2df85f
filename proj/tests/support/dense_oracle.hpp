#pragma once

// Independent reference computations for the tests: dense resolvents solved
// as box-constrained affine VIs by semismooth Newton, random small instances,
// and finite differences.

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

#include "dgne/cournot.hpp"
#include "dgne/dense.hpp"
#include "dgne/game.hpp"
#include "dgne/graph.hpp"
#include "dgne/splitting.hpp"

namespace dgne::testing {

struct Bounds {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  Eigen::VectorXd project(const Eigen::VectorXd& v) const { return v.cwiseMax(lo).cwiseMin(hi); }
};

/// Feasible region of A's normal cone in flattened layout: player boxes on
/// each own block of y, free elsewhere in y; lambda >= 0; mu and z free.
inline Bounds resolvent_bounds(const Game& game, const Graph& graph) {
  const dense::Layout l = dense::layout(game, graph);
  const double inf = std::numeric_limits<double>::infinity();
  Bounds b{Eigen::VectorXd::Constant(l.total, -inf), Eigen::VectorXd::Constant(l.total, inf)};
  const Eigen::Index n = game.dim();
  for (std::size_t i = 0; i < game.num_players(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const Box& box = *game.player(i).box;
    b.lo.segment(l.y + ii * n + game.offset(i), game.player_dim(i)) = box.lower;
    b.hi.segment(l.y + ii * n + game.offset(i), game.player_dim(i)) = box.upper;
  }
  b.lo.segment(l.lambda, l.nlambda).setZero();
  return b;
}

/// Solves  G w + c + N_C(w) \ni 0  over a box C via semismooth Newton on the
/// natural map r(w) = w - P_C(w - (G w + c)), with backtracking on ||r||.
inline Eigen::VectorXd solve_box_vi(const Eigen::MatrixXd& g, const Eigen::VectorXd& c, const Bounds& box,
                                    double tol = 1e-14, int max_iters = 200) {
  const Eigen::Index dim = c.size();
  auto residual = [&](const Eigen::VectorXd& w) { return (w - box.project(w - (g * w + c))).eval(); };
  Eigen::VectorXd w = box.project(Eigen::VectorXd::Zero(dim));
  Eigen::VectorXd r = residual(w);
  for (int it = 0; it < max_iters; ++it) {
    if (r.lpNorm<Eigen::Infinity>() <= tol) return w;
    Eigen::MatrixXd jac(dim, dim);
    const Eigen::VectorXd trial = w - (g * w + c);
    for (Eigen::Index k = 0; k < dim; ++k) {
      if (trial(k) < box.lo(k) || trial(k) > box.hi(k)) {
        jac.row(k).setZero();
        jac(k, k) = 1.0;
      } else {
        jac.row(k) = g.row(k);
      }
    }
    const Eigen::VectorXd d = jac.fullPivLu().solve(-r);
    double t = 1.0;
    Eigen::VectorXd next = w + d;
    Eigen::VectorXd rn = residual(next);
    while (rn.norm() > (1.0 - 1e-4 * t) * r.norm() && t > 1e-12) {
      t *= 0.5;
      next = w + t * d;
      rn = residual(next);
    }
    w = next;
    r = rn;
  }
  if (r.lpNorm<Eigen::Infinity>() <= 1e3 * tol) return w;
  throw std::runtime_error("semismooth Newton did not converge, residual " + std::to_string(r.norm()));
}

/// w with Phi w~ in (Phi + A) w, from the dense matrices alone.
inline AugmentedState dense_resolvent_A(const Game& game, const Graph& graph, const StepSizes& steps,
                                        const AugmentedState& shadow) {
  const Eigen::MatrixXd phi = dense::build_phi(game, graph, steps);
  const dense::AffinePart a = dense::build_a_affine(game, graph, steps);
  const Eigen::VectorXd c = a.offset - phi * shadow.flatten();
  return AugmentedState::unflatten(game, graph,
                                   solve_box_vi(phi + a.matrix, c, resolvent_bounds(game, graph)));
}

/// v with (Phi + B) v = Phi u.
inline AugmentedState dense_resolvent_B(const Game& game, const Graph& graph, const StepSizes& steps,
                                        const AugmentedState& u) {
  const Eigen::MatrixXd phi = dense::build_phi(game, graph, steps);
  const Eigen::MatrixXd b = dense::build_b_operator(game, graph, steps);
  return AugmentedState::unflatten(game, graph, (phi + b).fullPivLu().solve(phi * u.flatten()));
}

/// Natural-map residual of  Phi (w~ - w) in A(w)  at w.
inline double resolvent_A_certificate(const Game& game, const Graph& graph, const StepSizes& steps,
                                      const AugmentedState& shadow, const AugmentedState& w) {
  const Eigen::MatrixXd phi = dense::build_phi(game, graph, steps);
  const dense::AffinePart a = dense::build_a_affine(game, graph, steps);
  const Eigen::VectorXd x = w.flatten();
  const Eigen::VectorXd r = (phi + a.matrix) * x + a.offset - phi * shadow.flatten();
  return (x - resolvent_bounds(game, graph).project(x - r)).lpNorm<Eigen::Infinity>();
}

/// Random Cournot market with given sizes, intervals as in the reference experiment.
inline cournot::Instance random_instance(std::mt19937_64& rng, std::size_t players, std::size_t markets,
                                         std::size_t min_per, std::size_t max_per) {
  cournot::SamplingParams p;
  p.num_players = players;
  p.num_markets = markets;
  p.min_markets_per_player = min_per;
  p.max_markets_per_player = max_per;
  return cournot::sample_instance(rng(), p);
}

/// A connected random digraph on n nodes: random spanning tree with random
/// orientations, then a few extra edges.
inline Graph random_graph(std::mt19937_64& rng, std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t v = 1; v < n; ++v) {
    const std::size_t u = std::uniform_int_distribution<std::size_t>(0, v - 1)(rng);
    if (rng() % 2) edges.push_back({u, v});
    else edges.push_back({v, u});
  }
  const std::size_t extra = std::uniform_int_distribution<std::size_t>(0, n)(rng);
  for (std::size_t k = 0; k < extra; ++k) {
    const std::size_t a = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    const std::size_t b = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    if (a == b) continue;
    bool dup = false;
    for (const Edge& e : edges) dup |= e.tail == a && e.head == b;
    if (!dup) edges.push_back({a, b});
  }
  return build_graph(n, std::move(edges));
}

struct SmallCase {
  cournot::Instance instance;
  Game game;
  Graph graph;
  StepSizes steps;
};

/// 2-4 players, 1-3 markets, random graph, random penalties and margin.
inline SmallCase random_case(std::mt19937_64& rng) {
  const std::size_t players = std::uniform_int_distribution<std::size_t>(2, 4)(rng);
  const std::size_t markets = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
  cournot::Instance inst = random_instance(rng, players, markets, 1, markets);
  const BSplit split = rng() % 2 ? BSplit::uniform() : BSplit::first_player();
  Game game = cournot::make_game(inst, split);
  Graph graph = random_graph(rng, players);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double rho_mu = 0.5 + 50.0 * u01(rng);
  const double rho_z = 0.5 + 5.0 * u01(rng);
  const double margin = 0.01 + u01(rng);
  StepSizes steps = lemma1_step_sizes(game, graph, rho_mu, rho_z, margin);
  return {std::move(inst), std::move(game), std::move(graph), std::move(steps)};
}

inline AugmentedState random_state(const Game& game, const Graph& graph, std::mt19937_64& rng,
                                   double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::VectorXd flat(AugmentedState::zeros(game, graph).size());
  for (Eigen::Index k = 0; k < flat.size(); ++k) flat(k) = nd(rng);
  return AugmentedState::unflatten(game, graph, flat);
}

/// Central differences of a scalar function.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    xp(k) += h;
    xm(k) -= h;
    g(k) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

/// Scalar single-market firm with explicit parameters.
inline cournot::Firm scalar_firm(double q_quad, double q_lin, double cap, std::size_t market = 0) {
  cournot::Firm f;
  f.markets = {market};
  f.cost_quadratic = Eigen::VectorXd::Constant(1, q_quad);
  f.cost_linear = Eigen::VectorXd::Constant(1, q_lin);
  f.production_cap = Eigen::VectorXd::Constant(1, cap);
  return f;
}

}  // namespace dgne::testing
