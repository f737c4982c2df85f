#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dgne/game.hpp"
#include "dgne/graph.hpp"

namespace dgne::cournot {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Sampling intervals for a networked Nash-Cournot market. Defaults follow
/// the reference experiment: N = 20 firms, m = 10 markets.
struct SamplingParams {
  std::size_t num_players = 20;
  std::size_t num_markets = 10;
  std::size_t min_markets_per_player = 2;
  std::size_t max_markets_per_player = 6;
  Interval capacity{0.5, 1.0};      // b_k
  Interval price_intercept{2.0, 4.0};  // w_k
  Interval price_slope{0.5, 0.7};   // Sigma_kk
  Interval cost_quadratic{1.0, 1.5};  // [Q_i]_jj
  Interval cost_linear{0.1, 0.6};   // [q_i]_j
  Interval production_cap{0.2, 0.5};  // Omega_ij,max
};

/// One firm: it supplies `markets[j]` with x_ij units, at cost
/// x_i^T diag(cost_quadratic) x_i + cost_linear^T x_i, with 0 <= x_ij <= production_cap_j.
struct Firm {
  std::vector<std::size_t> markets;
  Eigen::VectorXd cost_quadratic;
  Eigen::VectorXd cost_linear;
  Eigen::VectorXd production_cap;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(markets.size()); }
};

/// Unit price in market k is w_k - Sigma_kk * (total supply to k).
struct Instance {
  std::vector<Firm> firms;
  Eigen::VectorXd price_intercept;  // w
  Eigen::VectorXd price_slope;      // diag(Sigma)
  Eigen::VectorXd capacity;         // b

  std::size_t num_players() const { return firms.size(); }
  Eigen::Index num_markets() const { return capacity.size(); }
  Eigen::Index dim() const;
  /// Binary market map A_i, m x n_i, one 1 per column.
  Eigen::MatrixXd market_map(std::size_t i) const;
  Eigen::MatrixXd market_map() const;
};

/// Throws InvalidGame naming the first violated structural invariant.
void validate(const Instance& inst);

/// Deterministic for a fixed seed. Throws InvalidInterval when an interval
/// has lo > hi or the per-player market range is infeasible.
Instance sample_instance(std::uint64_t seed, const SamplingParams& params = {});

/// F(x) = M x + c with M = blkd(2Q_i + A_i^T Sigma A_i) + A^T Sigma A and c = q - A^T w.
AffineMap assemble_F(const Instance& inst);

/// Game view of the market; players get closed-form local argmins.
Game make_game(const Instance& inst, const BSplit& split = BSplit::uniform());

/// Monotonicity and Lipschitz constants of an affine game on a graph.
struct Constants {
  Eigen::MatrixXd m_f;   // blkd(2Q_i + A_i^T Sigma A_i) (Cournot only; empty otherwise)
  double eta = 0.0;      // min eigenvalue of the symmetric part of M
  double theta1 = 0.0;   // largest singular value of M
  double theta2 = 0.0;   // largest singular value of R (I_N (x) M)
  double sigma1 = 0.0;   // algebraic connectivity of the graph
  double rho_mu_bound = 0.0;
};

/// (2 / sigma1) * ((theta1 + theta2)^2 / (4 eta) + theta2); +inf when sigma1 == 0.
double lemma4_rho_bound(double eta, double theta1, double theta2, double sigma1);

/// Throws NonPositiveEta when the symmetric part of M is not positive definite.
Constants constants(const Game& game, const Graph& graph);
Constants constants(const Instance& inst, const Graph& graph);

/// Exact minimiser of 0.5 v^T H v + g^T v over a box when H is diagonal with
/// positive entries; otherwise the iterative fallback below is used.
Eigen::VectorXd quadratic_box_argmin(const Eigen::MatrixXd& h, const Eigen::VectorXd& g,
                                     const Box& box);

/// Projected-gradient solve of the same problem, step 1/||H||, stopping on a
/// fixed-point residual below tol.
Eigen::VectorXd quadratic_box_argmin_iterative(const Eigen::MatrixXd& h, const Eigen::VectorXd& g,
                                               const Box& box, double tol = 1e-10,
                                               int max_iters = 1000000);

/// Smallest eigenvalue of 0.5 (M_ext + M_ext^T) + (rho/2)(L (x) I_n) for an affine game.
double assumption_a_min_eigenvalue(const Game& game, const Graph& graph, double rho);

/// Cholesky test of  0.5 (M_ext + M_ext^T) + (rho/2)(L (x) I_n) + tol I  > 0.
bool assumption_a_holds(const Game& game, const Graph& graph, double rho, double tol = 1e-8);

/// Smallest rho >= 2 (bisection to `resolution`) making the matrix above PSD.
/// Throws SearchCeilingExceeded when none is found below `ceiling`.
double assumption_a_rho(const Game& game, const Graph& graph, double ceiling = 1e4,
                        double resolution = 1e-3);

}  // namespace dgne::cournot
