#pragma once

// Reference solvers for the variational GNE: a centralized projected
// primal-dual method and an exhaustive VI-gap search for n <= 3.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dgne/game.hpp"

namespace dgne {

struct OracleSolution {
  Eigen::VectorXd x_star;
  Eigen::VectorXd lambda_star;
  KktResidual certificate;
  int iterations = 0;
  std::vector<double> kkt_history;  // max KKT residual after each iteration
};

/// min(eta / theta1^2, 1 / (2 ||A||_2)) for an affine game.
double default_oracle_step(const Game& game);

/// x+ = P_Omega(x - g (F(x) + A^T lambda)),  lambda+ = P_+(lambda + g (A(2x+ - x) - b)),
/// started from (x0, lambda0) or (P_Omega(0), 0). Stops once every KKT
/// component is <= tol; throws NoConvergence after max_iters.
OracleSolution centralized_vgne(const Game& game, double step, double tol = 1e-8,
                                int max_iters = 1000000,
                                const Eigen::VectorXd* x0 = nullptr,
                                const Eigen::VectorXd* lambda0 = nullptr);
OracleSolution centralized_vgne(const Game& game);

/// Vertices of X = Omega intersected with {Ax <= b}, by enumerating n-subsets
/// of the bounding hyperplanes. Requires box feasible sets.
std::vector<Eigen::VectorXd> feasible_vertices(const Game& game, double tol = 1e-10);

/// max_{z in X} <F(x), x - z>, evaluated exactly over the given vertices.
double vi_gap(const Game& game, const Eigen::VectorXd& x, const std::vector<Eigen::VectorXd>& vertices);

struct BruteForceResult {
  Eigen::VectorXd x;
  double gap = 0.0;
  double threshold = 0.0;  // gap bound the grid had to meet
  int grid_points = 0;     // gap evaluations spent
};

/// Grid search of the VI gap down to step h (coarse-to-fine, 21 points per
/// axis per level), one ternary pass per coordinate, then an ellipsoid-method
/// polish of the convex gap for affine games with n >= 2. n <= 3 and bounded
/// boxes required. Throws GridTooCoarse when no feasible grid point exists
/// or the final gap exceeds the Lipschitz-scaled h threshold.
BruteForceResult brute_force_vgne_report(const Game& game, double h);
Eigen::VectorXd brute_force_vgne(const Game& game, double h);

struct ViCheck {
  double violation = 0.0;  // max over accepted probes of <F(x), x - z>
  int probes = 0;          // probes evaluated
  bool vacuous = false;    // true when no probe was evaluated
};

/// Samples feasible z by rejection in the box, keeping Az <= b. Throws
/// InfeasiblePoint when x itself is infeasible beyond feas_tol, or when 1e5
/// consecutive draws are all rejected.
ViCheck verify_vi(const Game& game, const Eigen::VectorXd& x, int num_probes,
                  std::uint64_t seed = 0, double feas_tol = 1e-8);

}  // namespace dgne
