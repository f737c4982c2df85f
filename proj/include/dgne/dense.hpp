#pragma once

// Dense assembly of the splitting operators. Used to cross-check the
// matrix-free sweeps on small instances; nothing in the iteration itself
// depends on these.

#include <Eigen/Dense>

#include "dgne/game.hpp"
#include "dgne/graph.hpp"
#include "dgne/splitting.hpp"

namespace dgne::dense {

/// Dense path is refused above this total dimension of the augmented state.
inline constexpr Eigen::Index kMaxDenseDimension = 2000;

/// Offsets of the y, lambda, mu, z blocks inside a flattened AugmentedState.
struct Layout {
  Eigen::Index y = 0;
  Eigen::Index lambda = 0;
  Eigen::Index mu = 0;
  Eigen::Index z = 0;
  Eigen::Index total = 0;
  Eigen::Index ny = 0, nlambda = 0, nmu = 0, nz = 0;
};

Layout layout(const Game& game, const Graph& graph);

/// M (x) I_k.
Eigen::MatrixXd kron_identity(const Eigen::MatrixXd& m, Eigen::Index k);

/// Lambda R = blkd(A_1 R_1, ..., A_N R_N), of size mN x nN.
Eigen::MatrixXd lambda_r(const Game& game);

/// Selection R = blkd(R_1, ..., R_N), of size n x nN.
Eigen::MatrixXd selection(const Game& game);

/// Skew-symmetric coupling matrix D of the split.
Eigen::MatrixXd build_d(const Game& game, const Graph& graph);

/// Design matrix Phi. Throws std::length_error above kMaxDenseDimension.
Eigen::MatrixXd build_phi(const Game& game, const Graph& graph, const StepSizes& steps);

/// Matrix of the linear operator B = D + blkd(rho_mu/2 L_n, rho_z/2 L_m, 0, 0).
Eigen::MatrixXd build_b_operator(const Game& game, const Graph& graph, const StepSizes& steps);

/// For an affine game: M_ext = R^T R (I_N (x) M) = blkd(R_i^T R_i M), so that
/// R^T ExtF(y) = M_ext y + R^T c.
Eigen::MatrixXd extended_jacobian(const Game& game);

/// Single-valued part of A for an affine game, A(w) = K w + h + normal cones,
/// with K = A_y's matrix + D and h = [R^T c; b_stack; 0; 0].
struct AffinePart {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd offset;
};
AffinePart build_a_affine(const Game& game, const Graph& graph, const StepSizes& steps);

}  // namespace dgne::dense
