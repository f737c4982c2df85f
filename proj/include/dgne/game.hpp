#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dgne/graph.hpp"

namespace dgne {

/// Axis-aligned box; used by solvers that need explicit bounds.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::VectorXd project(const Eigen::VectorXd& v) const {
    return v.cwiseMax(lower).cwiseMin(upper);
  }
};

/// Solves  min_{v in Omega_i}  J_i(v; profile_{-i}) + linear^T v + (prox_weight/2)||v - center||^2.
/// The own block of `profile` is ignored.
using LocalArgmin = std::function<Eigen::VectorXd(const Eigen::VectorXd& profile,
                                                  const Eigen::VectorXd& linear,
                                                  const Eigen::VectorXd& center,
                                                  double prox_weight)>;

/// One player of the game. Oracles receive the full decision profile x in R^n
/// (own block at the player's offset) and must be pure.
struct PlayerSpec {
  Eigen::Index dim = 0;
  Eigen::MatrixXd coupling;  // A_i, m x n_i
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> project;
  std::function<double(const Eigen::VectorXd& profile)> objective;
  std::function<Eigen::VectorXd(const Eigen::VectorXd& profile)> own_subgradient;
  LocalArgmin local_argmin;  // empty -> projected-gradient fallback
  std::optional<Box> box;
};

/// F(x) = matrix * x + offset, for games with affine pseudogradient.
struct AffineMap {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd offset;

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const { return matrix * x + offset; }
};

struct BSplit {
  enum class Kind { Uniform, FirstPlayer, Custom };
  Kind kind = Kind::Uniform;
  std::vector<Eigen::VectorXd> custom;

  static BSplit uniform() { return {}; }
  static BSplit first_player() { return {Kind::FirstPlayer, {}}; }
  static BSplit from_list(std::vector<Eigen::VectorXd> parts) {
    return {Kind::Custom, std::move(parts)};
  }
};

/// Splits b into N parts summing to b exactly. Uniform assigns b/N to every
/// player but the last, which receives b minus the running sum.
std::vector<Eigen::VectorXd> split_b(const Eigen::VectorXd& b, std::size_t num_players,
                                     const BSplit& scheme);

/// Generalized Nash game with affine coupling  sum_i A_i x_i <= b.
class Game {
 public:
  Game(std::vector<PlayerSpec> players, Eigen::VectorXd b, const BSplit& split = BSplit::uniform(),
       std::optional<AffineMap> affine = std::nullopt);

  std::size_t num_players() const { return players_.size(); }
  Eigen::Index dim() const { return n_; }             // n
  Eigen::Index num_constraints() const { return m_; }  // m
  const PlayerSpec& player(std::size_t i) const { return players_[i]; }
  const std::vector<PlayerSpec>& players() const { return players_; }
  Eigen::Index offset(std::size_t i) const { return offsets_[i]; }
  Eigen::Index player_dim(std::size_t i) const { return players_[i].dim; }
  const Eigen::VectorXd& b() const { return b_; }
  const Eigen::VectorXd& b_part(std::size_t i) const { return b_split_[i]; }
  const std::vector<Eigen::VectorXd>& b_split() const { return b_split_; }
  const std::optional<AffineMap>& affine() const { return affine_; }

  /// A = [A_1, ..., A_N], m x n.
  const Eigen::MatrixXd& coupling() const { return coupling_; }

  /// Every player has a box; needed by the brute-force checker and probes.
  bool has_boxes() const;
  Box joint_box() const;

  Eigen::VectorXd project_omega(const Eigen::VectorXd& x) const;

  /// Player i's subproblem; falls back to a projected-gradient solve when
  /// the player supplies no closed form.
  Eigen::VectorXd local_argmin(std::size_t i, const Eigen::VectorXd& profile,
                               const Eigen::VectorXd& linear, const Eigen::VectorXd& center,
                               double prox_weight) const;

 private:
  std::vector<PlayerSpec> players_;
  Eigen::VectorXd b_;
  std::vector<Eigen::VectorXd> b_split_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index n_ = 0;
  Eigen::Index m_ = 0;
  Eigen::MatrixXd coupling_;
  std::optional<AffineMap> affine_;
};

/// R_i y: player i's own block of a full-profile vector.
Eigen::VectorXd select_own(const Game& game, const Eigen::VectorXd& y, std::size_t i);
/// R_i^T g: zero everywhere except player i's block.
Eigen::VectorXd embed_own(const Game& game, const Eigen::VectorXd& g, std::size_t i);

/// F(x): stacked own subgradients at the common profile x.
Eigen::VectorXd pseudogradient(const Game& game, const Eigen::VectorXd& x);

/// Extended pseudogradient: block i is player i's own subgradient evaluated
/// at player i's own estimate y_i. Result lives in R^n.
Eigen::VectorXd extended_pseudogradient(const Game& game, std::span<const Eigen::VectorXd> ystack);

struct KktResidual {
  double stationarity = 0.0;  // ||x - Proj_Omega(x - (F(x) + A^T lambda))||
  double primal = 0.0;        // ||max(Ax - b, 0)||
  double dual = 0.0;          // ||min(lambda, 0)||
  double compl_slack = 0.0;   // |lambda^T (b - Ax)|

  double max() const;
};

KktResidual kkt_residual(const Game& game, const Eigen::VectorXd& x, const Eigen::VectorXd& lambda);

/// Stacked primal-dual iterate of the distributed method: per-player profile
/// estimates and multiplier estimates, per-edge consensus multipliers.
struct AugmentedState {
  Stack y;       // N vectors in R^n
  Stack lambda;  // N vectors in R^m
  Stack mu;      // E vectors in R^n
  Stack z;       // E vectors in R^m

  static AugmentedState zeros(const Game& game, const Graph& graph);

  /// [y; lambda; mu; z] as one flat vector.
  Eigen::VectorXd flatten() const;
  /// Inverse of flatten() for the given shape.
  static AugmentedState unflatten(const Game& game, const Graph& graph, const Eigen::VectorXd& flat);

  Eigen::Index size() const;
  double norm() const;

  AugmentedState& operator+=(const AugmentedState& o);
  AugmentedState& operator-=(const AugmentedState& o);
  AugmentedState& operator*=(double s);
};

AugmentedState operator+(AugmentedState a, const AugmentedState& b);
AugmentedState operator-(AugmentedState a, const AugmentedState& b);
AugmentedState operator*(double s, AugmentedState a);

/// Projected-gradient solver for a player's subproblem using only the
/// subgradient oracle (backtracking on local curvature).
Eigen::VectorXd projected_gradient_argmin(const PlayerSpec& player, Eigen::Index offset,
                                          const Eigen::VectorXd& profile,
                                          const Eigen::VectorXd& linear,
                                          const Eigen::VectorXd& center, double prox_weight,
                                          double tol = 1e-12, int max_iters = 100000);

}  // namespace dgne
