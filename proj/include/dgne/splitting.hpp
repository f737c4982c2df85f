#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dgne/game.hpp"
#include "dgne/graph.hpp"

namespace dgne {

/// Per-player (tau1, tau2) and per-edge (tau3, tau4) step sizes together with
/// the consensus penalties. They define the metric Phi of the splitting.
struct StepSizes {
  Eigen::VectorXd tau1;  // N
  Eigen::VectorXd tau2;  // N
  Eigen::VectorXd tau3;  // E
  Eigen::VectorXd tau4;  // E
  double rho_mu = 0.0;
  double rho_z = 0.0;

  /// Same scalar for every player / edge.
  static StepSizes uniform(const Game& game, const Graph& graph, double tau1, double tau2,
                           double tau3, double tau4, double rho_mu, double rho_z);
};

/// Right-hand sides of the Gershgorin conditions that make Phi positive definite:
/// 1/tau1_i > 0.5||A_i||_1 + (0.5 + rho_mu) d_i, 1/tau2_i > 0.5||A_i||_inf + (0.5 + rho_z) d_i,
/// 1/tau3_e > 1, 1/tau4_e > 1.
struct StepBounds {
  Eigen::VectorXd inv_tau1;
  Eigen::VectorXd inv_tau2;
  Eigen::VectorXd inv_tau3;
  Eigen::VectorXd inv_tau4;
};

StepBounds step_bounds(const Game& game, const Graph& graph, double rho_mu, double rho_z);

/// Steps at (bound * (1 + margin))^-1. Throws NonpositiveMargin for margin <= 0.
StepSizes lemma1_step_sizes(const Game& game, const Graph& graph, double rho_mu, double rho_z,
                            double margin);

/// Human-readable list of violated step-size inequalities; empty when feasible.
std::vector<std::string> lemma1_violations(const Game& game, const Graph& graph,
                                           const StepSizes& steps);

enum class Mode { AssumptionA, AssumptionB };

struct DRConfig {
  double gamma = 0.5;            // KM relaxation in (0, 1)
  std::size_t max_iters = 50000;
  double stop_tol = 1e-12;       // on ||w~+ - w~|| / (||w~|| + 1)
  double cert_tol = 1e-6;        // stop once the certificate drops below; 0 disables
  double certify_tol = 1e-6;     // exit check on KKT, consensus and T residuals
  Mode mode = Mode::AssumptionB;
  std::size_t workers = 0;       // 0: sequential, deterministic order
};

/// J_{Phi^-1 A}: solves Phi (w~ - w) in A(w) by one block-triangular sweep.
/// Throws LocalArgminFailure when a player subproblem fails.
AugmentedState resolvent_A(const Game& game, const Graph& graph, const StepSizes& steps,
                           const AugmentedState& shadow_in, std::size_t workers = 0);

/// J_{Phi^-1 B}: solves Phi (u - v) = B(v), purely linear.
AugmentedState resolvent_B(const Game& game, const Graph& graph, const StepSizes& steps,
                           const AugmentedState& u, std::size_t workers = 0);

struct DrRoundResult {
  AugmentedState omega;  // resolvent_A output (the returned iterate)
  AugmentedState next;   // updated governing sequence w~+
};

/// One Douglas-Rachford round with KM relaxation gamma:
/// w = J_A(w~),  w~+ = w~ + 2 gamma (J_B(2w - w~) - w).
DrRoundResult dr_round(const Game& game, const Graph& graph, const StepSizes& steps,
                       const AugmentedState& shadow, double gamma = 0.5, std::size_t workers = 0);

/// w^T Phi w, matrix-free. May be slightly negative from rounding.
double phi_quadratic_form(const Game& game, const Graph& graph, const StepSizes& steps,
                          const AugmentedState& w);

/// sqrt(w^T Phi w). Throws NegativeQuadraticForm when the form is clearly
/// negative, which means the steps violate the Gershgorin conditions.
double phi_norm(const Game& game, const Graph& graph, const StepSizes& steps,
                const AugmentedState& w);

struct TResidual {
  double y_row = 0.0;       // natural-map residual of the y row over the extended set
  double lambda_row = 0.0;  // natural-map residual of the lambda row over R_+^{mN}
  double y_consensus = 0.0;       // ||(B^T (x) I_n) y||
  double lambda_consensus = 0.0;  // ||(B^T (x) I_m) lambda||

  double total() const;
};

/// Measures how far w is from satisfying 0 in T(w).
TResidual t_residual_parts(const Game& game, const Graph& graph, const StepSizes& steps,
                           const AugmentedState& w);
double t_residual(const Game& game, const Graph& graph, const StepSizes& steps,
                  const AugmentedState& w);

/// Builds a zero of T from a v-GNE (x, lambda): consensus copies of x and
/// lambda, with mu and z the minimum-norm least-squares solutions of the
/// y and lambda rows.
AugmentedState zero_from_vgne(const Game& game, const Graph& graph, const GraphAlgebra& algebra,
                              const Eigen::VectorXd& x, const Eigen::VectorXd& lambda);

/// Per-iteration convergence metrics. avg_norm_dist is NaN without a reference.
struct MetricsRecord {
  std::size_t iter = 0;
  double avg_norm_dist = std::numeric_limits<double>::quiet_NaN();
  double rel_step = 0.0;
  double y_consensus = 0.0;
  double lambda_consensus = 0.0;
  double kkt_stationarity = 0.0;
  double kkt_primal = 0.0;
  double kkt_dual = 0.0;
  double kkt_compl = 0.0;
  double t_residual = 0.0;  // not part of the CSV
};

/// sum_l ( (1/N) sum_j ([v_j]_l - [mean]_l)^2 )^(1/2)
double consensus_spread(std::span<const Eigen::VectorXd> values);
Eigen::VectorXd network_mean(std::span<const Eigen::VectorXd> values);

struct RunOptions {
  std::optional<Eigen::VectorXd> reference;             // v-GNE for avg_norm_dist
  std::optional<AugmentedState> fejer_reference;        // records ||w~^k - w~*||_Phi
  std::function<void(const MetricsRecord&)> on_iteration;
};

enum class RunStatus { Converged, MaxItersExceeded };

struct RunResult {
  std::vector<MetricsRecord> trajectory;  // record k describes the state after k rounds
  AugmentedState omega;                   // final resolvent output
  AugmentedState shadow;                  // final governing sequence
  std::size_t iterations = 0;
  RunStatus status = RunStatus::MaxItersExceeded;
  bool certified = false;                 // KKT, consensus and T residuals within certify_tol
  double certificate = 0.0;
  std::vector<double> fejer_distances;    // filled when fejer_reference is set
};

/// Iterates dr_round from `initial` until the relative step or the
/// certificate falls below tolerance, or max_iters rounds have run.
RunResult run(const Game& game, const Graph& graph, const StepSizes& steps, const DRConfig& cfg,
              const AugmentedState& initial, const RunOptions& options = {});

/// Metrics of a resolvent output w against the previous and current shadow.
MetricsRecord compute_metrics(const Game& game, const Graph& graph, const StepSizes& steps,
                              std::size_t iter, const AugmentedState& omega, double rel_step,
                              const std::optional<Eigen::VectorXd>& reference);

/// The certificate used for stopping: worst of the KKT parts, both consensus
/// spreads and the T residual.
double certificate_of(const MetricsRecord& r);

}  // namespace dgne
