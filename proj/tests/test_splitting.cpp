#include <doctest.h>

#include <cmath>
#include <random>

#include "dgne/cournot.hpp"
#include "dgne/dense.hpp"
#include "dgne/errors.hpp"
#include "dgne/oracle.hpp"
#include "dgne/splitting.hpp"
#include "support/dense_oracle.hpp"
#include "support/hand_matrices.hpp"

using namespace dgne;

namespace {

struct HandBounds {
  Eigen::VectorXd tau1, tau2;
};

// Right-hand sides of the step-size inequalities, straight from the norms and degrees.
HandBounds hand_bounds(const Game& game, const Graph& graph, double rho_mu, double rho_z) {
  const auto np = static_cast<Eigen::Index>(game.num_players());
  HandBounds h{Eigen::VectorXd(np), Eigen::VectorXd(np)};
  for (std::size_t i = 0; i < game.num_players(); ++i) {
    const Eigen::MatrixXd& a = game.player(i).coupling;
    const double col = a.cwiseAbs().colwise().sum().maxCoeff();
    const double row = a.cwiseAbs().rowwise().sum().maxCoeff();
    const auto d = static_cast<double>(graph.degree(i));
    h.tau1(static_cast<Eigen::Index>(i)) = 0.5 * col + (0.5 + rho_mu) * d;
    h.tau2(static_cast<Eigen::Index>(i)) = 0.5 * row + (0.5 + rho_z) * d;
  }
  return h;
}

using testing::incidence_by_hand;
using testing::kron_i;
using testing::lambda_r_by_hand;
using testing::phi_by_hand;

double max_abs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double state_diff(const AugmentedState& a, const AugmentedState& b) {
  return (a.flatten() - b.flatten()).lpNorm<Eigen::Infinity>();
}

// Three single-market-or-two firms on a directed 3-cycle; firm 0 sits in market 0 only.
testing::SmallCase cycle_case(double rho_mu, double rho_z, double margin) {
  cournot::Instance inst;
  inst.firms.push_back(testing::scalar_firm(1.0, 0.1, 1.0, 0));
  inst.firms.push_back(testing::scalar_firm(1.1, 0.2, 1.0, 1));
  cournot::Firm f;
  f.markets = {0, 1};
  f.cost_quadratic = Eigen::Vector2d(1.2, 1.3);
  f.cost_linear = Eigen::Vector2d(0.3, 0.2);
  f.production_cap = Eigen::Vector2d(0.4, 0.5);
  inst.firms.push_back(f);
  inst.price_intercept = Eigen::Vector2d(3.0, 2.5);
  inst.price_slope = Eigen::Vector2d(0.6, 0.5);
  inst.capacity = Eigen::Vector2d(0.6, 0.7);
  Game game = cournot::make_game(inst);
  Graph graph = build_graph(3, {{0, 1}, {1, 2}, {2, 0}});
  StepSizes steps = lemma1_step_sizes(game, graph, rho_mu, rho_z, margin);
  return {std::move(inst), std::move(game), std::move(graph), std::move(steps)};
}

// A tightly converged governing sequence, for Fejer and fixed-point checks.
AugmentedState converged_shadow(const testing::SmallCase& c, std::size_t iters = 200000) {
  DRConfig cfg;
  cfg.max_iters = iters;
  cfg.stop_tol = 1e-16;
  cfg.cert_tol = 0.0;
  return run(c.game, c.graph, c.steps, cfg, AugmentedState::zeros(c.game, c.graph)).shadow;
}

}  // namespace

TEST_CASE("step sizes from the diagonal dominance bounds") {
  const testing::SmallCase c = cycle_case(1.0, 1.0, 1e-9);
  REQUIRE(c.graph.degree(0) == 2);
  REQUIRE(c.game.player(0).coupling == Eigen::Vector2d(1, 0));
  CHECK(c.steps.tau1(0) < 1.0 / 3.5);
  CHECK(c.steps.tau1(0) == doctest::Approx(1.0 / 3.5).epsilon(1e-8));
  CHECK(c.steps.tau2(0) == doctest::Approx(1.0 / 3.5).epsilon(1e-8));
  const testing::SmallCase wide = cycle_case(1.0, 1.0, 0.25);
  for (Eigen::Index e = 0; e < 3; ++e) {
    CHECK(wide.steps.tau3(e) == doctest::Approx(1.0 / 1.25).epsilon(1e-15));
    CHECK(wide.steps.tau4(e) == doctest::Approx(1.0 / 1.25).epsilon(1e-15));
  }
  CHECK(lemma1_violations(c.game, c.graph, c.steps).empty());
  CHECK_THROWS_AS(lemma1_step_sizes(c.game, c.graph, 1.0, 1.0, 0.0), NonpositiveMargin);
  CHECK_THROWS_AS(lemma1_step_sizes(c.game, c.graph, 1.0, 1.0, -0.1), NonpositiveMargin);

  StepSizes bad = c.steps;
  bad.tau3(1) = 1.0;
  CHECK(lemma1_violations(c.game, c.graph, bad).size() == 1);
}

TEST_CASE("margin step sizes against the hand formula") {
  std::mt19937_64 rng(40);
  for (int trial = 0; trial < 50; ++trial) {
    const testing::SmallCase c = testing::random_case(rng);
    const HandBounds h = hand_bounds(c.game, c.graph, c.steps.rho_mu, c.steps.rho_z);
    const double ratio = (1.0 / c.steps.tau1(0)) / h.tau1(0);
    for (Eigen::Index i = 0; i < h.tau1.size(); ++i) {
      CHECK(1.0 / c.steps.tau1(i) > h.tau1(i));
      CHECK(1.0 / c.steps.tau2(i) > h.tau2(i));
      CHECK((1.0 / c.steps.tau1(i)) / h.tau1(i) == doctest::Approx(ratio).epsilon(1e-12));
    }
  }
}

TEST_CASE("fixed step sizes against the hand formula") {
  int feasible = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const cournot::Instance inst = cournot::sample_instance(seed);
    const Game game = cournot::make_game(inst);
    const Graph graph = random_experiment_graph(seed, inst.num_players(), 10);
    const StepSizes s = StepSizes::uniform(game, graph, 0.002, 0.1, 0.5, 0.5, 115.0, 1.0);
    const HandBounds h = hand_bounds(game, graph, 115.0, 1.0);
    const bool hand_ok = (h.tau1.array() < 500.0).all() && (h.tau2.array() < 10.0).all();
    CHECK(lemma1_violations(game, graph, s).empty() == hand_ok);
    feasible += hand_ok ? 1 : 0;
  }
  MESSAGE("fixed steps feasible on " << feasible << " of 20 seeded instances");
}

TEST_CASE("design matrix structure") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const testing::SmallCase c = testing::random_case(rng);
    const Eigen::MatrixXd phi = dense::build_phi(c.game, c.graph, c.steps);
    CHECK(max_abs(phi - phi.transpose()) <= 1e-12);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(phi).eigenvalues().minCoeff() > 0.0);
    CHECK(max_abs(phi - phi_by_hand(c.game, c.graph, c.steps)) <= 1e-12);

    const Eigen::MatrixXd d = dense::build_d(c.game, c.graph);
    CHECK(max_abs(d + d.transpose()) == 0.0);

    const dense::Layout l = dense::layout(c.game, c.graph);
    const Eigen::MatrixXd pd = phi + d;
    CHECK(max_abs(pd.block(l.y, l.lambda, l.ny, l.nlambda)) == 0.0);
    CHECK(max_abs(pd.block(l.y, l.mu, l.ny, l.nmu)) == 0.0);
    CHECK(max_abs(pd.block(l.lambda, l.z, l.nlambda, l.nz)) == 0.0);
    CHECK(max_abs(pd.block(l.y, l.z, l.ny, l.nz)) == 0.0);
    CHECK(max_abs(pd.block(l.lambda, l.mu, l.nlambda, l.nmu)) == 0.0);
    CHECK(max_abs(pd.block(l.mu, l.z, l.nmu, l.nz)) == 0.0);

    const Eigen::MatrixXd pb = phi + dense::build_b_operator(c.game, c.graph, c.steps);
    CHECK(max_abs(pb.block(l.y, l.lambda, l.ny, l.nlambda)) <= 1e-15);
    CHECK(max_abs(pb.block(l.y, l.mu, l.ny, l.nmu)) <= 1e-15);
    CHECK(max_abs(pb.block(l.lambda, l.z, l.nlambda, l.nz)) <= 1e-15);
  }
}

TEST_CASE("inverted step inequalities can break positive definiteness") {
  std::mt19937_64 rng(42);
  int broken = 0;
  for (int trial = 0; trial < 20; ++trial) {
    testing::SmallCase c = testing::random_case(rng);
    c.steps.tau1 *= 4.0 * (1.0 + 1.0 / c.steps.tau1.minCoeff());
    const Eigen::MatrixXd phi = dense::build_phi(c.game, c.graph, c.steps);
    broken += Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(phi).eigenvalues().minCoeff() <= 0.0 ? 1 : 0;
  }
  MESSAGE("tau1 inflated: " << broken << " of 20 design matrices lost definiteness");
}

TEST_CASE("phi norm") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    const testing::SmallCase c = testing::random_case(rng);
    CHECK(phi_norm(c.game, c.graph, c.steps, AugmentedState::zeros(c.game, c.graph)) == 0.0);
    const AugmentedState w = testing::random_state(c.game, c.graph, rng);
    const Eigen::VectorXd f = w.flatten();
    const double dense_sq = f.dot(phi_by_hand(c.game, c.graph, c.steps) * f);
    const double got = phi_norm(c.game, c.graph, c.steps, w);
    CHECK(got > 0.0);
    CHECK(got * got == doctest::Approx(dense_sq).epsilon(1e-10));
  }
}

TEST_CASE("phi norm flags an indefinite metric") {
  testing::SmallCase c = cycle_case(5.0, 1.0, 0.1);
  c.steps.tau1.setConstant(10.0);
  const Eigen::MatrixXd phi = dense::build_phi(c.game, c.graph, c.steps);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(phi);
  REQUIRE(eig.eigenvalues()(0) < 0.0);
  const AugmentedState w = AugmentedState::unflatten(c.game, c.graph, eig.eigenvectors().col(0));
  CHECK(phi_quadratic_form(c.game, c.graph, c.steps, w) == doctest::Approx(eig.eigenvalues()(0)).epsilon(1e-9));
  CHECK_THROWS_AS(phi_norm(c.game, c.graph, c.steps, w), NegativeQuadraticForm);
}

TEST_CASE("resolvent A matches the dense inclusion") {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 40; ++trial) {
    const testing::SmallCase c = testing::random_case(rng);
    for (int k = 0; k < 3; ++k) {
      const AugmentedState shadow = testing::random_state(c.game, c.graph, rng, 0.5);
      const AugmentedState fast = resolvent_A(c.game, c.graph, c.steps, shadow);
      const AugmentedState ref = testing::dense_resolvent_A(c.game, c.graph, c.steps, shadow);
      CHECK(state_diff(fast, ref) <= 1e-10);
      CHECK(testing::resolvent_A_certificate(c.game, c.graph, c.steps, shadow, fast) <= 1e-8);
      for (const auto& l : fast.lambda) CHECK(l.minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("resolvent A from a zero shadow") {
  const testing::SmallCase c = cycle_case(2.0, 1.0, 0.1);
  const AugmentedState w = resolvent_A(c.game, c.graph, c.steps, AugmentedState::zeros(c.game, c.graph));
  // Zero shadow: lambda_i = max(0, tau2_i (A_i y_i^i - b_i)).
  for (std::size_t i = 0; i < c.game.num_players(); ++i) {
    const Eigen::VectorXd own = w.y[i].segment(c.game.offset(i), c.game.player_dim(i));
    const Eigen::VectorXd expect =
        (c.steps.tau2(static_cast<Eigen::Index>(i)) * (c.game.player(i).coupling * own - c.game.b_part(i)))
            .cwiseMax(0.0);
    CHECK((w.lambda[i] - expect).lpNorm<Eigen::Infinity>() <= 1e-15);
  }

  // Pure sweep: repeated calls agree bit for bit.
  std::mt19937_64 rng(45);
  const AugmentedState s = testing::random_state(c.game, c.graph, rng);
  const AugmentedState out = resolvent_A(c.game, c.graph, c.steps, s);
  CHECK(state_diff(resolvent_A(c.game, c.graph, c.steps, s), out) == 0.0);
  CHECK(testing::resolvent_A_certificate(c.game, c.graph, c.steps, s, out) <= 1e-10);
}

TEST_CASE("resolvent B matches the dense linear solve") {
  std::mt19937_64 rng(46);
  for (int trial = 0; trial < 40; ++trial) {
    const testing::SmallCase c = testing::random_case(rng);
    const AugmentedState u = testing::random_state(c.game, c.graph, rng);
    const AugmentedState v = resolvent_B(c.game, c.graph, c.steps, u);
    CHECK(state_diff(v, testing::dense_resolvent_B(c.game, c.graph, c.steps, u)) <= 1e-10);
    const Eigen::MatrixXd phi = phi_by_hand(c.game, c.graph, c.steps);
    const Eigen::MatrixXd bop = dense::build_b_operator(c.game, c.graph, c.steps);
    CHECK((phi * (u.flatten() - v.flatten()) - bop * v.flatten()).lpNorm<Eigen::Infinity>() <= 1e-10);
    const AugmentedState zero = AugmentedState::zeros(c.game, c.graph);
    CHECK(resolvent_B(c.game, c.graph, c.steps, zero).norm() == 0.0);
  }
}

TEST_CASE("resolvent B on a consensus state") {
  std::mt19937_64 rng(47);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    const testing::SmallCase c = testing::random_case(rng);
    AugmentedState u = AugmentedState::zeros(c.game, c.graph);
    Eigen::VectorXd y(c.game.dim()), l(c.game.num_constraints());
    for (Eigen::Index k = 0; k < y.size(); ++k) y(k) = nd(rng);
    for (Eigen::Index k = 0; k < l.size(); ++k) l(k) = nd(rng);
    for (auto& v : u.y) v = y;
    for (auto& v : u.lambda) v = l;
    const AugmentedState v = resolvent_B(c.game, c.graph, c.steps, u);
    for (std::size_t i = 0; i < c.game.num_players(); ++i) {
      Eigen::VectorXd expect = y;
      expect.segment(c.game.offset(i), c.game.player_dim(i)) -=
          c.steps.tau1(static_cast<Eigen::Index>(i)) * 0.5 * c.game.player(i).coupling.transpose() * l;
      CHECK((v.y[i] - expect).lpNorm<Eigen::Infinity>() <= 1e-14);
    }
  }
}

TEST_CASE("dr round matches the dense reflected-resolvent update") {
  std::mt19937_64 rng(48);
  for (int trial = 0; trial < 20; ++trial) {
    const testing::SmallCase c = testing::random_case(rng);
    const AugmentedState s = testing::random_state(c.game, c.graph, rng, 0.5);
    for (double gamma : {0.5, 0.3, 0.8}) {
      const DrRoundResult r = dr_round(c.game, c.graph, c.steps, s, gamma);
      const AugmentedState ja = testing::dense_resolvent_A(c.game, c.graph, c.steps, s);
      const AugmentedState ra = 2.0 * ja - s;
      const AugmentedState rb = 2.0 * testing::dense_resolvent_B(c.game, c.graph, c.steps, ra) - ra;
      const AugmentedState expect = s + gamma * (rb - s);
      CHECK(state_diff(r.omega, ja) <= 1e-10);
      CHECK(state_diff(r.next, expect) <= 1e-10);
    }
  }
}

TEST_CASE("fejer monotonicity on small games") {
  std::mt19937_64 rng(49);
  for (int trial = 0; trial < 5; ++trial) {
    const testing::SmallCase c = testing::random_case(rng);
    const AugmentedState star = converged_shadow(c);
    const DrRoundResult check = dr_round(c.game, c.graph, c.steps, star);
    REQUIRE(state_diff(check.next, star) <= 1e-11);

    DRConfig cfg;
    cfg.max_iters = 2000;
    cfg.stop_tol = 0.0;
    cfg.cert_tol = 0.0;
    RunOptions opts;
    opts.fejer_reference = star;
    const AugmentedState start = testing::random_state(c.game, c.graph, rng, 2.0);
    const RunResult r = run(c.game, c.graph, c.steps, cfg, start, opts);
    REQUIRE(r.fejer_distances.size() == r.trajectory.size());
    REQUIRE(r.fejer_distances.size() > 100);
    for (std::size_t k = 1; k < r.fejer_distances.size(); ++k) {
      CHECK(r.fejer_distances[k] <= r.fejer_distances[k - 1] + 1e-12);
    }
  }
}

TEST_CASE("t residual") {
  const testing::SmallCase c = cycle_case(2.0, 1.0, 0.1);
  const GraphAlgebra alg = graph_algebra(c.graph);
  const OracleSolution sol = centralized_vgne(c.game, default_oracle_step(c.game), 1e-12);
  const AugmentedState zero = zero_from_vgne(c.game, c.graph, alg, sol.x_star, sol.lambda_star);
  const TResidual at_zero = t_residual_parts(c.game, c.graph, c.steps, zero);
  CHECK(at_zero.total() <= 1e-9);
  CHECK(at_zero.y_consensus == 0.0);
  CHECK(at_zero.lambda_consensus == 0.0);

  std::mt19937_64 rng(50);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 20; ++k) {
    AugmentedState off = zero;
    const std::size_t i = rng() % c.game.num_players();
    for (Eigen::Index j = 0; j < off.y[i].size(); ++j) off.y[i](j) += 1e-3 * nd(rng);
    const TResidual parts = t_residual_parts(c.game, c.graph, c.steps, off);
    CHECK(parts.y_consensus > 0.0);
    CHECK(parts.total() > at_zero.total());
  }

  // Shifting the multipliers off the equilibrium value is visible in the residual.
  AugmentedState bumped = zero;
  for (auto& l : bumped.lambda) l.array() += 0.5;
  CHECK(t_residual(c.game, c.graph, c.steps, bumped) > 1e-3);
}

TEST_CASE("zeros of T are v-GNE on random games") {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 10; ++trial) {
    const testing::SmallCase c = testing::random_case(rng);
    const OracleSolution sol = centralized_vgne(c.game, default_oracle_step(c.game), 1e-12);
    const AugmentedState w = zero_from_vgne(c.game, c.graph, graph_algebra(c.graph), sol.x_star, sol.lambda_star);
    CHECK(t_residual(c.game, c.graph, c.steps, w) <= 1e-8);

    // Forward direction: a converged run lands on consensus and on the v-GNE.
    DRConfig cfg;
    cfg.max_iters = 200000;
    cfg.cert_tol = 1e-9;
    const RunResult r = run(c.game, c.graph, c.steps, cfg, AugmentedState::zeros(c.game, c.graph));
    CHECK(r.status == RunStatus::Converged);
    CHECK(r.certified);
    CHECK(t_residual(c.game, c.graph, c.steps, r.omega) <= 1e-6);
    for (const auto& y : r.omega.y) CHECK((y - sol.x_star).lpNorm<Eigen::Infinity>() <= 1e-6);
    const KktResidual kkt = kkt_residual(c.game, network_mean(r.omega.y), network_mean(r.omega.lambda));
    CHECK(kkt.max() <= 1e-6);
  }
}

TEST_CASE("consensus spread") {
  const Stack same{Eigen::Vector2d(1, 2), Eigen::Vector2d(1, 2)};
  CHECK(consensus_spread(same) == 0.0);
  const Stack two{Eigen::Vector2d(0, 0), Eigen::Vector2d(2, 4)};
  // Per coordinate: population std of {0,2} is 1 and of {0,4} is 2.
  CHECK(consensus_spread(two) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(network_mean(two) == Eigen::Vector2d(1, 2));
}

TEST_CASE("run bookkeeping") {
  const testing::SmallCase c = cycle_case(2.0, 1.0, 0.1);
  DRConfig none;
  none.max_iters = 0;
  const RunResult empty = run(c.game, c.graph, c.steps, none, AugmentedState::zeros(c.game, c.graph));
  CHECK(empty.trajectory.size() == 1);
  CHECK(empty.iterations == 0);
  CHECK(empty.status == RunStatus::MaxItersExceeded);

  const AugmentedState star = converged_shadow(c);
  DRConfig cfg;
  cfg.cert_tol = 0.0;
  const RunResult from_star = run(c.game, c.graph, c.steps, cfg, star);
  CHECK(from_star.iterations == 1);
  CHECK(from_star.status == RunStatus::Converged);
  CHECK(from_star.certified);

  DRConfig seq;
  seq.max_iters = 300;
  seq.cert_tol = 0.0;
  DRConfig par = seq;
  par.workers = 3;
  const RunResult a = run(c.game, c.graph, c.steps, seq, AugmentedState::zeros(c.game, c.graph));
  const RunResult b = run(c.game, c.graph, c.steps, par, AugmentedState::zeros(c.game, c.graph));
  CHECK(state_diff(a.shadow, b.shadow) <= 1e-12);
  CHECK(a.trajectory.size() == 301);
  for (std::size_t k = 0; k < a.trajectory.size(); ++k) CHECK(a.trajectory[k].iter == k);

  std::size_t seen = 0;
  RunOptions opts;
  opts.on_iteration = [&](const MetricsRecord&) { ++seen; };
  run(c.game, c.graph, c.steps, seq, AugmentedState::zeros(c.game, c.graph), opts);
  CHECK(seen == 301);

  RunOptions with_ref;
  with_ref.reference = centralized_vgne(c.game).x_star;
  const RunResult refd = run(c.game, c.graph, c.steps, seq, AugmentedState::zeros(c.game, c.graph), with_ref);
  CHECK(std::isfinite(refd.trajectory.back().avg_norm_dist));
  CHECK(std::isnan(a.trajectory.back().avg_norm_dist));
}
