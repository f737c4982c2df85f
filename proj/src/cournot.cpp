#include "dgne/cournot.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <set>

#include "dgne/dense.hpp"
#include "dgne/errors.hpp"

namespace dgne::cournot {

Eigen::Index Instance::dim() const {
  Eigen::Index n = 0;
  for (const auto& f : firms) n += f.dim();
  return n;
}

Eigen::MatrixXd Instance::market_map(std::size_t i) const {
  const Firm& f = firms[i];
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(num_markets(), f.dim());
  for (Eigen::Index j = 0; j < f.dim(); ++j) {
    a(static_cast<Eigen::Index>(f.markets[static_cast<std::size_t>(j)]), j) = 1.0;
  }
  return a;
}

Eigen::MatrixXd Instance::market_map() const {
  Eigen::MatrixXd a(num_markets(), dim());
  Eigen::Index off = 0;
  for (std::size_t i = 0; i < firms.size(); ++i) {
    a.middleCols(off, firms[i].dim()) = market_map(i);
    off += firms[i].dim();
  }
  return a;
}

void validate(const Instance& inst) {
  const Eigen::Index m = inst.num_markets();
  if (inst.firms.empty()) throw InvalidGame("market has no firms");
  if (m == 0) throw InvalidGame("market has no capacity constraints");
  if (inst.price_intercept.size() != m || inst.price_slope.size() != m) {
    throw InvalidGame("w, Sigma and b must all have one entry per market");
  }
  if ((inst.price_intercept.array() <= 0.0).any()) throw InvalidGame("w must be positive");
  if ((inst.price_slope.array() <= 0.0).any()) throw InvalidGame("Sigma must be positive");
  if ((inst.capacity.array() <= 0.0).any()) throw InvalidGame("b must be positive");
  for (std::size_t i = 0; i < inst.firms.size(); ++i) {
    const Firm& f = inst.firms[i];
    const std::string who = "firm " + std::to_string(i);
    if (f.markets.empty()) throw InvalidGame(who + " supplies no market");
    std::set<std::size_t> seen;
    for (std::size_t k : f.markets) {
      if (k >= static_cast<std::size_t>(m)) throw InvalidGame(who + " references an unknown market");
      if (!seen.insert(k).second) throw InvalidGame(who + " lists a market twice");
    }
    const Eigen::Index ni = f.dim();
    if (f.cost_quadratic.size() != ni || f.cost_linear.size() != ni || f.production_cap.size() != ni) {
      throw InvalidGame(who + ": cost and capacity vectors must match the market count");
    }
    if ((f.cost_quadratic.array() <= 0.0).any()) throw InvalidGame(who + ": Q must be positive");
    if ((f.production_cap.array() <= 0.0).any()) {
      throw InvalidGame(who + ": production caps must be positive");
    }
  }
}

namespace {

void check_interval(const Interval& iv, const char* name) {
  if (!(iv.lo <= iv.hi)) {
    throw InvalidInterval(std::string("interval ") + name + " has lower bound " +
                          std::to_string(iv.lo) + " above upper bound " + std::to_string(iv.hi));
  }
}

}  // namespace

Instance sample_instance(std::uint64_t seed, const SamplingParams& p) {
  check_interval(p.capacity, "capacity");
  check_interval(p.price_intercept, "price_intercept");
  check_interval(p.price_slope, "price_slope");
  check_interval(p.cost_quadratic, "cost_quadratic");
  check_interval(p.cost_linear, "cost_linear");
  check_interval(p.production_cap, "production_cap");
  if (p.num_players == 0 || p.num_markets == 0) {
    throw InvalidInterval("need at least one player and one market");
  }
  if (p.min_markets_per_player == 0 || p.min_markets_per_player > p.max_markets_per_player ||
      p.max_markets_per_player > p.num_markets) {
    throw InvalidInterval("markets per player must satisfy 1 <= min <= max <= num_markets");
  }

  std::mt19937_64 rng(seed);
  auto uniform_vector = [&](const Interval& iv, std::size_t count) {
    std::uniform_real_distribution<double> dist(iv.lo, iv.hi);
    Eigen::VectorXd v(static_cast<Eigen::Index>(count));
    for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = iv.lo == iv.hi ? iv.lo : dist(rng);
    return v;
  };

  Instance inst;
  inst.capacity = uniform_vector(p.capacity, p.num_markets);
  inst.price_intercept = uniform_vector(p.price_intercept, p.num_markets);
  inst.price_slope = uniform_vector(p.price_slope, p.num_markets);

  std::uniform_int_distribution<std::size_t> count_dist(p.min_markets_per_player,
                                                        p.max_markets_per_player);
  for (std::size_t i = 0; i < p.num_players; ++i) {
    Firm f;
    const std::size_t ni = count_dist(rng);
    std::vector<std::size_t> pool(p.num_markets);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t j = 0; j < ni; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, p.num_markets - 1);
      std::swap(pool[j], pool[pick(rng)]);
    }
    f.markets.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(ni));
    f.cost_quadratic = uniform_vector(p.cost_quadratic, ni);
    f.cost_linear = uniform_vector(p.cost_linear, ni);
    f.production_cap = uniform_vector(p.production_cap, ni);
    inst.firms.push_back(std::move(f));
  }
  validate(inst);
  return inst;
}

AffineMap assemble_F(const Instance& inst) {
  const Eigen::MatrixXd a = inst.market_map();
  const Eigen::MatrixXd sigma_a = inst.price_slope.asDiagonal() * a;
  AffineMap f;
  f.matrix = a.transpose() * sigma_a;
  f.offset.resize(inst.dim());
  Eigen::Index off = 0;
  for (std::size_t i = 0; i < inst.firms.size(); ++i) {
    const Firm& firm = inst.firms[i];
    const Eigen::MatrixXd ai = inst.market_map(i);
    const Eigen::Index ni = firm.dim();
    f.matrix.block(off, off, ni, ni) +=
        Eigen::MatrixXd(2.0 * firm.cost_quadratic.asDiagonal()) +
        ai.transpose() * inst.price_slope.asDiagonal() * ai;
    f.offset.segment(off, ni) = firm.cost_linear - ai.transpose() * inst.price_intercept;
    off += ni;
  }
  return f;
}

namespace {

// Shared read-only market data captured by the player oracles.
struct MarketData {
  Instance inst;
  std::vector<Eigen::Index> offsets;

  Eigen::VectorXd supply(const Eigen::VectorXd& profile) const {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(inst.num_markets());
    for (std::size_t i = 0; i < inst.firms.size(); ++i) {
      const Firm& f = inst.firms[i];
      for (Eigen::Index j = 0; j < f.dim(); ++j) {
        s(static_cast<Eigen::Index>(f.markets[static_cast<std::size_t>(j)])) += profile(offsets[i] + j);
      }
    }
    return s;
  }

  // Gathers a market-indexed vector onto firm i's decision coordinates (A_i^T v).
  Eigen::VectorXd gather(std::size_t i, const Eigen::VectorXd& per_market) const {
    const Firm& f = inst.firms[i];
    Eigen::VectorXd out(f.dim());
    for (Eigen::Index j = 0; j < f.dim(); ++j) {
      out(j) = per_market(static_cast<Eigen::Index>(f.markets[static_cast<std::size_t>(j)]));
    }
    return out;
  }
};

}  // namespace

Game make_game(const Instance& inst, const BSplit& split) {
  validate(inst);
  auto data = std::make_shared<MarketData>();
  data->inst = inst;
  Eigen::Index off = 0;
  for (const auto& f : inst.firms) {
    data->offsets.push_back(off);
    off += f.dim();
  }

  std::vector<PlayerSpec> players;
  for (std::size_t i = 0; i < inst.firms.size(); ++i) {
    const Firm& f = inst.firms[i];
    const Eigen::Index ni = f.dim();
    const Eigen::Index oi = data->offsets[i];
    const Box box{Eigen::VectorXd::Zero(ni), f.production_cap};

    PlayerSpec p;
    p.dim = ni;
    p.coupling = inst.market_map(i);
    p.box = box;
    p.project = [box](const Eigen::VectorXd& v) { return box.project(v); };
    p.objective = [data, i, ni, oi](const Eigen::VectorXd& x) {
      const Firm& firm = data->inst.firms[i];
      const Eigen::VectorXd xi = x.segment(oi, ni);
      const Eigen::VectorXd price =
          data->inst.price_intercept - data->inst.price_slope.cwiseProduct(data->supply(x));
      return xi.dot(firm.cost_quadratic.cwiseProduct(xi)) + firm.cost_linear.dot(xi) -
             data->gather(i, price).dot(xi);
    };
    p.own_subgradient = [data, i, ni, oi](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      const Firm& firm = data->inst.firms[i];
      const Eigen::VectorXd xi = x.segment(oi, ni);
      const Eigen::VectorXd own_slope = data->gather(i, data->inst.price_slope);
      const Eigen::VectorXd weighted = data->inst.price_slope.cwiseProduct(data->supply(x));
      return (2.0 * firm.cost_quadratic + own_slope).cwiseProduct(xi) + data->gather(i, weighted) +
             firm.cost_linear - data->gather(i, data->inst.price_intercept);
    };
    p.local_argmin = [data, i, ni, oi, box](const Eigen::VectorXd& profile,
                                            const Eigen::VectorXd& linear,
                                            const Eigen::VectorXd& center, double prox_weight) {
      const Firm& firm = data->inst.firms[i];
      Eigen::VectorXd others = profile;
      others.segment(oi, ni).setZero();
      const Eigen::VectorXd own_slope = data->gather(i, data->inst.price_slope);
      const Eigen::VectorXd other_supply = data->gather(i, data->supply(others));
      // J_i(v) = v^T (Q + diag(s)) v + (q - w_i + s .* other_supply)^T v
      const Eigen::VectorXd hdiag =
          2.0 * (firm.cost_quadratic + own_slope) + Eigen::VectorXd::Constant(ni, prox_weight);
      const Eigen::VectorXd g = firm.cost_linear - data->gather(i, data->inst.price_intercept) +
                                own_slope.cwiseProduct(other_supply) + linear -
                                prox_weight * center;
      return quadratic_box_argmin(Eigen::MatrixXd(hdiag.asDiagonal()), g, box);
    };
    players.push_back(std::move(p));
  }
  return Game(std::move(players), inst.capacity, split, assemble_F(inst));
}

double lemma4_rho_bound(double eta, double theta1, double theta2, double sigma1) {
  if (!(sigma1 > 0.0)) return std::numeric_limits<double>::infinity();
  const double s = theta1 + theta2;
  return (2.0 / sigma1) * (s * s / (4.0 * eta) + theta2);
}

Constants constants(const Game& game, const Graph& graph) {
  if (!game.affine()) throw InvalidGame("constants require an affine pseudogradient");
  const Eigen::MatrixXd& mat = game.affine()->matrix;
  Constants c;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sym(0.5 * (mat + mat.transpose()),
                                                      Eigen::EigenvaluesOnly);
  c.eta = sym.eigenvalues().minCoeff();
  if (!(c.eta > 0.0)) {
    throw NonPositiveEta("pseudogradient is not strongly monotone: eta = " + std::to_string(c.eta));
  }
  c.theta1 = Eigen::JacobiSVD<Eigen::MatrixXd>(mat).singularValues()(0);
  // R (I_N (x) M) is block diagonal with blocks R_i M, so its norm is the largest ||R_i M||.
  for (std::size_t i = 0; i < game.num_players(); ++i) {
    const Eigen::MatrixXd rows = mat.middleRows(game.offset(i), game.player_dim(i));
    c.theta2 = std::max(c.theta2, Eigen::JacobiSVD<Eigen::MatrixXd>(rows).singularValues()(0));
  }
  c.sigma1 = graph_algebra(graph).sigma1;
  c.rho_mu_bound = lemma4_rho_bound(c.eta, c.theta1, c.theta2, c.sigma1);
  return c;
}

Constants constants(const Instance& inst, const Graph& graph) {
  Constants c = constants(make_game(inst), graph);
  const Eigen::Index n = inst.dim();
  c.m_f = Eigen::MatrixXd::Zero(n, n);
  Eigen::Index off = 0;
  for (std::size_t i = 0; i < inst.firms.size(); ++i) {
    const Firm& f = inst.firms[i];
    const Eigen::MatrixXd ai = inst.market_map(i);
    c.m_f.block(off, off, f.dim(), f.dim()) = Eigen::MatrixXd(2.0 * f.cost_quadratic.asDiagonal()) +
                                             ai.transpose() * inst.price_slope.asDiagonal() * ai;
    off += f.dim();
  }
  return c;
}

Eigen::VectorXd quadratic_box_argmin(const Eigen::MatrixXd& h, const Eigen::VectorXd& g,
                                     const Box& box) {
  const Eigen::VectorXd diag = h.diagonal();
  const bool diagonal = (h - Eigen::MatrixXd(diag.asDiagonal())).cwiseAbs().maxCoeff() == 0.0 &&
                        (diag.array() > 0.0).all();
  if (h.size() > 0 && !diagonal) return quadratic_box_argmin_iterative(h, g, box);
  return box.project((-g).cwiseQuotient(diag));
}

Eigen::VectorXd quadratic_box_argmin_iterative(const Eigen::MatrixXd& h, const Eigen::VectorXd& g,
                                               const Box& box, double tol, int max_iters) {
  const double lipschitz = Eigen::JacobiSVD<Eigen::MatrixXd>(h).singularValues()(0);
  const double step = 1.0 / lipschitz;
  Eigen::VectorXd v = box.project(Eigen::VectorXd::Zero(g.size()));
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd grad = h * v + g;
    const Eigen::VectorXd next = box.project(v - step * grad);
    if ((v - box.project(v - grad)).norm() <= tol) return v;
    v = next;
  }
  throw LocalArgminFailure("box QP projected gradient did not reach tolerance");
}

namespace {

Eigen::MatrixXd assumption_a_matrix(const Game& game, const Graph& graph, double rho) {
  const Eigen::MatrixXd mext = dense::extended_jacobian(game);
  const GraphAlgebra alg = graph_algebra(graph);
  return 0.5 * (mext + mext.transpose()) + 0.5 * rho * dense::kron_identity(alg.laplacian, game.dim());
}

}  // namespace

double assumption_a_min_eigenvalue(const Game& game, const Graph& graph, double rho) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(assumption_a_matrix(game, graph, rho),
                                                     Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

bool assumption_a_holds(const Game& game, const Graph& graph, double rho, double tol) {
  Eigen::MatrixXd s = assumption_a_matrix(game, graph, rho);
  s.diagonal().array() += tol;
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  return llt.info() == Eigen::Success;
}

double assumption_a_rho(const Game& game, const Graph& graph, double ceiling, double resolution) {
  double lo = 2.0;
  if (assumption_a_holds(game, graph, lo)) return lo;
  double hi = 4.0;
  while (!assumption_a_holds(game, graph, hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > ceiling) {
      if (assumption_a_holds(game, graph, ceiling)) {
        hi = ceiling;
        break;
      }
      throw SearchCeilingExceeded("no rho_mu up to " + std::to_string(ceiling) +
                                  " makes the extended pseudogradient monotone");
    }
  }
  while (hi - lo > resolution) {
    const double mid = 0.5 * (lo + hi);
    (assumption_a_holds(game, graph, mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace dgne::cournot
