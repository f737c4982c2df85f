#include "dgne/game.hpp"

#include <cmath>
#include <sstream>

#include "dgne/errors.hpp"

namespace dgne {

std::vector<Eigen::VectorXd> split_b(const Eigen::VectorXd& b, std::size_t num_players,
                                     const BSplit& scheme) {
  if (num_players == 0) throw InvalidGame("split_b: no players");
  std::vector<Eigen::VectorXd> parts;
  switch (scheme.kind) {
    case BSplit::Kind::Uniform: {
      Eigen::VectorXd running = Eigen::VectorXd::Zero(b.size());
      const double share = 1.0 / static_cast<double>(num_players);
      for (std::size_t i = 0; i + 1 < num_players; ++i) {
        parts.push_back(b * share);
        running += parts.back();
      }
      // running >= b/2 for N >= 2, so b - running is exact and the sum restores b.
      parts.push_back(b - running);
      break;
    }
    case BSplit::Kind::FirstPlayer:
      parts.push_back(b);
      for (std::size_t i = 1; i < num_players; ++i) parts.push_back(Eigen::VectorXd::Zero(b.size()));
      break;
    case BSplit::Kind::Custom: {
      if (scheme.custom.size() != num_players) {
        throw CustomSplitSumMismatch("custom b split has " + std::to_string(scheme.custom.size()) +
                                     " parts for " + std::to_string(num_players) + " players");
      }
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(b.size());
      for (const auto& p : scheme.custom) {
        if (p.size() != b.size()) throw CustomSplitSumMismatch("custom b split part has wrong length");
        sum += p;
      }
      if (sum != b) {
        std::ostringstream os;
        os << "custom b split sums to [" << sum.transpose() << "], expected [" << b.transpose()
           << "]";
        throw CustomSplitSumMismatch(os.str());
      }
      parts = scheme.custom;
      break;
    }
  }
  return parts;
}

Game::Game(std::vector<PlayerSpec> players, Eigen::VectorXd b, const BSplit& split,
           std::optional<AffineMap> affine)
    : players_(std::move(players)), b_(std::move(b)), affine_(std::move(affine)) {
  if (players_.empty()) throw InvalidGame("game has no players");
  m_ = b_.size();
  for (std::size_t i = 0; i < players_.size(); ++i) {
    const PlayerSpec& p = players_[i];
    const std::string who = "player " + std::to_string(i);
    if (p.dim <= 0) throw InvalidGame(who + " has non-positive dimension");
    if (p.coupling.rows() != m_ || p.coupling.cols() != p.dim) {
      throw InvalidGame(who + ": coupling matrix must be " + std::to_string(m_) + " x " +
                        std::to_string(p.dim));
    }
    if (!p.project || !p.objective || !p.own_subgradient) {
      throw InvalidGame(who + " is missing a projection, objective or subgradient oracle");
    }
    if (p.box && (p.box->lower.size() != p.dim || p.box->upper.size() != p.dim ||
                  (p.box->lower.array() > p.box->upper.array()).any())) {
      throw InvalidGame(who + " has an inconsistent box");
    }
    offsets_.push_back(n_);
    n_ += p.dim;
  }
  coupling_.resize(m_, n_);
  for (std::size_t i = 0; i < players_.size(); ++i) {
    coupling_.middleCols(offsets_[i], players_[i].dim) = players_[i].coupling;
  }
  if (affine_ && (affine_->matrix.rows() != n_ || affine_->matrix.cols() != n_ ||
                  affine_->offset.size() != n_)) {
    throw InvalidGame("affine pseudogradient has the wrong shape");
  }
  b_split_ = split_b(b_, players_.size(), split);
}

bool Game::has_boxes() const {
  for (const auto& p : players_) {
    if (!p.box) return false;
  }
  return true;
}

Box Game::joint_box() const {
  if (!has_boxes()) throw InvalidGame("not every player has a box feasible set");
  Box box{Eigen::VectorXd(n_), Eigen::VectorXd(n_)};
  for (std::size_t i = 0; i < players_.size(); ++i) {
    box.lower.segment(offsets_[i], players_[i].dim) = players_[i].box->lower;
    box.upper.segment(offsets_[i], players_[i].dim) = players_[i].box->upper;
  }
  return box;
}

Eigen::VectorXd Game::project_omega(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(n_);
  for (std::size_t i = 0; i < players_.size(); ++i) {
    out.segment(offsets_[i], players_[i].dim) =
        players_[i].project(x.segment(offsets_[i], players_[i].dim));
  }
  return out;
}

Eigen::VectorXd Game::local_argmin(std::size_t i, const Eigen::VectorXd& profile,
                                   const Eigen::VectorXd& linear, const Eigen::VectorXd& center,
                                   double prox_weight) const {
  const PlayerSpec& p = players_[i];
  if (p.local_argmin) return p.local_argmin(profile, linear, center, prox_weight);
  return projected_gradient_argmin(p, offsets_[i], profile, linear, center, prox_weight);
}

Eigen::VectorXd select_own(const Game& game, const Eigen::VectorXd& y, std::size_t i) {
  return y.segment(game.offset(i), game.player_dim(i));
}

Eigen::VectorXd embed_own(const Game& game, const Eigen::VectorXd& g, std::size_t i) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(game.dim());
  out.segment(game.offset(i), game.player_dim(i)) = g;
  return out;
}

Eigen::VectorXd pseudogradient(const Game& game, const Eigen::VectorXd& x) {
  Eigen::VectorXd out(game.dim());
  for (std::size_t i = 0; i < game.num_players(); ++i) {
    out.segment(game.offset(i), game.player_dim(i)) = game.player(i).own_subgradient(x);
  }
  return out;
}

Eigen::VectorXd extended_pseudogradient(const Game& game, std::span<const Eigen::VectorXd> ystack) {
  Eigen::VectorXd out(game.dim());
  for (std::size_t i = 0; i < game.num_players(); ++i) {
    out.segment(game.offset(i), game.player_dim(i)) = game.player(i).own_subgradient(ystack[i]);
  }
  return out;
}

double KktResidual::max() const {
  return std::max({stationarity, primal, dual, compl_slack});
}

KktResidual kkt_residual(const Game& game, const Eigen::VectorXd& x, const Eigen::VectorXd& lambda) {
  const Eigen::MatrixXd& a = game.coupling();
  const Eigen::VectorXd step = pseudogradient(game, x) + a.transpose() * lambda;
  const Eigen::VectorXd slack = game.b() - a * x;
  KktResidual r;
  r.stationarity = (x - game.project_omega(x - step)).norm();
  r.primal = (-slack).cwiseMax(0.0).norm();
  r.dual = lambda.cwiseMin(0.0).norm();
  r.compl_slack = std::abs(lambda.dot(slack));
  return r;
}

AugmentedState AugmentedState::zeros(const Game& game, const Graph& graph) {
  AugmentedState s;
  s.y.assign(game.num_players(), Eigen::VectorXd::Zero(game.dim()));
  s.lambda.assign(game.num_players(), Eigen::VectorXd::Zero(game.num_constraints()));
  s.mu.assign(graph.num_edges(), Eigen::VectorXd::Zero(game.dim()));
  s.z.assign(graph.num_edges(), Eigen::VectorXd::Zero(game.num_constraints()));
  return s;
}

namespace {

template <typename F>
void for_each_block(AugmentedState& s, F&& f) {
  for (auto* stack : {&s.y, &s.lambda, &s.mu, &s.z}) {
    for (auto& v : *stack) f(v);
  }
}

template <typename F>
void for_each_block(const AugmentedState& s, F&& f) {
  for (const auto* stack : {&s.y, &s.lambda, &s.mu, &s.z}) {
    for (const auto& v : *stack) f(v);
  }
}

template <typename F>
void zip_blocks(AugmentedState& a, const AugmentedState& b, F&& f) {
  Stack* lhs[] = {&a.y, &a.lambda, &a.mu, &a.z};
  const Stack* rhs[] = {&b.y, &b.lambda, &b.mu, &b.z};
  for (int k = 0; k < 4; ++k) {
    for (std::size_t j = 0; j < lhs[k]->size(); ++j) f((*lhs[k])[j], (*rhs[k])[j]);
  }
}

}  // namespace

Eigen::Index AugmentedState::size() const {
  Eigen::Index total = 0;
  for_each_block(*this, [&](const Eigen::VectorXd& v) { total += v.size(); });
  return total;
}

Eigen::VectorXd AugmentedState::flatten() const {
  Eigen::VectorXd flat(size());
  Eigen::Index pos = 0;
  for_each_block(*this, [&](const Eigen::VectorXd& v) {
    flat.segment(pos, v.size()) = v;
    pos += v.size();
  });
  return flat;
}

AugmentedState AugmentedState::unflatten(const Game& game, const Graph& graph,
                                         const Eigen::VectorXd& flat) {
  AugmentedState s = zeros(game, graph);
  if (flat.size() != s.size()) throw std::invalid_argument("unflatten: size mismatch");
  Eigen::Index pos = 0;
  for_each_block(s, [&](Eigen::VectorXd& v) {
    v = flat.segment(pos, v.size());
    pos += v.size();
  });
  return s;
}

double AugmentedState::norm() const {
  double sq = 0.0;
  for_each_block(*this, [&](const Eigen::VectorXd& v) { sq += v.squaredNorm(); });
  return std::sqrt(sq);
}

AugmentedState& AugmentedState::operator+=(const AugmentedState& o) {
  zip_blocks(*this, o, [](Eigen::VectorXd& a, const Eigen::VectorXd& b) { a += b; });
  return *this;
}

AugmentedState& AugmentedState::operator-=(const AugmentedState& o) {
  zip_blocks(*this, o, [](Eigen::VectorXd& a, const Eigen::VectorXd& b) { a -= b; });
  return *this;
}

AugmentedState& AugmentedState::operator*=(double s) {
  for_each_block(*this, [&](Eigen::VectorXd& v) { v *= s; });
  return *this;
}

AugmentedState operator+(AugmentedState a, const AugmentedState& b) { return a += b; }
AugmentedState operator-(AugmentedState a, const AugmentedState& b) { return a -= b; }
AugmentedState operator*(double s, AugmentedState a) { return a *= s; }

Eigen::VectorXd projected_gradient_argmin(const PlayerSpec& player, Eigen::Index offset,
                                          const Eigen::VectorXd& profile,
                                          const Eigen::VectorXd& linear,
                                          const Eigen::VectorXd& center, double prox_weight,
                                          double tol, int max_iters) {
  Eigen::VectorXd work = profile;
  auto gradient = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    work.segment(offset, player.dim) = v;
    return player.own_subgradient(work) + linear + prox_weight * (v - center);
  };

  // Backtracking on a gradient-difference curvature test; unlike an Armijo test on
  // objective values it does not stall on cancellation near the minimiser.
  Eigen::VectorXd v = player.project(center);
  Eigen::VectorXd g = gradient(v);
  double step = prox_weight > 0.0 ? 1.0 / prox_weight : 1.0;
  for (int it = 0; it < max_iters; ++it) {
    if ((v - player.project(v - g)).norm() <= tol * (1.0 + v.norm())) return v;
    step *= 2.0;
    for (int ls = 0; ls < 60; ++ls) {
      const Eigen::VectorXd cand = player.project(v - step * g);
      const Eigen::VectorXd d = cand - v;
      const Eigen::VectorXd gc = gradient(cand);
      if ((gc - g).dot(d) <= d.squaredNorm() / step || ls == 59) {
        v = cand;
        g = gc;
        break;
      }
      step *= 0.5;
    }
  }
  throw LocalArgminFailure("projected-gradient local argmin did not reach tolerance");
}

}  // namespace dgne
