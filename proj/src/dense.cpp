#include "dgne/dense.hpp"

#include <stdexcept>

#include "dgne/errors.hpp"

namespace dgne::dense {

Layout layout(const Game& game, const Graph& graph) {
  const auto np = static_cast<Eigen::Index>(game.num_players());
  const auto ne = static_cast<Eigen::Index>(graph.num_edges());
  Layout l;
  l.ny = game.dim() * np;
  l.nlambda = game.num_constraints() * np;
  l.nmu = game.dim() * ne;
  l.nz = game.num_constraints() * ne;
  l.y = 0;
  l.lambda = l.ny;
  l.mu = l.lambda + l.nlambda;
  l.z = l.mu + l.nmu;
  l.total = l.z + l.nz;
  return l;
}

Eigen::MatrixXd kron_identity(const Eigen::MatrixXd& m, Eigen::Index k) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows() * k, m.cols() * k);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (m(r, c) != 0.0) out.block(r * k, c * k, k, k).diagonal().setConstant(m(r, c));
    }
  }
  return out;
}

Eigen::MatrixXd lambda_r(const Game& game) {
  const auto np = static_cast<Eigen::Index>(game.num_players());
  const Eigen::Index n = game.dim();
  const Eigen::Index m = game.num_constraints();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m * np, n * np);
  for (std::size_t i = 0; i < game.num_players(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out.block(ii * m, ii * n + game.offset(i), m, game.player_dim(i)) = game.player(i).coupling;
  }
  return out;
}

Eigen::MatrixXd selection(const Game& game) {
  const auto np = static_cast<Eigen::Index>(game.num_players());
  const Eigen::Index n = game.dim();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n * np);
  for (std::size_t i = 0; i < game.num_players(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const Eigen::Index ni = game.player_dim(i);
    out.block(game.offset(i), ii * n + game.offset(i), ni, ni).setIdentity();
  }
  return out;
}

namespace {

void check_size(const Layout& l) {
  if (l.total > kMaxDenseDimension) {
    throw std::length_error("dense operator path limited to dimension " +
                            std::to_string(kMaxDenseDimension) + ", instance has " +
                            std::to_string(l.total));
  }
}

}  // namespace

Eigen::MatrixXd build_d(const Game& game, const Graph& graph) {
  const Layout l = layout(game, graph);
  check_size(l);
  const GraphAlgebra alg = graph_algebra(graph);
  const Eigen::MatrixXd bn = kron_identity(alg.incidence, game.dim());
  const Eigen::MatrixXd bm = kron_identity(alg.incidence, game.num_constraints());
  const Eigen::MatrixXd lr = lambda_r(game);

  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(l.total, l.total);
  d.block(l.y, l.lambda, l.ny, l.nlambda) = 0.5 * lr.transpose();
  d.block(l.y, l.mu, l.ny, l.nmu) = 0.5 * bn;
  d.block(l.lambda, l.y, l.nlambda, l.ny) = -0.5 * lr;
  d.block(l.lambda, l.z, l.nlambda, l.nz) = 0.5 * bm;
  d.block(l.mu, l.y, l.nmu, l.ny) = -0.5 * bn.transpose();
  d.block(l.z, l.lambda, l.nz, l.nlambda) = -0.5 * bm.transpose();
  return d;
}

Eigen::MatrixXd build_phi(const Game& game, const Graph& graph, const StepSizes& steps) {
  const Layout l = layout(game, graph);
  check_size(l);
  const GraphAlgebra alg = graph_algebra(graph);
  const Eigen::Index n = game.dim();
  const Eigen::Index m = game.num_constraints();
  const Eigen::MatrixXd bn = kron_identity(alg.incidence, n);
  const Eigen::MatrixXd bm = kron_identity(alg.incidence, m);
  const Eigen::MatrixXd ln = kron_identity(alg.laplacian, n);
  const Eigen::MatrixXd lm = kron_identity(alg.laplacian, m);
  const Eigen::MatrixXd lr = lambda_r(game);

  auto blockwise = [](const Eigen::VectorXd& tau, Eigen::Index k) {
    Eigen::VectorXd diag(tau.size() * k);
    for (Eigen::Index i = 0; i < tau.size(); ++i) diag.segment(i * k, k).setConstant(1.0 / tau(i));
    return diag;
  };

  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(l.total, l.total);
  phi.block(l.y, l.y, l.ny, l.ny) = -0.5 * steps.rho_mu * ln;
  phi.block(l.y, l.y, l.ny, l.ny).diagonal() += blockwise(steps.tau1, n);
  phi.block(l.y, l.lambda, l.ny, l.nlambda) = -0.5 * lr.transpose();
  phi.block(l.y, l.mu, l.ny, l.nmu) = -0.5 * bn;
  phi.block(l.lambda, l.y, l.nlambda, l.ny) = -0.5 * lr;
  phi.block(l.lambda, l.lambda, l.nlambda, l.nlambda) = -0.5 * steps.rho_z * lm;
  phi.block(l.lambda, l.lambda, l.nlambda, l.nlambda).diagonal() += blockwise(steps.tau2, m);
  phi.block(l.lambda, l.z, l.nlambda, l.nz) = -0.5 * bm;
  phi.block(l.mu, l.y, l.nmu, l.ny) = -0.5 * bn.transpose();
  phi.block(l.mu, l.mu, l.nmu, l.nmu).diagonal() = blockwise(steps.tau3, n);
  phi.block(l.z, l.lambda, l.nz, l.nlambda) = -0.5 * bm.transpose();
  phi.block(l.z, l.z, l.nz, l.nz).diagonal() = blockwise(steps.tau4, m);
  return phi;
}

Eigen::MatrixXd build_b_operator(const Game& game, const Graph& graph, const StepSizes& steps) {
  const Layout l = layout(game, graph);
  const GraphAlgebra alg = graph_algebra(graph);
  Eigen::MatrixXd b = build_d(game, graph);
  b.block(l.y, l.y, l.ny, l.ny) += 0.5 * steps.rho_mu * kron_identity(alg.laplacian, game.dim());
  b.block(l.lambda, l.lambda, l.nlambda, l.nlambda) +=
      0.5 * steps.rho_z * kron_identity(alg.laplacian, game.num_constraints());
  return b;
}

Eigen::MatrixXd extended_jacobian(const Game& game) {
  if (!game.affine()) throw InvalidGame("extended Jacobian requires an affine pseudogradient");
  const auto np = static_cast<Eigen::Index>(game.num_players());
  const Eigen::Index n = game.dim();
  const Eigen::MatrixXd& mat = game.affine()->matrix;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n * np, n * np);
  for (std::size_t i = 0; i < game.num_players(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const Eigen::Index off = game.offset(i);
    const Eigen::Index ni = game.player_dim(i);
    out.block(ii * n + off, ii * n, ni, n) = mat.middleRows(off, ni);
  }
  return out;
}

AffinePart build_a_affine(const Game& game, const Graph& graph, const StepSizes& steps) {
  const Layout l = layout(game, graph);
  check_size(l);
  const GraphAlgebra alg = graph_algebra(graph);
  const Eigen::Index n = game.dim();
  const Eigen::Index m = game.num_constraints();

  AffinePart a;
  a.matrix = build_d(game, graph);
  a.matrix.block(l.y, l.y, l.ny, l.ny) +=
      extended_jacobian(game) + 0.5 * steps.rho_mu * kron_identity(alg.laplacian, n);
  a.matrix.block(l.lambda, l.lambda, l.nlambda, l.nlambda) +=
      0.5 * steps.rho_z * kron_identity(alg.laplacian, m);

  a.offset = Eigen::VectorXd::Zero(l.total);
  const Eigen::VectorXd& c = game.affine()->offset;
  for (std::size_t i = 0; i < game.num_players(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const Eigen::Index off = game.offset(i);
    const Eigen::Index ni = game.player_dim(i);
    a.offset.segment(l.y + ii * n + off, ni) = c.segment(off, ni);
    a.offset.segment(l.lambda + ii * m, m) = game.b_part(i);
  }
  return a;
}

}  // namespace dgne::dense
