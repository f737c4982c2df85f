#include "dgne/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "dgne/errors.hpp"

namespace dgne {

double default_oracle_step(const Game& game) {
  if (!game.affine()) throw InvalidGame("default oracle step needs an affine pseudogradient");
  const Eigen::MatrixXd& m = game.affine()->matrix;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sym(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  const double eta = sym.eigenvalues().minCoeff();
  if (!(eta > 0.0)) throw NonPositiveEta("pseudogradient is not strongly monotone");
  const double theta1 = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
  double step = eta / (theta1 * theta1);
  const Eigen::MatrixXd& a = game.coupling();
  if (a.size() > 0) {
    const double anorm = Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()(0);
    if (anorm > 0.0) step = std::min(step, 1.0 / (2.0 * anorm));
  }
  return step;
}

OracleSolution centralized_vgne(const Game& game, double step, double tol, int max_iters,
                                const Eigen::VectorXd* x0, const Eigen::VectorXd* lambda0) {
  if (!(step > 0.0)) throw InvalidGame("oracle step must be positive");
  const Eigen::MatrixXd& a = game.coupling();
  Eigen::VectorXd x = x0 ? game.project_omega(*x0) : game.project_omega(Eigen::VectorXd::Zero(game.dim()));
  Eigen::VectorXd lambda =
      lambda0 ? Eigen::VectorXd(lambda0->cwiseMax(0.0)) : Eigen::VectorXd::Zero(game.num_constraints());

  OracleSolution sol;
  KktResidual r = kkt_residual(game, x, lambda);
  int it = 0;
  while (r.max() > tol) {
    if (it >= max_iters) {
      std::ostringstream msg;
      msg << "centralized solver stopped after " << it << " iterations; residuals: stationarity "
          << r.stationarity << ", primal " << r.primal << ", dual " << r.dual << ", complementarity "
          << r.compl_slack;
      throw NoConvergence(msg.str());
    }
    const Eigen::VectorXd xn =
        game.project_omega(x - step * (pseudogradient(game, x) + a.transpose() * lambda));
    lambda = (lambda + step * (a * (2.0 * xn - x) - game.b())).cwiseMax(0.0);
    x = xn;
    ++it;
    r = kkt_residual(game, x, lambda);
    sol.kkt_history.push_back(r.max());
  }
  sol.x_star = x;
  sol.lambda_star = lambda;
  sol.certificate = r;
  sol.iterations = it;
  return sol;
}

OracleSolution centralized_vgne(const Game& game) {
  return centralized_vgne(game, default_oracle_step(game));
}

namespace {

// Rows of G x <= h describing X: upper bounds, lower bounds, then shared constraints.
void polytope(const Game& game, Eigen::MatrixXd& g, Eigen::VectorXd& h) {
  const Box box = game.joint_box();
  const Eigen::Index n = game.dim();
  const Eigen::Index m = game.num_constraints();
  g.resize(2 * n + m, n);
  h.resize(2 * n + m);
  g.topRows(n).setIdentity();
  h.head(n) = box.upper;
  g.middleRows(n, n) = -Eigen::MatrixXd::Identity(n, n);
  h.segment(n, n) = -box.lower;
  g.bottomRows(m) = game.coupling();
  h.tail(m) = game.b();
}

bool feasible(const Eigen::MatrixXd& g, const Eigen::VectorXd& h, const Eigen::VectorXd& x, double tol) {
  return ((g * x - h).array() <= tol).all();
}

}  // namespace

std::vector<Eigen::VectorXd> feasible_vertices(const Game& game, double tol) {
  Eigen::MatrixXd g;
  Eigen::VectorXd h;
  polytope(game, g, h);
  const auto rows = static_cast<int>(g.rows());
  const auto n = static_cast<int>(game.dim());

  std::vector<Eigen::VectorXd> out;
  std::vector<int> pick(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) pick[static_cast<std::size_t>(k)] = k;
  while (true) {
    Eigen::MatrixXd sub(n, n);
    Eigen::VectorXd rhs(n);
    for (int k = 0; k < n; ++k) {
      sub.row(k) = g.row(pick[static_cast<std::size_t>(k)]);
      rhs(k) = h(pick[static_cast<std::size_t>(k)]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
    if (lu.isInvertible()) {
      const Eigen::VectorXd v = lu.solve(rhs);
      if (feasible(g, h, v, tol)) {
        const bool seen = std::any_of(out.begin(), out.end(), [&](const Eigen::VectorXd& u) {
          return (u - v).cwiseAbs().maxCoeff() <= tol;
        });
        if (!seen) out.push_back(v);
      }
    }
    int k = n - 1;
    while (k >= 0 && pick[static_cast<std::size_t>(k)] == rows - n + k) --k;
    if (k < 0) break;
    ++pick[static_cast<std::size_t>(k)];
    for (int j = k + 1; j < n; ++j) pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
  return out;
}

double vi_gap(const Game& game, const Eigen::VectorXd& x, const std::vector<Eigen::VectorXd>& vertices) {
  const Eigen::VectorXd f = pseudogradient(game, x);
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& v : vertices) lowest = std::min(lowest, f.dot(v));
  return f.dot(x) - lowest;
}

BruteForceResult brute_force_vgne_report(const Game& game, double h) {
  const Eigen::Index n = game.dim();
  if (n > 3) throw InvalidGame("brute force search supports n <= 3, game has n = " + std::to_string(n));
  if (!(h > 0.0)) throw GridTooCoarse("grid step must be positive");
  const Box box = game.joint_box();
  if (!box.lower.allFinite() || !box.upper.allFinite()) {
    throw InvalidGame("brute force search needs bounded boxes");
  }
  Eigen::MatrixXd g;
  Eigen::VectorXd rhs;
  polytope(game, g, rhs);
  const std::vector<Eigen::VectorXd> verts = feasible_vertices(game);
  if (verts.empty()) throw InfeasiblePoint("the feasible set is empty");

  BruteForceResult res;
  auto gap = [&](const Eigen::VectorXd& x) {
    ++res.grid_points;
    return vi_gap(game, x, verts);
  };

  constexpr int kPerAxis = 21;
  const Eigen::VectorXd width = box.upper - box.lower;
  Eigen::VectorXd step = (width / (kPerAxis - 1)).cwiseMax(h);
  Eigen::VectorXd lo = box.lower;
  Eigen::VectorXd best;
  double best_gap = std::numeric_limits<double>::infinity();

  while (true) {
    long total = 1;
    for (Eigen::Index d = 0; d < n; ++d) total *= kPerAxis;
    for (long idx = 0; idx < total; ++idx) {
      Eigen::VectorXd x(n);
      long rest = idx;
      bool inside = true;
      for (Eigen::Index d = 0; d < n; ++d) {
        x(d) = lo(d) + static_cast<double>(rest % kPerAxis) * step(d);
        rest /= kPerAxis;
        if (x(d) < box.lower(d) - 1e-15 || x(d) > box.upper(d) + 1e-15) inside = false;
      }
      if (!inside || !feasible(g, rhs, x, 0.0)) continue;
      const double v = gap(x);
      if (v < best_gap) {
        best_gap = v;
        best = x;
      }
    }
    if (best.size() == 0) {
      throw GridTooCoarse("no grid point of step " + std::to_string(step.maxCoeff()) +
                          " lies in the feasible set");
    }
    if ((step.array() <= h * (1.0 + 1e-12)).all()) break;
    // Next window spans +-5 old steps around the incumbent; the step halves per level.
    const Eigen::VectorXd next = (step * 10.0 / (kPerAxis - 1)).cwiseMax(h);
    lo = best - next * ((kPerAxis - 1) / 2);
    step = next;
  }

  // One ternary pass per coordinate along the feasible segment through the incumbent.
  for (Eigen::Index d = 0; d < n; ++d) {
    double a = box.lower(d);
    double b = box.upper(d);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const double c = g(r, d);
      if (c == 0.0) continue;
      const double slack = rhs(r) - g.row(r).dot(best) + c * best(d);
      if (c > 0.0) b = std::min(b, slack / c);
      else a = std::max(a, slack / c);
    }
    a = std::max(a, best(d) - 2.0 * h);
    b = std::min(b, best(d) + 2.0 * h);
    if (!(a < b)) continue;
    Eigen::VectorXd probe = best;
    auto along = [&](double t) {
      probe(d) = t;
      return gap(probe);
    };
    for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
      const double m1 = a + (b - a) / 3.0;
      const double m2 = b - (b - a) / 3.0;
      if (along(m1) <= along(m2)) b = m2;
      else a = m1;
    }
    const double t = 0.5 * (a + b);
    probe(d) = t;
    if (feasible(g, rhs, probe, 0.0)) {
      const double v = gap(probe);
      if (v <= best_gap) {
        best_gap = v;
        best = probe;
      }
    }
  }

  // Ellipsoid polish. The gap is convex for monotone affine F, and a thin
  // valley along a face like x_i + x_j = b_k defeats any axis-aligned search.
  // Subgradient at x with maximising vertex v: M^T (x - v) + F(x).
  if (game.affine() && n >= 2) {
    const Eigen::MatrixXd& mat = game.affine()->matrix;
    const double nd = static_cast<double>(n);
    Eigen::VectorXd c = best;
    // Ellipsoid {c + B u : ||u|| <= 1}, kept in factored form for stability.
    Eigen::MatrixXd bf = Eigen::MatrixXd::Identity(n, n) * width.norm();
    const double expand = nd / std::sqrt(nd * nd - 1.0);
    const double squeeze = 1.0 - std::sqrt((nd - 1.0) / (nd + 1.0));
    for (int it = 0; it < 20000 && bf.norm() > 1e-13; ++it) {
      Eigen::VectorXd cut;
      const Eigen::VectorXd viol = g * c - rhs;
      Eigen::Index worst = 0;
      if (viol.maxCoeff(&worst) > 0.0) {
        cut = g.row(worst).transpose();
      } else {
        const Eigen::VectorXd f = pseudogradient(game, c);
        std::size_t arg = 0;
        for (std::size_t k = 1; k < verts.size(); ++k) {
          if (f.dot(verts[k]) < f.dot(verts[arg])) arg = k;
        }
        const double v = f.dot(c - verts[arg]);
        ++res.grid_points;
        if (v < best_gap) {
          best_gap = v;
          best = c;
        }
        cut = mat.transpose() * (c - verts[arg]) + f;
      }
      Eigen::VectorXd xi = bf.transpose() * cut;
      const double len = xi.norm();
      if (!(len > 0.0)) break;
      xi /= len;
      c -= bf * xi / (nd + 1.0);
      bf = expand * (bf - squeeze * (bf * xi) * xi.transpose());
    }
  }

  // gap is Lipschitz with constant at most max||F|| + ||M|| diam(X) on X, and
  // some grid point lies within sqrt(n) h of the solution, where the gap is 0.
  double fmax = 0.0;
  double diam = 0.0;
  for (const auto& v : verts) {
    fmax = std::max(fmax, pseudogradient(game, v).norm());
    for (const auto& u : verts) diam = std::max(diam, (u - v).norm());
  }
  double lip = fmax;
  if (game.affine()) lip += Eigen::JacobiSVD<Eigen::MatrixXd>(game.affine()->matrix).singularValues()(0) * diam;
  res.threshold = 2.0 * lip * std::sqrt(static_cast<double>(n)) * h;
  res.x = best;
  res.gap = best_gap;
  if (best_gap > res.threshold) {
    throw GridTooCoarse("VI gap " + std::to_string(best_gap) + " above threshold " +
                        std::to_string(res.threshold) + " at grid step " + std::to_string(h));
  }
  return res;
}

Eigen::VectorXd brute_force_vgne(const Game& game, double h) { return brute_force_vgne_report(game, h).x; }

ViCheck verify_vi(const Game& game, const Eigen::VectorXd& x, int num_probes, std::uint64_t seed,
                  double feas_tol) {
  const Box box = game.joint_box();
  const Eigen::MatrixXd& a = game.coupling();
  if ((x - box.project(x)).cwiseAbs().maxCoeff() > feas_tol ||
      ((a * x - game.b()).array() > feas_tol).any()) {
    throw InfeasiblePoint("point violates the feasible set beyond " + std::to_string(feas_tol));
  }
  ViCheck out;
  if (num_probes <= 0) {
    out.vacuous = true;
    return out;
  }
  const Eigen::VectorXd f = pseudogradient(game, x);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = -std::numeric_limits<double>::infinity();
  constexpr int kMaxRejections = 100000;
  for (int p = 0; p < num_probes; ++p) {
    int rejected = 0;
    Eigen::VectorXd z(x.size());
    while (true) {
      for (Eigen::Index d = 0; d < z.size(); ++d) {
        z(d) = box.lower(d) + unit(rng) * (box.upper(d) - box.lower(d));
      }
      if (((a * z - game.b()).array() <= 0.0).all()) break;
      if (++rejected >= kMaxRejections) {
        throw InfeasiblePoint("no feasible probe accepted in " + std::to_string(kMaxRejections) +
                              " draws; the shared constraints leave a negligible box fraction");
      }
    }
    worst = std::max(worst, f.dot(x - z));
    ++out.probes;
  }
  out.violation = worst;
  return out;
}

}  // namespace dgne
