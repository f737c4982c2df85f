#include "dgne/graph.hpp"

#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dgne/errors.hpp"

namespace dgne {
namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

 private:
  std::vector<std::size_t> parent_;
};

std::string edge_name(const Edge& e) {
  std::ostringstream os;
  os << "(" << e.tail << "," << e.head << ")";
  return os.str();
}

}  // namespace

std::ptrdiff_t Graph::edge_index(std::size_t tail, std::size_t head) const {
  auto it = edge_index_.find({tail, head});
  return it == edge_index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

Graph build_graph(std::size_t num_nodes, std::vector<Edge> edges) {
  if (num_nodes == 0) throw std::invalid_argument("graph needs at least one node");

  Graph g;
  g.num_nodes_ = num_nodes;
  g.in_edges_.resize(num_nodes);
  g.out_edges_.resize(num_nodes);

  for (std::size_t e = 0; e < edges.size(); ++e) {
    const Edge& ed = edges[e];
    if (ed.tail >= num_nodes || ed.head >= num_nodes) {
      throw std::out_of_range("edge " + edge_name(ed) + " references a node outside [0, " +
                              std::to_string(num_nodes) + ")");
    }
    if (ed.tail == ed.head) throw SelfLoop("self-loop on edge " + edge_name(ed));
    if (!g.edge_index_.emplace(std::pair{ed.tail, ed.head}, e).second) {
      throw DuplicateEdge("duplicate directed edge " + edge_name(ed));
    }
    g.out_edges_[ed.tail].push_back(e);
    g.in_edges_[ed.head].push_back(e);
  }

  DisjointSets sets(num_nodes);
  for (const Edge& ed : edges) sets.unite(ed.tail, ed.head);
  const std::size_t root = sets.find(0);
  for (std::size_t v = 1; v < num_nodes; ++v) {
    if (sets.find(v) != root) {
      throw NotWeaklyConnected("graph is not weakly connected: node " + std::to_string(v) +
                               " is not reachable from node 0 in the undirected support");
    }
  }

  g.edges_ = std::move(edges);
  return g;
}

GraphAlgebra graph_algebra(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  const auto ne = static_cast<Eigen::Index>(g.num_edges());

  GraphAlgebra alg;
  alg.incidence = Eigen::MatrixXd::Zero(n, ne);
  for (Eigen::Index e = 0; e < ne; ++e) {
    const Edge& ed = g.edge(static_cast<std::size_t>(e));
    alg.incidence(static_cast<Eigen::Index>(ed.head), e) = 1.0;
    alg.incidence(static_cast<Eigen::Index>(ed.tail), e) = -1.0;
  }
  alg.laplacian = alg.incidence * alg.incidence.transpose();
  alg.degrees.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    alg.degrees(i) = static_cast<double>(g.degree(static_cast<std::size_t>(i)));
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(alg.laplacian);
  if (eig.info() != Eigen::Success) throw EigenSolverFailure("Laplacian eigendecomposition failed");
  alg.eigenvalues = eig.eigenvalues();
  alg.eigenvectors = eig.eigenvectors();

  // A single node has no nonzero Laplacian eigenvalue; sigma1 stays 0.
  for (Eigen::Index k = 0; k < n; ++k) {
    if (alg.eigenvalues(k) > kZeroEigenvalueThreshold) {
      alg.sigma1 = alg.eigenvalues(k);
      break;
    }
  }
  return alg;
}

Eigen::MatrixXd GraphAlgebra::laplacian_pinv() const {
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(eigenvalues.size());
  for (Eigen::Index k = 0; k < eigenvalues.size(); ++k) {
    if (eigenvalues(k) > kZeroEigenvalueThreshold) inv(k) = 1.0 / eigenvalues(k);
  }
  return eigenvectors * inv.asDiagonal() * eigenvectors.transpose();
}

Graph random_experiment_graph(std::uint64_t seed, std::size_t num_nodes,
                              std::size_t num_extra_edges) {
  if (num_nodes < 2) throw std::invalid_argument("experiment graph needs at least two nodes");
  const std::size_t capacity = num_nodes * (num_nodes - 1);
  std::vector<Edge> edges;
  std::set<std::pair<std::size_t, std::size_t>> present;
  for (std::size_t i = 0; i < num_nodes; ++i) {
    const Edge e{i, (i + 1) % num_nodes};
    if (present.insert({e.tail, e.head}).second) edges.push_back(e);
  }
  if (edges.size() + num_extra_edges > capacity) {
    throw std::invalid_argument("requested " + std::to_string(num_extra_edges) +
                                " extra edges but only " +
                                std::to_string(capacity - edges.size()) + " are available");
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, num_nodes - 1);
  const std::size_t target = edges.size() + num_extra_edges;
  while (edges.size() < target) {
    const Edge e{pick(rng), pick(rng)};
    if (e.tail == e.head) continue;
    if (present.insert({e.tail, e.head}).second) edges.push_back(e);
  }
  return build_graph(num_nodes, std::move(edges));
}

Eigen::VectorXd incidence_apply_at(const Graph& g, std::span<const Eigen::VectorXd> edge_values,
                                   std::size_t node, Eigen::Index dim) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim);
  for (std::size_t e : g.in_edges(node)) out += edge_values[e];
  for (std::size_t e : g.out_edges(node)) out -= edge_values[e];
  return out;
}

Eigen::VectorXd laplacian_apply_at(const Graph& g, std::span<const Eigen::VectorXd> node_values,
                                   std::size_t node) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(node_values[node].size());
  for (std::size_t e : g.in_edges(node)) out += node_values[node] - node_values[g.edge(e).tail];
  for (std::size_t e : g.out_edges(node)) out += node_values[node] - node_values[g.edge(e).head];
  return out;
}

Stack incidence_apply(const Graph& g, std::span<const Eigen::VectorXd> edge_values,
                      Eigen::Index dim) {
  Stack out(g.num_nodes());
  for (std::size_t i = 0; i < g.num_nodes(); ++i) out[i] = incidence_apply_at(g, edge_values, i, dim);
  return out;
}

Stack incidence_transpose_apply(const Graph& g, std::span<const Eigen::VectorXd> node_values) {
  Stack out(g.num_edges());
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    out[e] = node_values[g.edge(e).head] - node_values[g.edge(e).tail];
  }
  return out;
}

Stack laplacian_apply(const Graph& g, std::span<const Eigen::VectorXd> node_values) {
  Stack out(g.num_nodes());
  for (std::size_t i = 0; i < g.num_nodes(); ++i) out[i] = laplacian_apply_at(g, node_values, i);
  return out;
}

}  // namespace dgne
