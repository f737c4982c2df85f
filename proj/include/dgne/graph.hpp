#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dgne {

/// Directed edge (tail -> head), 0-based node indices.
struct Edge {
  std::size_t tail = 0;
  std::size_t head = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Validated directed communication graph: no self-loops, no duplicate
/// directed edges, weakly connected. Immutable after construction.
class Graph {
 public:
  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(std::size_t e) const { return edges_[e]; }

  /// Column of B belonging to the directed edge (tail, head); -1 if absent.
  std::ptrdiff_t edge_index(std::size_t tail, std::size_t head) const;

  /// Edges whose head is `node` (the in-neighbour edges, j -> node).
  const std::vector<std::size_t>& in_edges(std::size_t node) const { return in_edges_[node]; }
  /// Edges whose tail is `node` (node -> j).
  const std::vector<std::size_t>& out_edges(std::size_t node) const { return out_edges_[node]; }

  /// Number of edges incident to `node` in either direction.
  std::size_t degree(std::size_t node) const {
    return in_edges_[node].size() + out_edges_[node].size();
  }

 private:
  friend Graph build_graph(std::size_t, std::vector<Edge>);

  std::size_t num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_index_;
  std::vector<std::vector<std::size_t>> in_edges_;
  std::vector<std::vector<std::size_t>> out_edges_;
};

/// Dense algebraic objects derived from a graph.
///
/// The incidence matrix uses B(i,e) = +1 when node i is the head of edge e
/// and -1 when it is the tail, so (B v)_i sums values on incoming edges
/// minus values on outgoing edges.
struct GraphAlgebra {
  Eigen::MatrixXd incidence;   // N x E
  Eigen::MatrixXd laplacian;   // N x N, B * B^T
  Eigen::VectorXd degrees;     // N
  Eigen::VectorXd eigenvalues; // ascending spectrum of L
  Eigen::MatrixXd eigenvectors;
  double sigma1 = 0.0;         // algebraic connectivity

  /// Moore-Penrose pseudo-inverse of L built from the stored spectrum.
  Eigen::MatrixXd laplacian_pinv() const;
};

/// Eigenvalues of L at or below this threshold are treated as zero.
inline constexpr double kZeroEigenvalueThreshold = 1e-9;

/// Validates and builds a graph. Throws SelfLoop, DuplicateEdge,
/// NotWeaklyConnected, or std::out_of_range for node indices >= num_nodes.
Graph build_graph(std::size_t num_nodes, std::vector<Edge> edges);

GraphAlgebra graph_algebra(const Graph& g);

/// Directed cycle 0 -> 1 -> ... -> N-1 -> 0 plus `num_extra_edges` distinct
/// random edges that are neither self-loops nor already present.
Graph random_experiment_graph(std::uint64_t seed, std::size_t num_nodes,
                              std::size_t num_extra_edges);

// Matrix-free Kronecker products (B (x) I_k), (B^T (x) I_k), (L (x) I_k).
// Node stacks hold one vector per node, edge stacks one vector per edge.
using Stack = std::vector<Eigen::VectorXd>;

/// `dim` is the block size k; needed because a graph may have no edges.
Stack incidence_apply(const Graph& g, std::span<const Eigen::VectorXd> edge_values,
                      Eigen::Index dim);
Stack incidence_transpose_apply(const Graph& g, std::span<const Eigen::VectorXd> node_values);
Stack laplacian_apply(const Graph& g, std::span<const Eigen::VectorXd> node_values);

/// (B (x) I_k) entry for a single node: sum over in-edges minus out-edges.
Eigen::VectorXd incidence_apply_at(const Graph& g, std::span<const Eigen::VectorXd> edge_values,
                                   std::size_t node, Eigen::Index dim);
/// (L (x) I_k) entry for a single node: sum over incident edges of (x_node - x_other).
Eigen::VectorXd laplacian_apply_at(const Graph& g, std::span<const Eigen::VectorXd> node_values,
                                   std::size_t node);

}  // namespace dgne
