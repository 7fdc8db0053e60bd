#pragma once

// Lattice graphs, spanning trees and the weighted matrix-tree machinery.

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace hrmix {

/// Undirected edge key with first < second.
using EdgeKey = std::pair<int, int>;

inline EdgeKey make_edge(int i, int j) { return i < j ? EdgeKey{i, j} : EdgeKey{j, i}; }

/// H: west-east, V: south-north, D1: northwest-southeast, D2: southwest-northeast.
enum class Orientation { H, V, D1, D2 };

const char* to_string(Orientation o) noexcept;
Orientation orientation_from_string(const std::string& s);

struct Site {
  std::string id;
  double lon = 0.0;
  double lat = 0.0;
};

struct Edge {
  int i = 0;
  int j = 0;
  Orientation orientation = Orientation::H;
};

struct LatticeGraph {
  std::vector<Site> sites;
  std::vector<Edge> edges;  // sorted by (i, j), i < j

  std::size_t node_count() const noexcept { return sites.size(); }
  /// Position of (i, j) in `edges`, or -1.
  int edge_index(int i, int j) const;
  std::vector<EdgeKey> edge_keys() const;

  /// General graph on n anonymous nodes, for tests and small examples.
  static LatticeGraph from_edges(std::size_t n, const std::vector<EdgeKey>& edges);
};

/// Per-edge real values keyed by undirected edge (variograms, weights).
class EdgeValues {
 public:
  EdgeValues() = default;
  EdgeValues(std::initializer_list<std::pair<const EdgeKey, double>> init);

  void set(int i, int j, double value) { values_[make_edge(i, j)] = value; }
  bool contains(int i, int j) const { return values_.count(make_edge(i, j)) > 0; }
  /// Throws Config when the edge has no value.
  double at(int i, int j) const;
  std::size_t size() const noexcept { return values_.size(); }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }
  EdgeValues scaled(double factor) const;

 private:
  std::map<EdgeKey, double> values_;
};

struct SpanningTree {
  std::size_t node_count = 0;
  std::vector<EdgeKey> edges;  // canonical: each i < j, sorted

  static SpanningTree from_edges(std::size_t n, std::vector<EdgeKey> edges);
  bool operator==(const SpanningTree&) const = default;
  bool operator<(const SpanningTree& o) const { return edges < o.edges; }
};

struct TreeEnsemble {
  std::vector<SpanningTree> trees;
  std::size_t raw_draws = 0;
};

/// Builds the 4-neighbourhood (8 with diagonals) graph of sites on a regular
/// lon/lat grid. Throws Validation for off-grid sites, Integrity for duplicate
/// cells and Connectivity (naming the components) when disconnected.
LatticeGraph build_lattice(const std::vector<Site>& sites, bool diagonals);

/// Connected components as lists of node indices.
std::vector<std::vector<int>> connected_components(std::size_t n, const std::vector<EdgeKey>& edges);

/// Edge count N-1, acyclic, connected, and (when graph is given) edges within it.
bool is_spanning_tree(const SpanningTree& tree, const LatticeGraph* graph = nullptr);

/// L(W) = diag(W 1) - W.
Eigen::MatrixXd laplacian(const Eigen::MatrixXd& weights);

struct LogDet {
  double value = 0.0;
  bool singular = false;
};

/// log det of the Laplacian minor with row/column `drop` removed (default:
/// the last one). Singular when the positive support is disconnected or the
/// Cholesky factorization fails.
LogDet log_laplacian_minor_det(const Eigen::MatrixXd& weights, Eigen::Index drop = -1);

/// det Q(weights) = weighted spanning-tree sum. Throws Singular.
double laplacian_minor_det(const Eigen::MatrixXd& weights, Eigen::Index drop = -1);

/// Exhaustive list of spanning trees. Throws Size above 8 nodes.
inline constexpr std::size_t kMaxEnumerationNodes = 8;
std::vector<SpanningTree> enumerate_spanning_trees(const LatticeGraph& graph);

struct OrientationRates {
  double horizontal = 1.0;
  double vertical = 1.0;
  double diagonal1 = 1.0;
  double diagonal2 = 1.0;
  double rate(Orientation o) const;
};

/// Minimum spanning tree under independent Exponential(rate by orientation)
/// edge values. An infinite rate pins the value to zero; ties go to the lower
/// edge index.
SpanningTree sample_random_tree(const LatticeGraph& graph, const OrientationRates& rates,
                                std::mt19937_64& rng);
SpanningTree sample_random_tree(const LatticeGraph& graph, const OrientationRates& rates,
                                std::uint64_t seed);

/// `count` raw draws, deduplicated by edge set in first-seen order.
TreeEnsemble sample_tree_ensemble(const LatticeGraph& graph, const OrientationRates& rates,
                                  std::size_t count, std::uint64_t seed);

/// Spanning tree maximizing the sum of `edge_scores` (indexed like graph.edges).
SpanningTree max_weight_spanning_tree(const LatticeGraph& graph,
                                      const std::vector<double>& edge_scores);

/// Unique path from i to j as ordered edges (a, b) with a the node nearer i.
std::vector<EdgeKey> tree_path(const SpanningTree& tree, int i, int j);

/// Sum of gammas along tree_path. Throws Config when an edge value is missing.
double tree_gamma(const SpanningTree& tree, const EdgeValues& gammas, int i, int j);

/// Full matrix of path sums.
Eigen::MatrixXd tree_gamma_matrix(const SpanningTree& tree, const EdgeValues& gammas);

/// Hop distances between all node pairs of a connected graph.
std::vector<std::vector<int>> hop_distances(const LatticeGraph& graph);

}  // namespace hrmix
