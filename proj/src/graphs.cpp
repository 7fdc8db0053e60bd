#include "hrmix/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <set>

#include "hrmix/error.hpp"

namespace hrmix {
namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      auto& p = parent_[static_cast<std::size_t>(x)];
      p = parent_[static_cast<std::size_t>(p)];
      x = p;
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    return true;
  }

 private:
  std::vector<int> parent_;
};

std::vector<std::vector<int>> tree_adjacency(const SpanningTree& tree) {
  std::vector<std::vector<int>> adj(tree.node_count);
  for (auto [a, b] : tree.edges) {
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  return adj;
}

// Kruskal over edges visited in `order`.
SpanningTree kruskal(const LatticeGraph& graph, const std::vector<std::size_t>& order) {
  DisjointSets sets(graph.node_count());
  std::vector<EdgeKey> chosen;
  chosen.reserve(graph.node_count() > 0 ? graph.node_count() - 1 : 0);
  for (std::size_t e : order) {
    const auto& edge = graph.edges[e];
    if (sets.unite(edge.i, edge.j)) chosen.emplace_back(edge.i, edge.j);
    if (chosen.size() + 1 == graph.node_count()) break;
  }
  if (chosen.size() + 1 != graph.node_count() && graph.node_count() > 0)
    throw Error(ErrorKind::Connectivity, "graph has no spanning tree (disconnected)");
  return SpanningTree::from_edges(graph.node_count(), std::move(chosen));
}

}  // namespace

const char* to_string(Orientation o) noexcept {
  switch (o) {
    case Orientation::H: return "H";
    case Orientation::V: return "V";
    case Orientation::D1: return "D1";
    case Orientation::D2: return "D2";
  }
  return "?";
}

Orientation orientation_from_string(const std::string& s) {
  if (s == "H") return Orientation::H;
  if (s == "V") return Orientation::V;
  if (s == "D1") return Orientation::D1;
  if (s == "D2") return Orientation::D2;
  throw Error(ErrorKind::Parse, "unknown edge orientation '" + s + "'");
}

int LatticeGraph::edge_index(int i, int j) const {
  const EdgeKey key = make_edge(i, j);
  auto it = std::lower_bound(edges.begin(), edges.end(), key, [](const Edge& e, const EdgeKey& k) {
    return EdgeKey{e.i, e.j} < k;
  });
  if (it == edges.end() || it->i != key.first || it->j != key.second) return -1;
  return static_cast<int>(it - edges.begin());
}

std::vector<EdgeKey> LatticeGraph::edge_keys() const {
  std::vector<EdgeKey> keys;
  keys.reserve(edges.size());
  for (const auto& e : edges) keys.emplace_back(e.i, e.j);
  return keys;
}

LatticeGraph LatticeGraph::from_edges(std::size_t n, const std::vector<EdgeKey>& edges) {
  LatticeGraph g;
  g.sites.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.sites[i].id = std::to_string(i);
  std::set<EdgeKey> unique;
  for (auto [a, b] : edges) {
    if (a == b || a < 0 || b < 0 || static_cast<std::size_t>(std::max(a, b)) >= n)
      throw Error(ErrorKind::Validation, "invalid edge in graph definition");
    unique.insert(make_edge(a, b));
  }
  for (auto [a, b] : unique) g.edges.push_back({a, b, Orientation::H});
  return g;
}

EdgeValues::EdgeValues(std::initializer_list<std::pair<const EdgeKey, double>> init) {
  for (const auto& [k, v] : init) set(k.first, k.second, v);
}

double EdgeValues::at(int i, int j) const {
  auto it = values_.find(make_edge(i, j));
  if (it == values_.end())
    throw Error(ErrorKind::Config,
                "missing edge parameter for (" + std::to_string(i) + ", " + std::to_string(j) + ")");
  return it->second;
}

EdgeValues EdgeValues::scaled(double factor) const {
  EdgeValues out = *this;
  for (auto& [k, v] : out.values_) v *= factor;
  return out;
}

SpanningTree SpanningTree::from_edges(std::size_t n, std::vector<EdgeKey> edges) {
  for (auto& e : edges) e = make_edge(e.first, e.second);
  std::sort(edges.begin(), edges.end());
  return SpanningTree{n, std::move(edges)};
}

std::vector<std::vector<int>> connected_components(std::size_t n, const std::vector<EdgeKey>& edges) {
  DisjointSets sets(n);
  for (auto [a, b] : edges) sets.unite(a, b);
  std::map<int, std::vector<int>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[sets.find(static_cast<int>(i))].push_back(static_cast<int>(i));
  std::vector<std::vector<int>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  return out;
}

LatticeGraph build_lattice(const std::vector<Site>& sites, bool diagonals) {
  if (sites.empty()) throw Error(ErrorKind::Validation, "lattice needs at least one site");
  auto spacing = [&](auto coord) {
    std::vector<double> values;
    for (const auto& s : sites) values.push_back(coord(s));
    std::sort(values.begin(), values.end());
    double step = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < values.size(); ++k) {
      const double d = values[k] - values[k - 1];
      if (d > 1e-9) step = std::min(step, d);
    }
    return std::pair{values.front(), step};
  };
  auto [lon0, dlon] = spacing([](const Site& s) { return s.lon; });
  auto [lat0, dlat] = spacing([](const Site& s) { return s.lat; });
  if (!std::isfinite(dlon)) dlon = std::isfinite(dlat) ? dlat : 1.0;
  if (!std::isfinite(dlat)) dlat = dlon;

  std::map<std::pair<long, long>, int> cell;
  for (std::size_t k = 0; k < sites.size(); ++k) {
    const double fx = (sites[k].lon - lon0) / dlon;
    const double fy = (sites[k].lat - lat0) / dlat;
    const long ix = std::lround(fx);
    const long iy = std::lround(fy);
    if (std::abs(fx - static_cast<double>(ix)) > 1e-6 || std::abs(fy - static_cast<double>(iy)) > 1e-6)
      throw Error(ErrorKind::Validation, "site " + sites[k].id + " is not on a regular lon/lat grid");
    if (!cell.emplace(std::pair{ix, iy}, static_cast<int>(k)).second)
      throw Error(ErrorKind::Integrity, "two sites share the grid cell of site " + sites[k].id);
  }

  LatticeGraph graph;
  graph.sites = sites;
  struct Step {
    long dx, dy;
    Orientation o;
  };
  std::vector<Step> steps{{1, 0, Orientation::H}, {0, 1, Orientation::V}};
  if (diagonals) {
    steps.push_back({1, -1, Orientation::D1});
    steps.push_back({1, 1, Orientation::D2});
  }
  for (const auto& [pos, k] : cell) {
    for (const auto& st : steps) {
      auto it = cell.find({pos.first + st.dx, pos.second + st.dy});
      if (it == cell.end()) continue;
      const auto key = make_edge(k, it->second);
      graph.edges.push_back({key.first, key.second, st.o});
    }
  }
  std::sort(graph.edges.begin(), graph.edges.end(),
            [](const Edge& a, const Edge& b) { return EdgeKey{a.i, a.j} < EdgeKey{b.i, b.j}; });

  const auto components = connected_components(sites.size(), graph.edge_keys());
  if (components.size() > 1) {
    std::string msg = "site set is disconnected into " + std::to_string(components.size()) + " components:";
    for (const auto& comp : components) {
      msg += " {";
      for (std::size_t m = 0; m < comp.size(); ++m)
        msg += (m ? "," : "") + sites[static_cast<std::size_t>(comp[m])].id;
      msg += "}";
    }
    throw Error(ErrorKind::Connectivity, msg);
  }
  return graph;
}

bool is_spanning_tree(const SpanningTree& tree, const LatticeGraph* graph) {
  const std::size_t n = tree.node_count;
  if (n == 0 || tree.edges.size() + 1 != n) return false;
  DisjointSets sets(n);
  for (auto [a, b] : tree.edges) {
    if (a < 0 || b < 0 || static_cast<std::size_t>(std::max(a, b)) >= n || a == b) return false;
    if (graph && graph->edge_index(a, b) < 0) return false;
    if (!sets.unite(a, b)) return false;  // cycle
  }
  return true;  // n-1 edges without a cycle on n nodes => connected
}

Eigen::MatrixXd laplacian(const Eigen::MatrixXd& weights) {
  Eigen::MatrixXd lap = -weights;
  lap.diagonal() = weights.rowwise().sum() - weights.diagonal();
  return lap;
}

LogDet log_laplacian_minor_det(const Eigen::MatrixXd& weights, Eigen::Index drop) {
  const Eigen::Index n = weights.rows();
  if (n == 1) return {0.0, false};
  if (drop < 0) drop = n - 1;

  std::vector<EdgeKey> support;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (weights(i, j) > 0.0) support.emplace_back(static_cast<int>(i), static_cast<int>(j));
  if (connected_components(static_cast<std::size_t>(n), support).size() > 1) return {0.0, true};

  const Eigen::MatrixXd lap = laplacian(weights);
  Eigen::MatrixXd minor(n - 1, n - 1);
  for (Eigen::Index a = 0, i = 0; i < n; ++i) {
    if (i == drop) continue;
    for (Eigen::Index b = 0, j = 0; j < n; ++j) {
      if (j == drop) continue;
      minor(a, b++) = lap(i, j);
    }
    ++a;
  }
  const Eigen::LLT<Eigen::MatrixXd> chol(minor);
  if (chol.info() != Eigen::Success) return {0.0, true};
  const auto diag = chol.matrixLLT().diagonal();
  if (!(diag.array() > 0.0).all() || !diag.allFinite()) return {0.0, true};
  return {2.0 * diag.array().log().sum(), false};
}

double laplacian_minor_det(const Eigen::MatrixXd& weights, Eigen::Index drop) {
  const auto ld = log_laplacian_minor_det(weights, drop);
  if (ld.singular)
    throw Error(ErrorKind::Singular, "Laplacian minor is singular (support does not span a connected graph)");
  return std::exp(ld.value);
}

std::vector<SpanningTree> enumerate_spanning_trees(const LatticeGraph& graph) {
  const std::size_t n = graph.node_count();
  if (n > kMaxEnumerationNodes)
    throw Error(ErrorKind::Size, "spanning-tree enumeration is limited to " +
                                     std::to_string(kMaxEnumerationNodes) + " nodes");
  std::vector<SpanningTree> out;
  if (n == 0) return out;
  const auto& edges = graph.edges;
  std::vector<EdgeKey> chosen;
  // parent array copied per level: n <= 8 keeps this cheap
  auto recurse = [&](auto&& self, std::size_t next, std::vector<int> parent) -> void {
    if (chosen.size() + 1 == n) {
      out.push_back(SpanningTree::from_edges(n, chosen));
      return;
    }
    if (edges.size() - next < n - 1 - chosen.size()) return;
    for (std::size_t e = next; e < edges.size(); ++e) {
      if (edges.size() - e < n - 1 - chosen.size()) return;
      auto root = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
        return x;
      };
      const int ra = root(edges[e].i);
      const int rb = root(edges[e].j);
      if (ra == rb) continue;
      std::vector<int> merged = parent;
      merged[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
      chosen.emplace_back(edges[e].i, edges[e].j);
      self(self, e + 1, std::move(merged));
      chosen.pop_back();
    }
  };
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  recurse(recurse, 0, parent);
  return out;
}

double OrientationRates::rate(Orientation o) const {
  switch (o) {
    case Orientation::H: return horizontal;
    case Orientation::V: return vertical;
    case Orientation::D1: return diagonal1;
    case Orientation::D2: return diagonal2;
  }
  return horizontal;
}

SpanningTree sample_random_tree(const LatticeGraph& graph, const OrientationRates& rates,
                                std::mt19937_64& rng) {
  std::vector<double> omega(graph.edges.size());
  std::exponential_distribution<double> unit_exp(1.0);
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const double rate = rates.rate(graph.edges[e].orientation);
    if (!(rate > 0.0)) throw Error(ErrorKind::Domain, "orientation rates must be positive");
    const double draw = unit_exp(rng);
    omega[e] = std::isinf(rate) ? 0.0 : draw / rate;
  }
  std::vector<std::size_t> order(graph.edges.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return omega[a] < omega[b]; });
  return kruskal(graph, order);
}

SpanningTree sample_random_tree(const LatticeGraph& graph, const OrientationRates& rates,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_random_tree(graph, rates, rng);
}

TreeEnsemble sample_tree_ensemble(const LatticeGraph& graph, const OrientationRates& rates,
                                  std::size_t count, std::uint64_t seed) {
  if (count == 0) throw Error(ErrorKind::Domain, "ensemble size must be at least 1");
  std::mt19937_64 rng(seed);
  TreeEnsemble ensemble;
  std::set<std::vector<EdgeKey>> seen;
  for (std::size_t d = 0; d < count; ++d) {
    auto tree = sample_random_tree(graph, rates, rng);
    ++ensemble.raw_draws;
    if (seen.insert(tree.edges).second) ensemble.trees.push_back(std::move(tree));
  }
  return ensemble;
}

SpanningTree max_weight_spanning_tree(const LatticeGraph& graph,
                                      const std::vector<double>& edge_scores) {
  if (edge_scores.size() != graph.edges.size())
    throw Error(ErrorKind::Domain, "one score per graph edge required");
  std::vector<std::size_t> order(graph.edges.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return edge_scores[a] > edge_scores[b]; });
  return kruskal(graph, order);
}

std::vector<EdgeKey> tree_path(const SpanningTree& tree, int i, int j) {
  const std::size_t n = tree.node_count;
  if (i < 0 || j < 0 || static_cast<std::size_t>(std::max(i, j)) >= n)
    throw Error(ErrorKind::Domain, "tree node index out of range");
  if (i == j) return {};
  const auto adj = tree_adjacency(tree);
  std::vector<int> parent(n, -1);
  std::queue<int> frontier;
  frontier.push(i);
  parent[static_cast<std::size_t>(i)] = i;
  while (!frontier.empty()) {
    const int v = frontier.front();
    frontier.pop();
    if (v == j) break;
    for (int w : adj[static_cast<std::size_t>(v)]) {
      if (parent[static_cast<std::size_t>(w)] != -1) continue;
      parent[static_cast<std::size_t>(w)] = v;
      frontier.push(w);
    }
  }
  if (parent[static_cast<std::size_t>(j)] == -1)
    throw Error(ErrorKind::Connectivity, "nodes are not connected in the tree");
  std::vector<EdgeKey> path;
  for (int v = j; v != i; v = parent[static_cast<std::size_t>(v)])
    path.emplace_back(parent[static_cast<std::size_t>(v)], v);
  std::reverse(path.begin(), path.end());
  return path;
}

double tree_gamma(const SpanningTree& tree, const EdgeValues& gammas, int i, int j) {
  double total = 0.0;
  for (auto [a, b] : tree_path(tree, i, j)) total += gammas.at(a, b);
  return total;
}

Eigen::MatrixXd tree_gamma_matrix(const SpanningTree& tree, const EdgeValues& gammas) {
  const std::size_t n = tree.node_count;
  const auto adj = tree_adjacency(tree);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::vector<double> dist(n);
  std::vector<char> seen(n);
  std::vector<int> stack;
  for (std::size_t root = 0; root < n; ++root) {
    std::fill(seen.begin(), seen.end(), 0);
    dist[root] = 0.0;
    seen[root] = 1;
    stack.assign(1, static_cast<int>(root));
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w : adj[static_cast<std::size_t>(v)]) {
        if (seen[static_cast<std::size_t>(w)]) continue;
        seen[static_cast<std::size_t>(w)] = 1;
        dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(v)] + gammas.at(v, w);
        stack.push_back(w);
      }
    }
    for (std::size_t k = 0; k < n; ++k)
      out(static_cast<Eigen::Index>(root), static_cast<Eigen::Index>(k)) = dist[k];
  }
  return out;
}

std::vector<std::vector<int>> hop_distances(const LatticeGraph& graph) {
  const std::size_t n = graph.node_count();
  std::vector<std::vector<int>> adj(n);
  for (const auto& e : graph.edges) {
    adj[static_cast<std::size_t>(e.i)].push_back(e.j);
    adj[static_cast<std::size_t>(e.j)].push_back(e.i);
  }
  std::vector<std::vector<int>> hops(n, std::vector<int>(n, -1));
  for (std::size_t s = 0; s < n; ++s) {
    std::queue<int> frontier;
    hops[s][s] = 0;
    frontier.push(static_cast<int>(s));
    while (!frontier.empty()) {
      const int v = frontier.front();
      frontier.pop();
      for (int w : adj[static_cast<std::size_t>(v)]) {
        if (hops[s][static_cast<std::size_t>(w)] != -1) continue;
        hops[s][static_cast<std::size_t>(w)] = hops[s][static_cast<std::size_t>(v)] + 1;
        frontier.push(w);
      }
    }
  }
  return hops;
}

}  // namespace hrmix
