#include "hrmix/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hrmix/dataset.hpp"
#include "hrmix/error.hpp"
#include "hrmix/mixture.hpp"

namespace hrmix {
namespace {

constexpr double kMinAcceptance = 1e-3;
constexpr std::size_t kAcceptanceBurnIn = 1000;

double unit_pareto(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return 1.0 / (1.0 - unif(rng));
}

// One accepted MPD draw; returns the number of proposals used.
std::size_t draw_mpd(const RootedTreeSampler& sampler, std::mt19937_64& rng, std::vector<double>& x,
                     std::size_t& accepted_total, std::size_t& proposal_total) {
  const std::size_t n = sampler.node_count();
  std::uniform_int_distribution<std::size_t> pick_root(0, n - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::size_t used = 0;
  for (;;) {
    sampler.sample(pick_root(rng), rng, x);
    ++used;
    ++proposal_total;
    std::size_t above = 0;
    for (double v : x) above += v > 1.0;
    if (unif(rng) * static_cast<double>(above) < 1.0) {
      ++accepted_total;
      return used;
    }
    if (proposal_total >= kAcceptanceBurnIn &&
        static_cast<double>(accepted_total) < kMinAcceptance * static_cast<double>(proposal_total))
      throw Error(ErrorKind::SamplerDegeneracy,
                  "MPD rejection sampler acceptance fell below 1e-3");
  }
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t k = 0; k < order.size();) {
    std::size_t end = k;
    while (end + 1 < order.size() && v[order[end + 1]] == v[order[k]]) ++end;
    const double r = 0.5 * static_cast<double>(k + end) + 1.0;
    for (std::size_t m = k; m <= end; ++m) ranks[order[m]] = r;
    k = end + 1;
  }
  return ranks;
}

}  // namespace

RootedTreeSampler::RootedTreeSampler(const SpanningTree& tree, const EdgeValues& gammas)
    : n_(tree.node_count) {
  if (n_ == 0) throw Error(ErrorKind::Domain, "tree has no nodes");
  if (!is_spanning_tree(tree)) throw Error(ErrorKind::Domain, "edge set is not a spanning tree");
  std::vector<std::vector<std::pair<int, double>>> adj(n_);
  for (auto [a, b] : tree.edges) {
    const double g = gammas.at(a, b);
    if (!(g >= 0.0) || !std::isfinite(g)) throw Error(ErrorKind::Domain, "edge gamma must be finite and >= 0");
    adj[static_cast<std::size_t>(a)].emplace_back(b, g);
    adj[static_cast<std::size_t>(b)].emplace_back(a, g);
  }
  orders_.resize(n_);
  std::vector<int> stack;
  std::vector<char> seen(n_);
  for (std::size_t root = 0; root < n_; ++root) {
    std::fill(seen.begin(), seen.end(), 0);
    seen[root] = 1;
    stack.assign(1, static_cast<int>(root));
    auto& order = orders_[root];
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (auto [w, g] : adj[static_cast<std::size_t>(v)]) {
        if (seen[static_cast<std::size_t>(w)]) continue;
        seen[static_cast<std::size_t>(w)] = 1;
        order.push_back({v, w, -0.5 * g, std::sqrt(g)});
        stack.push_back(w);
      }
    }
  }
}

void RootedTreeSampler::sample(std::size_t root, std::mt19937_64& rng, std::vector<double>& x) const {
  if (root >= n_) throw Error(ErrorKind::Domain, "root index out of range");
  x.resize(n_);
  std::normal_distribution<double> gauss(0.0, 1.0);
  x[root] = unit_pareto(rng);
  // work on logs so that chains of increments stay exact
  for (const auto& st : orders_[root]) {
    const double log_parent = std::log(x[static_cast<std::size_t>(st.parent)]);
    const double inc = st.sd > 0.0 ? st.mean + st.sd * gauss(rng) : 0.0;
    x[static_cast<std::size_t>(st.child)] = inc == 0.0 ? x[static_cast<std::size_t>(st.parent)]
                                                       : std::exp(log_parent + inc);
  }
}

RootedSample sample_tree_hr_rooted(const SpanningTree& tree, const EdgeValues& gammas, int root,
                                   std::uint64_t seed) {
  const RootedTreeSampler sampler(tree, gammas);
  std::mt19937_64 rng(seed);
  RootedSample out;
  out.root = root;
  if (root < 0) throw Error(ErrorKind::Domain, "root index out of range");
  sampler.sample(static_cast<std::size_t>(root), rng, out.values);
  return out;
}

MpdSamples sample_mpd_tree(const SpanningTree& tree, const EdgeValues& gammas, std::size_t n,
                           std::mt19937_64& rng) {
  if (n == 0) throw Error(ErrorKind::Domain, "sample count must be at least 1");
  const RootedTreeSampler sampler(tree, gammas);
  const std::size_t nodes = sampler.node_count();
  MpdSamples out;
  out.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(nodes));
  std::vector<double> x;
  std::size_t accepted = 0;
  for (std::size_t s = 0; s < n; ++s) {
    draw_mpd(sampler, rng, x, accepted, out.proposals);
    for (std::size_t i = 0; i < nodes; ++i)
      out.values(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)) = x[i];
  }
  return out;
}

MpdSamples sample_mpd_tree(const SpanningTree& tree, const EdgeValues& gammas, std::size_t n,
                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_mpd_tree(tree, gammas, n, rng);
}

MixtureSamples sample_mixture(const TreeMixtureModel& model, std::size_t n, std::uint64_t seed) {
  model.validate();
  if (n == 0) throw Error(ErrorKind::Domain, "sample count must be at least 1");
  const EdgeValues scaled = model.gammas.scaled(model.a_opt);
  std::vector<std::optional<RootedTreeSampler>> samplers(model.ensemble.trees.size());
  const std::size_t nodes = model.ensemble.trees.front().node_count;

  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> pick_tree(model.prior.begin(), model.prior.end());
  MixtureSamples out;
  out.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(nodes));
  out.tree_index.resize(n);
  std::vector<double> x;
  std::size_t accepted = 0, proposals = 0;
  for (std::size_t s = 0; s < n; ++s) {
    const int m = pick_tree(rng);
    auto& sampler = samplers[static_cast<std::size_t>(m)];
    if (!sampler) sampler.emplace(model.ensemble.trees[static_cast<std::size_t>(m)], scaled);
    draw_mpd(*sampler, rng, x, accepted, proposals);
    out.tree_index[s] = m;
    for (std::size_t i = 0; i < nodes; ++i)
      out.values(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)) = x[i];
  }
  return out;
}

std::vector<Site> grid_sites(const GridSpec& grid) {
  if (grid.nx == 0 || grid.ny == 0 || !(grid.step > 0.0))
    throw Error(ErrorKind::Validation, "grid needs positive dimensions and spacing");
  std::vector<Site> sites;
  for (std::size_t iy = 0; iy < grid.ny; ++iy)
    for (std::size_t ix = 0; ix < grid.nx; ++ix) {
      const std::size_t k = sites.size();
      std::string id = std::to_string(k);
      id.insert(0, id.size() < 4 ? 4 - id.size() : 0, '0');
      sites.push_back({"S" + id, grid.lon0 + static_cast<double>(ix) * grid.step,
                       grid.lat0 + static_cast<double>(iy) * grid.step});
    }
  return sites;
}

DependenceSpec random_tree_dependence(const GridSpec& grid, double gamma, std::uint64_t seed) {
  const auto graph = build_lattice(grid_sites(grid), false);
  DependenceSpec spec;
  spec.tree = sample_random_tree(graph, OrientationRates{}, seed);
  for (auto [i, j] : spec.tree.edges) spec.gammas.set(i, j, gamma);
  return spec;
}

GriddedDataset generate_synthetic_dataset(const GridSpec& grid, const MarginalSpec& margins,
                                          const DependenceSpec& dependence, std::size_t T,
                                          std::uint64_t seed, int first_season) {
  if (T == 0) throw Error(ErrorKind::Validation, "synthetic dataset needs at least one day");
  if (!(margins.threshold_prob > 0.0 && margins.threshold_prob < 1.0) || !(margins.threshold > 0.0))
    throw Error(ErrorKind::Validation, "marginal spec needs 0 < threshold_prob < 1 and threshold > 0");
  validate(margins.gpd);

  GriddedDataset data;
  data.sites = grid_sites(grid);
  const std::size_t n = data.sites.size();

  Date d{first_season, 11, 1};
  for (std::size_t t = 0; t < T; ++t) {
    data.dates.push_back(d);
    d = d.next_day();
    if (d.month == 3) d = Date{d.year, 11, 1};
  }

  Eigen::MatrixXd latent(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(n));
  std::mt19937_64 rng(seed);
  if (dependence.independent) {
    for (Eigen::Index t = 0; t < latent.rows(); ++t)
      for (Eigen::Index i = 0; i < latent.cols(); ++i) latent(t, i) = unit_pareto(rng);
  } else {
    if (dependence.tree.node_count != n)
      throw Error(ErrorKind::Validation, "dependence tree does not match the grid size");
    latent = sample_mpd_tree(dependence.tree, dependence.gammas, T, rng).values;
  }

  const double pu = margins.threshold_prob;
  data.values.assign(n, std::vector<double>(T));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> col(T);
    for (std::size_t t = 0; t < T; ++t) col[t] = latent(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i));
    const auto ranks = average_ranks(col);
    for (std::size_t t = 0; t < T; ++t) {
      const double p = ranks[t] / static_cast<double>(T + 1);
      double z = p <= pu ? margins.threshold * p / pu
                         : margins.threshold + gpd_isf((1.0 - p) / (1.0 - pu), margins.gpd);
      z += margins.trend * static_cast<double>(season_of(data.dates[t]) - first_season);
      data.values[i][t] = z;
    }
  }
  return data;
}

}  // namespace hrmix
