#include "hrmix/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hrmix/error.hpp"
#include "hrmix/gpd_margins.hpp"
#include "hrmix/hr_core.hpp"
#include "hrmix/normal.hpp"
#include "hrmix/optimize.hpp"

namespace hrmix {
namespace {

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double check_support(std::span<const double> x) {
  double log_margin = 0.0;
  double max_x = 0.0;
  for (double v : x) {
    if (!(v > 0.0)) throw Error(ErrorKind::Domain, "density arguments must be positive");
    max_x = std::max(max_x, v);
    log_margin -= 2.0 * std::log(v);
  }
  if (!(max_x > 1.0)) throw Error(ErrorKind::Domain, "point lies outside {max x > 1}");
  return log_margin;
}

double log_lambda_star(double xi, double xj, double g) {
  return bivariate_log_intensity(xi, xj, g) + 2.0 * std::log(xi) + 2.0 * std::log(xj);
}

// path gamma per (tree, pair)
Eigen::MatrixXd path_sums(const TreeMixtureModel& model, std::span<const ChiTarget> targets) {
  Eigen::MatrixXd sums(static_cast<Eigen::Index>(model.ensemble.trees.size()),
                       static_cast<Eigen::Index>(targets.size()));
  for (std::size_t m = 0; m < model.ensemble.trees.size(); ++m) {
    const Eigen::MatrixXd g = tree_gamma_matrix(model.ensemble.trees[m], model.gammas);
    for (std::size_t p = 0; p < targets.size(); ++p)
      sums(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p)) = g(targets[p].i, targets[p].j);
  }
  return sums;
}

double chi_from_path(double g, double a) { return 2.0 * normal::sf(0.5 * std::sqrt(a * g)); }

void check_scale(double a) {
  if (!(a > 0.0 && a <= 1.0)) throw Error(ErrorKind::Domain, "bias scale must lie in (0, 1]");
}

}  // namespace

void TreeMixtureModel::validate() const {
  if (ensemble.trees.empty()) throw Error(ErrorKind::Validation, "model has an empty ensemble");
  if (prior.size() != ensemble.trees.size())
    throw Error(ErrorKind::Validation, "prior length does not match the ensemble");
  double total = 0.0;
  for (double p : prior) {
    if (!(p >= 0.0)) throw Error(ErrorKind::Validation, "prior probabilities must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorKind::Validation, "priors do not sum to 1");
  if (!(a_opt > 0.0 && a_opt <= 1.0)) throw Error(ErrorKind::Validation, "a_opt must lie in (0, 1]");
  for (const auto& tree : ensemble.trees)
    for (auto [i, j] : tree.edges)
      if (!gammas.contains(i, j))
        throw Error(ErrorKind::Validation, "ensemble tree uses an edge without a gamma value");
}

Eigen::MatrixXd edge_matrix(std::size_t n, const EdgeValues& values) {
  const auto dim = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& [key, v] : values) {
    if (key.first < 0 || key.second >= dim)
      throw Error(ErrorKind::Domain, "edge index outside the node range");
    w(key.first, key.second) = v;
    w(key.second, key.first) = v;
  }
  return w;
}

std::vector<double> tree_prior_probs(const TreeEnsemble& ensemble, const EdgeValues& beta) {
  if (ensemble.trees.empty()) throw Error(ErrorKind::DegeneratePrior, "empty tree ensemble");
  std::vector<double> logw(ensemble.trees.size());
  for (std::size_t m = 0; m < ensemble.trees.size(); ++m) {
    double s = 0.0;
    for (auto [i, j] : ensemble.trees[m].edges) {
      const double b = beta.at(i, j);
      if (b < 0.0 || !std::isfinite(b)) throw Error(ErrorKind::Domain, "edge weights must be finite and >= 0");
      s += std::log(b);
    }
    logw[m] = s;
  }
  const double norm = log_sum_exp(logw);
  if (!std::isfinite(norm))
    throw Error(ErrorKind::DegeneratePrior, "every tree in the ensemble has zero prior mass");
  std::vector<double> p(logw.size());
  for (std::size_t m = 0; m < p.size(); ++m) p[m] = std::exp(logw[m] - norm);
  return p;
}

double lambda_star(double xi, double xj, double g) { return std::exp(log_lambda_star(xi, xj, g)); }

double mixture_density_explicit(std::span<const double> x, const TreeMixtureModel& model) {
  const double log_margin = check_support(x);
  if (!model.ensemble.trees.empty() && x.size() != model.ensemble.trees.front().node_count)
    throw Error(ErrorKind::Domain, "point dimension does not match the model");
  std::vector<double> terms;
  terms.reserve(model.ensemble.trees.size());
  for (std::size_t m = 0; m < model.ensemble.trees.size(); ++m) {
    if (!(model.prior[m] > 0.0)) continue;
    double s = std::log(model.prior[m]);
    for (auto [i, j] : model.ensemble.trees[m].edges)
      s += log_lambda_star(x[static_cast<std::size_t>(i)], x[static_cast<std::size_t>(j)],
                           model.gammas.at(i, j));
    terms.push_back(s);
  }
  if (terms.empty()) return 0.0;
  return std::exp(log_sum_exp(terms) + log_margin);
}

double mixture_density_det(std::span<const double> x, const EdgeValues& gammas,
                           const EdgeValues& beta, const LatticeGraph& graph) {
  const double log_margin = check_support(x);
  const std::size_t n = graph.node_count();
  if (x.size() != n) throw Error(ErrorKind::Domain, "point dimension does not match the graph");
  if (n == 1) return std::exp(log_margin);

  // Scale both weight sets by their largest log entry; the ratio picks up
  // (N-1) times the difference of the shifts.
  std::vector<double> log_b, log_bl;
  for (const auto& e : graph.edges) {
    const double lb = std::log(beta.at(e.i, e.j));
    log_b.push_back(lb);
    log_bl.push_back(lb + log_lambda_star(x[static_cast<std::size_t>(e.i)],
                                          x[static_cast<std::size_t>(e.j)], gammas.at(e.i, e.j)));
  }
  auto log_det = [&](const std::vector<double>& lw) {
    const double shift = *std::max_element(lw.begin(), lw.end());
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
      const double v = std::exp(lw[e] - shift);
      w(graph.edges[e].i, graph.edges[e].j) = v;
      w(graph.edges[e].j, graph.edges[e].i) = v;
    }
    const auto ld = log_laplacian_minor_det(w);
    if (ld.singular) throw Error(ErrorKind::Singular, "Laplacian minor is singular");
    return ld.value + static_cast<double>(n - 1) * shift;
  };
  return std::exp(log_margin + log_det(log_bl) - log_det(log_b));
}

double chi_tree(const SpanningTree& tree, const EdgeValues& gammas, int i, int j, double a) {
  check_scale(a);
  if (i == j) return 1.0;
  return chi_from_path(tree_gamma(tree, gammas, i, j), a);
}

double chi_mixture(const TreeMixtureModel& model, int i, int j, double a) {
  check_scale(a);
  if (model.prior.size() != model.ensemble.trees.size())
    throw Error(ErrorKind::Validation, "prior length does not match the ensemble");
  double chi = 0.0;
  for (std::size_t m = 0; m < model.ensemble.trees.size(); ++m)
    if (model.prior[m] > 0.0) chi += model.prior[m] * chi_tree(model.ensemble.trees[m], model.gammas, i, j, a);
  return chi;
}

std::optional<double> empirical_chi(std::span<const double> yi, std::span<const double> yj, double q) {
  if (yi.size() != yj.size()) throw Error(ErrorKind::Domain, "series lengths differ");
  std::vector<double> a, b;
  for (std::size_t t = 0; t < yi.size(); ++t) {
    if (std::isnan(yi[t]) || std::isnan(yj[t])) continue;
    a.push_back(yi[t]);
    b.push_back(yj[t]);
  }
  if (a.empty()) return std::nullopt;
  const double qa = empirical_quantile(a, q);
  const double qb = empirical_quantile(b, q);
  std::size_t na = 0, nb = 0, joint = 0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const bool ea = a[t] > qa;
    const bool eb = b[t] > qb;
    na += ea;
    nb += eb;
    joint += ea && eb;
  }
  if (na == 0 || nb == 0) return std::nullopt;
  const double jd = static_cast<double>(joint);
  return 0.5 * (jd / static_cast<double>(na) + jd / static_cast<double>(nb));
}

std::vector<EdgeKey> bias_pairs(const LatticeGraph& graph, int max_hops) {
  const auto hops = hop_distances(graph);
  std::vector<EdgeKey> pairs;
  for (std::size_t i = 0; i < hops.size(); ++i)
    for (std::size_t j = i + 1; j < hops.size(); ++j)
      if (hops[i][j] >= 1 && hops[i][j] <= max_hops)
        pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
  return pairs;
}

BiasFit fit_bias_scale(const TreeMixtureModel& model, std::span<const ChiTarget> targets) {
  if (targets.empty()) throw Error(ErrorKind::InsufficientData, "no empirical chi targets");
  const Eigen::MatrixXd sums = path_sums(model, targets);
  auto loss = [&](double a) {
    double total = 0.0;
    for (std::size_t p = 0; p < targets.size(); ++p) {
      double chi = 0.0;
      for (std::size_t m = 0; m < model.prior.size(); ++m)
        chi += model.prior[m] *
               chi_from_path(sums(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p)), a);
      const double d = targets[p].chi - chi;
      total += d * d;
    }
    return total;
  };
  const auto best = optimize::grid_brent_minimize(loss, 0.01, 1.0, 99, 40, true);
  BiasFit fit;
  fit.loss_at_one = loss(1.0);
  if (fit.loss_at_one <= best.value) {
    fit.a = 1.0;
    fit.loss = fit.loss_at_one;
  } else {
    fit.a = best.x;
    fit.loss = best.value;
  }
  return fit;
}

}  // namespace hrmix
