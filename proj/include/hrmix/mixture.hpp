#pragma once

// Tree-mixture MPD: priors over spanning trees, densities, chi measures and
// the bias-correction scale.

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "hrmix/graphs.hpp"

namespace hrmix {

struct TreeMixtureModel {
  LatticeGraph graph;
  TreeEnsemble ensemble;
  EdgeValues gammas;
  EdgeValues beta;
  std::vector<double> prior;  // one per ensemble tree, sums to 1
  double a_opt = 1.0;

  /// Throws Validation when the invariants above fail.
  void validate() const;
};

/// Dense symmetric N x N matrix holding `values` on its edges, zero elsewhere.
Eigen::MatrixXd edge_matrix(std::size_t n, const EdgeValues& values);

/// p(T_m) proportional to prod_{e in T_m} beta_e, normalized over the ensemble.
/// Throws DegeneratePrior when every product is zero.
std::vector<double> tree_prior_probs(const TreeEnsemble& ensemble, const EdgeValues& beta);

/// Pairwise factor lambda_ij(xi, xj) * xi^2 * xj^2.
double lambda_star(double xi, double xj, double g);

/// Unnormalized mixture density sum_m p_m prod lambda* prod x^-2.
double mixture_density_explicit(std::span<const double> x, const TreeMixtureModel& model);

/// prod x^-2 * det Q(beta o lambda*) / det Q(beta), computed in log space.
double mixture_density_det(std::span<const double> x, const EdgeValues& gammas,
                           const EdgeValues& beta, const LatticeGraph& graph);

/// 2 * (1 - Phi(sqrt(a * path gamma) / 2)).
double chi_tree(const SpanningTree& tree, const EdgeValues& gammas, int i, int j, double a = 1.0);

/// Prior-weighted average of chi_tree.
double chi_mixture(const TreeMixtureModel& model, int i, int j, double a);

/// Empirical chi at level q, averaged over both conditioning directions.
/// Missing values are skipped pairwise. Empty when a denominator is zero.
std::optional<double> empirical_chi(std::span<const double> yi, std::span<const double> yj,
                                    double q = 0.95);

struct ChiTarget {
  int i = 0;
  int j = 0;
  double chi = 0.0;
};

/// Pairs at hop distance 1..max_hops on the model graph.
std::vector<EdgeKey> bias_pairs(const LatticeGraph& graph, int max_hops = 3);

struct BiasFit {
  double a = 1.0;
  double loss = 0.0;
  double loss_at_one = 0.0;
};

/// argmin over a in (0, 1] of sum (chi_emp - chi_mixture(a))^2.
BiasFit fit_bias_scale(const TreeMixtureModel& model, std::span<const ChiTarget> targets);

}  // namespace hrmix
