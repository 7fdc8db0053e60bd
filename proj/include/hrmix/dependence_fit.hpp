#pragma once

// Edge-wise censored pairwise likelihood for the HR variogram and the
// stochastic gradient fit of the spanning-tree edge weights.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hrmix/graphs.hpp"

namespace hrmix {

inline constexpr double kLikelihoodFloor = 1e-300;
inline constexpr double kGammaLower = 1e-4;
inline constexpr double kGammaUpper = 1e3;
inline constexpr std::size_t kMinPairExceedances = 10;

/// Sites x times panel on the unit-Pareto scale; NaN marks a missing value.
using Panel = std::vector<std::vector<double>>;

/// Log contribution of one time point to the pairwise censored likelihood.
/// Empty when neither value exceeds u. Values below the floor are clamped and
/// counted in *floor_hits.
std::optional<double> censored_pair_loglik(double yi, double yj, double u, double g,
                                           std::size_t* floor_hits = nullptr);

/// Sum of censored_pair_loglik over the complete pairs of two series.
double censored_pair_total(std::span<const double> yi, std::span<const double> yj, double u,
                           double g, std::size_t* floor_hits = nullptr);

struct EdgeGammaFit {
  double gamma = 1.0;
  double loglik = 0.0;
  double start_gamma = 1.0;
  double start_loglik = 0.0;
  std::size_t exceedances = 0;
  std::size_t floor_hits = 0;
  bool boundary = false;
};

/// Maximizes the censored pairwise likelihood over g in [1e-4, 1e3] on log g.
/// Throws InsufficientData below kMinPairExceedances joint exceedances.
EdgeGammaFit fit_edge_gamma(std::span<const double> yi, std::span<const double> yj, double u);

/// fit_edge_gamma on every graph edge.
EdgeValues fit_edge_gammas(const Panel& panel, const LatticeGraph& graph, double u,
                           std::vector<EdgeGammaFit>* fits = nullptr);

/// Per-time log likelihood contributions on the edges of a graph, each
/// divided by the unit-Pareto density (y/u)^-2 of its exceeding coordinates so
/// that tree products carry no degree-dependent factor. Row r belongs to panel
/// time times[r]; column e to graph edge e. Pairs without a contribution hold
/// 0 (the neutral entry 1 on the likelihood scale).
struct LikelihoodSeries {
  std::size_t node_count = 0;
  std::vector<EdgeKey> edges;
  std::vector<std::size_t> times;
  Eigen::MatrixXd log_values;
  std::size_t floor_hits = 0;

  std::size_t size() const noexcept { return times.size(); }
  /// The N x N likelihood matrix of row r.
  Eigen::MatrixXd matrix(std::size_t r) const;
};

/// Times where no site exceeds u are dropped.
LikelihoodSeries build_likelihood_matrices(const Panel& panel, const LatticeGraph& graph,
                                           const EdgeValues& gammas, double u);

struct DsgaConfig {
  double a1 = 100.0;
  double rho0 = 0.05;
  double kappa = 50.0;
  std::size_t batch = 32;
  std::size_t max_iterations = 2000;
  double tolerance = 1e-6;
  std::size_t patience = 50;
  std::size_t eval_every = 10;

  void validate() const;
};

struct ObjectiveValue {
  double value = 0.0;
  bool singular = false;
};

/// sum_{t in batch} log det Q(beta o L_t) - |batch| log det Q(beta)
///   - a1 (||U(beta)||^2 - 1)^2, with beta = exp(eta) per edge.
/// A singular Q gives a large negative value with the flag set.
ObjectiveValue dsga_objective(std::span<const double> eta, std::span<const std::size_t> batch,
                              const LikelihoodSeries& series, double a1);

/// Analytic gradient of dsga_objective with respect to eta.
std::vector<double> dsga_gradient(std::span<const double> eta, std::span<const std::size_t> batch,
                                  const LikelihoodSeries& series, double a1);

/// Every row index of the series, i.e. the full-data batch.
std::vector<std::size_t> full_batch(const LikelihoodSeries& series);

struct DsgaTracePoint {
  std::size_t iteration = 0;
  double objective = 0.0;
};

struct DsgaResult {
  EdgeValues beta;
  std::vector<double> eta;
  std::size_t iterations = 0;
  double objective = 0.0;
  double initial_objective = 0.0;
  bool converged = false;
  std::vector<DsgaTracePoint> trace;
};

/// Uniform start beta = 1/sqrt(|E|), mini-batch ascent with decaying step and
/// projection to unit norm. Returns the best full-data iterate seen.
DsgaResult dsga_fit_beta(const LikelihoodSeries& series, const DsgaConfig& config,
                         std::uint64_t seed);

/// sqrt of the sum of squared edge weights.
double upper_norm(const EdgeValues& beta);

}  // namespace hrmix
