#pragma once

// Husler-Reiss building blocks. Node indices are zero-based throughout.

#include <Eigen/Dense>
#include <cstdint>
#include <span>

namespace hrmix {

struct SpanningTree;
class EdgeValues;

/// Smallest eigenvalue must exceed this fraction of the largest.
inline constexpr double kPdRelativeTolerance = 1e-12;

/// Throws InvalidVariogram unless gamma is square, symmetric, zero on the
/// diagonal and nonnegative off it.
void validate_variogram(const Eigen::MatrixXd& gamma);

/// (N-1)x(N-1) covariance with entries (G_ik + G_jk - G_ij)/2, i,j != k.
/// Throws InvalidVariogram when the result is not strictly positive definite.
Eigen::MatrixXd sigma_k(const Eigen::MatrixXd& gamma, Eigen::Index k);

/// N-variate HR intensity anchored at k. The result does not depend on k.
double hr_intensity(std::span<const double> x, const Eigen::MatrixXd& gamma, Eigen::Index k = 0);
double hr_log_intensity(std::span<const double> x, const Eigen::MatrixXd& gamma,
                        Eigen::Index k = 0);

/// Bivariate exponent function V(x1, x2; g). g = 0 gives max(1/x1, 1/x2).
double bivariate_V(double x1, double x2, double g);
/// dV/dx1 and dV/dx2.
double bivariate_V1(double x1, double x2, double g);
double bivariate_V2(double x1, double x2, double g);
/// -d2V/dx1dx2; identical to hr_intensity for N = 2.
double bivariate_intensity(double x1, double x2, double g);
double bivariate_log_intensity(double x1, double x2, double g);
/// log(-V1(x1, x2; g)), computed without underflow of the normal CDF.
double bivariate_log_neg_V1(double x1, double x2, double g);

/// Extremal coefficient chi = 2 - V(1, 1; g) = 2 * (1 - Phi(sqrt(g) / 2)).
double chi_hr(double g);
/// Inverse of chi_hr on (0, 1].
double gamma_from_chi(double chi);

struct MonteCarloEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// Monte Carlo estimate of the N-variate extremal coefficient V(1) of a tree
/// HR model, via V(1) = N * E[1 / #{j : X_j^(k) > 1}] with a uniform root k.
MonteCarloEstimate mc_exponent_V1(const SpanningTree& tree, const EdgeValues& gammas,
                                  std::size_t n, std::uint64_t seed);

}  // namespace hrmix
