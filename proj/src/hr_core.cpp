#include "hrmix/hr_core.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "hrmix/error.hpp"
#include "hrmix/graphs.hpp"
#include "hrmix/normal.hpp"
#include "hrmix/simulate.hpp"

namespace hrmix {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_positive(double x1, double x2) {
  if (!(x1 > 0.0) || !(x2 > 0.0))
    throw Error(ErrorKind::Domain, "exponent function arguments must be positive");
}

void require_gamma(double g) {
  if (!(g >= 0.0)) throw Error(ErrorKind::Domain, "variogram value must be nonnegative");
}

}  // namespace

void validate_variogram(const Eigen::MatrixXd& gamma) {
  if (gamma.rows() != gamma.cols() || gamma.rows() == 0)
    throw Error(ErrorKind::InvalidVariogram, "variogram matrix must be square and nonempty");
  for (Eigen::Index i = 0; i < gamma.rows(); ++i) {
    if (gamma(i, i) != 0.0)
      throw Error(ErrorKind::InvalidVariogram, "variogram diagonal must be zero");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (!(gamma(i, j) >= 0.0) || !std::isfinite(gamma(i, j)))
        throw Error(ErrorKind::InvalidVariogram, "variogram entries must be finite and >= 0");
      if (gamma(i, j) != gamma(j, i))
        throw Error(ErrorKind::InvalidVariogram, "variogram matrix must be symmetric");
    }
  }
}

Eigen::MatrixXd sigma_k(const Eigen::MatrixXd& gamma, Eigen::Index k) {
  validate_variogram(gamma);
  const Eigen::Index n = gamma.rows();
  if (k < 0 || k >= n) throw Error(ErrorKind::Domain, "anchor index out of range");
  Eigen::MatrixXd sigma(n - 1, n - 1);
  for (Eigen::Index a = 0, i = 0; i < n; ++i) {
    if (i == k) continue;
    for (Eigen::Index b = 0, j = 0; j < n; ++j) {
      if (j == k) continue;
      sigma(a, b) = 0.5 * (gamma(i, k) + gamma(j, k) - gamma(i, j));
      ++b;
    }
    ++a;
  }
  if (n > 1) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(hi > 0.0) || !(lo > kPdRelativeTolerance * hi))
      throw Error(ErrorKind::InvalidVariogram,
                  "conditional covariance is not strictly positive definite (min eigenvalue " +
                      std::to_string(lo) + ")");
  }
  return sigma;
}

double hr_log_intensity(std::span<const double> x, const Eigen::MatrixXd& gamma, Eigen::Index k) {
  const auto n = static_cast<Eigen::Index>(x.size());
  if (gamma.rows() != n) throw Error(ErrorKind::Domain, "dimension mismatch between x and gamma");
  for (double xi : x)
    if (!(xi > 0.0)) throw Error(ErrorKind::Domain, "intensity arguments must be positive");
  const Eigen::MatrixXd sigma = sigma_k(gamma, k);
  const double log_xk = std::log(x[static_cast<std::size_t>(k)]);
  double log_prefactor = -2.0 * log_xk;
  if (n == 1) return log_prefactor;

  Eigen::VectorXd centred(n - 1);
  for (Eigen::Index a = 0, i = 0; i < n; ++i) {
    if (i == k) continue;
    const double log_xi = std::log(x[static_cast<std::size_t>(i)]);
    log_prefactor -= log_xi;
    centred(a++) = log_xi - log_xk + 0.5 * gamma(i, k);
  }
  const Eigen::LLT<Eigen::MatrixXd> chol(sigma);
  const Eigen::VectorXd z = chol.matrixL().solve(centred);
  const double log_det = 2.0 * chol.matrixLLT().diagonal().array().log().sum();
  const double dim = static_cast<double>(n - 1);
  return log_prefactor - 0.5 * z.squaredNorm() - 0.5 * log_det - dim * normal::kLogSqrt2Pi;
}

double hr_intensity(std::span<const double> x, const Eigen::MatrixXd& gamma, Eigen::Index k) {
  return std::exp(hr_log_intensity(x, gamma, k));
}

double bivariate_V(double x1, double x2, double g) {
  require_positive(x1, x2);
  require_gamma(g);
  if (g == 0.0) return std::max(1.0 / x1, 1.0 / x2);
  const double a = std::sqrt(g);
  const double r = std::log(x2 / x1) / a;
  return normal::cdf(0.5 * a + r) / x1 + normal::cdf(0.5 * a - r) / x2;
}

double bivariate_V1(double x1, double x2, double g) {
  require_positive(x1, x2);
  require_gamma(g);
  if (g == 0.0) {
    if (x1 < x2) return -1.0 / (x1 * x1);
    return x1 == x2 ? -0.5 / (x1 * x1) : 0.0;
  }
  const double a = std::sqrt(g);
  return -normal::cdf(0.5 * a + std::log(x2 / x1) / a) / (x1 * x1);
}

double bivariate_V2(double x1, double x2, double g) { return bivariate_V1(x2, x1, g); }

double bivariate_log_neg_V1(double x1, double x2, double g) {
  require_positive(x1, x2);
  require_gamma(g);
  if (g == 0.0) return std::log(-bivariate_V1(x1, x2, g));
  const double a = std::sqrt(g);
  return normal::log_cdf(0.5 * a + std::log(x2 / x1) / a) - 2.0 * std::log(x1);
}

double bivariate_log_intensity(double x1, double x2, double g) {
  require_positive(x1, x2);
  require_gamma(g);
  if (g == 0.0) return kNegInf;
  const double a = std::sqrt(g);
  const double w = 0.5 * a + std::log(x2 / x1) / a;
  return normal::log_pdf(w) - std::log(a) - 2.0 * std::log(x1) - std::log(x2);
}

double bivariate_intensity(double x1, double x2, double g) {
  return std::exp(bivariate_log_intensity(x1, x2, g));
}

double chi_hr(double g) {
  require_gamma(g);
  if (std::isinf(g)) return 0.0;
  return 2.0 - bivariate_V(1.0, 1.0, g);
}

double gamma_from_chi(double chi) {
  if (!(chi > 0.0 && chi <= 1.0)) throw Error(ErrorKind::Domain, "chi must lie in (0, 1]");
  const double root = 2.0 * normal::isf(0.5 * chi);
  return root * root;
}

MonteCarloEstimate mc_exponent_V1(const SpanningTree& tree, const EdgeValues& gammas,
                                  std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::Domain, "Monte Carlo sample size must be positive");
  const std::size_t nodes = tree.node_count;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_root(0, nodes - 1);
  const RootedTreeSampler sampler(tree, gammas);
  std::vector<double> x(nodes);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    sampler.sample(pick_root(rng), rng, x);
    std::size_t above = 0;
    for (double v : x) above += v > 1.0 ? 1 : 0;
    const double value = static_cast<double>(nodes) / static_cast<double>(above);
    sum += value;
    sum_sq += value * value;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = n > 1 ? (sum_sq - n * mean * mean) / static_cast<double>(n - 1) : 0.0;
  return {mean, std::sqrt(std::max(var, 0.0) / static_cast<double>(n)), n};
}

}  // namespace hrmix
