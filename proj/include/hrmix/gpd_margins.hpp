#pragma once

// Site-wise generalized Pareto tails spliced with empirical CDFs, and the
// probability integral transform to and from the unit-Pareto scale.

#include <cstddef>
#include <span>
#include <vector>

namespace hrmix {

/// |xi| below this uses the exponential branch.
inline constexpr double kXiSwitch = 1e-8;
/// Box on the shape parameter during fitting.
inline constexpr double kXiLower = -0.95;
inline constexpr double kXiUpper = 0.95;
inline constexpr std::size_t kMinGpdExceedances = 10;

struct GpdParams {
  double sigma = 1.0;
  double xi = 0.0;
};

/// Throws Domain for sigma <= 0.
void validate(const GpdParams& p);

/// GP distribution function at excess z >= 0.
double gpd_cdf(double z, const GpdParams& p);
/// Survival 1 - H(z), computed without cancellation.
double gpd_sf(double z, const GpdParams& p);
/// Inverse survival: the excess z with 1 - H(z) = s, s in (0, 1].
double gpd_isf(double s, const GpdParams& p);
/// Log density; -inf outside the support.
double gpd_logpdf(double z, const GpdParams& p);

struct Exceedance {
  double value = 0.0;
  std::size_t site = 0;
};

/// Pooled log-likelihood of the excesses value - u.
double pooled_gpd_loglik(std::span<const Exceedance> exceedances, double u,
                         const GpdParams& p);

struct GpdFit {
  GpdParams params;
  double loglik = 0.0;
  double start_loglik = 0.0;
  int iterations = 0;
  bool boundary = false;  // xi ended on the box
};

/// Maximum likelihood over the pooled neighbourhood exceedances of u.
/// Throws InsufficientData below kMinGpdExceedances, Domain for values <= u,
/// OptimizationError (with the last iterate) on non-convergence.
GpdFit fit_pooled_gpd(std::span<const Exceedance> exceedances, double u);

/// Type-7 (linear interpolation) empirical quantile of a sample; NaNs ignored.
double empirical_quantile(std::span<const double> sample, double q);

struct SiteNeighborhood {
  std::size_t center = 0;
  std::vector<std::size_t> members;  // includes center
};

/// Great-circle distance in km between two lon/lat points given in degrees.
double geodesic_km(double lon1, double lat1, double lon2, double lat2);

/// Center plus its `neighbors` nearest sites by geodesic distance (ties by
/// index). Fewer members when there are not enough sites.
std::vector<SiteNeighborhood> nearest_neighborhoods(std::span<const double> lon,
                                                    std::span<const double> lat,
                                                    std::size_t neighbors = 4);

class MarginalModel {
 public:
  MarginalModel() = default;
  /// `sample` is the site's full sample; it is sorted and NaNs are dropped.
  MarginalModel(double threshold, GpdParams gpd, std::vector<double> sample);
  /// Explicit zeta, for models loaded from disk.
  MarginalModel(double threshold, double zeta, GpdParams gpd, std::vector<double> sample);

  double threshold() const noexcept { return threshold_; }
  double zeta() const noexcept { return zeta_; }
  const GpdParams& gpd() const noexcept { return gpd_; }
  const std::vector<double>& sorted_sample() const noexcept { return sorted_; }

  /// Empirical CDF with plotting position k/(T+1); ties take the average rank.
  double empirical_cdf(double z) const;
  /// Spliced distribution: G above the threshold, the empirical CDF below.
  double cdf(double z) const;
  /// Y = 1 / (1 - F(z)); the tail branch is used for z >= threshold.
  double to_unit_pareto(double z) const;
  std::vector<double> to_unit_pareto(std::span<const double> series) const;
  /// Inverse of to_unit_pareto. Throws Domain for y < 1.
  double from_unit_pareto(double y) const;
  /// Level exceeded once every m observations on average.
  double return_level(double m) const;

 private:
  double threshold_ = 0.0;
  double zeta_ = 1.0;
  GpdParams gpd_{};
  std::vector<double> sorted_;
};

double return_level(double m, const MarginalModel& model);

struct MarginFitOptions {
  double threshold_quantile = 0.95;
  std::size_t neighbors = 4;
};

/// Fits every site of a panel (sites x times, NaN = missing). The threshold of
/// each center site is applied to all of its pooled members.
std::vector<MarginalModel> fit_site_margins(const std::vector<std::vector<double>>& series,
                                            std::span<const double> lon,
                                            std::span<const double> lat,
                                            const MarginFitOptions& options,
                                            std::vector<GpdFit>* fits = nullptr);

}  // namespace hrmix
