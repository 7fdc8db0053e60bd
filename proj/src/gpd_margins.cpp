#include "hrmix/gpd_margins.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "hrmix/error.hpp"
#include "hrmix/optimize.hpp"

namespace hrmix {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool exponential_branch(double xi) { return std::abs(xi) < kXiSwitch; }

}  // namespace

void validate(const GpdParams& p) {
  if (!(p.sigma > 0.0) || !std::isfinite(p.sigma) || !std::isfinite(p.xi))
    throw Error(ErrorKind::Domain, "GP scale must be positive and finite, got sigma=" +
                                       std::to_string(p.sigma));
}

double gpd_sf(double z, const GpdParams& p) {
  validate(p);
  if (z <= 0.0) return 1.0;
  if (exponential_branch(p.xi)) return std::exp(-z / p.sigma);
  const double t = p.xi * z / p.sigma;
  if (t <= -1.0) return 0.0;
  return std::exp(-std::log1p(t) / p.xi);
}

double gpd_cdf(double z, const GpdParams& p) {
  validate(p);
  if (z <= 0.0) return 0.0;
  if (exponential_branch(p.xi)) return -std::expm1(-z / p.sigma);
  const double t = p.xi * z / p.sigma;
  if (t <= -1.0) return 1.0;
  return -std::expm1(-std::log1p(t) / p.xi);
}

double gpd_isf(double s, const GpdParams& p) {
  validate(p);
  if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorKind::Domain, "GP survival probability outside [0, 1]");
  const double log_s = std::log(s);
  if (exponential_branch(p.xi)) return -p.sigma * log_s;
  return p.sigma * std::expm1(-p.xi * log_s) / p.xi;
}

double gpd_logpdf(double z, const GpdParams& p) {
  if (!(p.sigma > 0.0) || z < 0.0) return kNegInf;
  if (exponential_branch(p.xi)) return -std::log(p.sigma) - z / p.sigma;
  const double t = p.xi * z / p.sigma;
  if (t <= -1.0) return kNegInf;
  return -std::log(p.sigma) - (1.0 / p.xi + 1.0) * std::log1p(t);
}

double pooled_gpd_loglik(std::span<const Exceedance> exceedances, double u, const GpdParams& p) {
  double total = 0.0;
  for (const auto& e : exceedances) {
    const double lp = gpd_logpdf(e.value - u, p);
    if (!std::isfinite(lp)) return kNegInf;
    total += lp;
  }
  return total;
}

GpdFit fit_pooled_gpd(std::span<const Exceedance> exceedances, double u) {
  if (exceedances.size() < kMinGpdExceedances)
    throw Error(ErrorKind::InsufficientData,
                "GP fit needs at least " + std::to_string(kMinGpdExceedances) +
                    " exceedances, got " + std::to_string(exceedances.size()));
  // Sorting makes the fit independent of the order of neighbourhood members.
  std::vector<double> excess;
  excess.reserve(exceedances.size());
  for (const auto& e : exceedances) {
    if (!(e.value > u))
      throw Error(ErrorKind::Domain, "exceedance " + std::to_string(e.value) +
                                         " is not above the threshold " + std::to_string(u));
    excess.push_back(e.value - u);
  }
  std::sort(excess.begin(), excess.end());

  auto loglik = [&](const GpdParams& p) {
    double total = 0.0;
    for (double z : excess) total += gpd_logpdf(z, p);
    return std::isfinite(total) ? total : kNegInf;
  };

  const double mean_excess =
      std::accumulate(excess.begin(), excess.end(), 0.0) / static_cast<double>(excess.size());
  const GpdParams start{mean_excess, 0.0};
  const double start_ll = loglik(start);

  const std::array<double, 2> lo{std::log(mean_excess) - 20.0, kXiLower};
  const std::array<double, 2> hi{std::log(mean_excess) + 20.0, kXiUpper};
  auto objective = [&](std::span<const double> x) {
    return -loglik(GpdParams{std::exp(x[0]), x[1]});
  };

  optimize::BoxSimplexOptions options;
  options.initial_step = 0.2;
  auto best = optimize::box_simplex_minimize(objective, {std::log(mean_excess), 0.0}, lo, hi, options);
  int iterations = best.iterations;
  // one restart from the optimum guards against a collapsed simplex
  options.initial_step = 0.05;
  auto again = optimize::box_simplex_minimize(objective, best.x, lo, hi, options);
  iterations += again.iterations;
  if (again.value <= best.value) best = std::move(again);
  if (!best.converged)
    throw OptimizationError("GP likelihood optimization did not converge", best.x);

  GpdFit fit;
  fit.params = {std::exp(best.x[0]), best.x[1]};
  fit.loglik = -best.value;
  fit.start_loglik = start_ll;
  fit.iterations = iterations;
  if (fit.loglik < start_ll) {
    fit.params = start;
    fit.loglik = start_ll;
  }
  fit.boundary = fit.params.xi <= kXiLower + 1e-6 || fit.params.xi >= kXiUpper - 1e-6;
  return fit;
}

double empirical_quantile(std::span<const double> sample, double q) {
  std::vector<double> v;
  v.reserve(sample.size());
  for (double x : sample)
    if (!std::isnan(x)) v.push_back(x);
  if (v.empty()) throw Error(ErrorKind::InsufficientData, "quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double geodesic_km(double lon1, double lat1, double lon2, double lat2) {
  constexpr double kEarthRadiusKm = 6371.0088;
  constexpr double kRad = std::numbers::pi / 180.0;
  const double dlat = (lat2 - lat1) * kRad;
  const double dlon = (lon2 - lon1) * kRad;
  const double a = std::pow(std::sin(dlat / 2), 2) +
                   std::cos(lat1 * kRad) * std::cos(lat2 * kRad) * std::pow(std::sin(dlon / 2), 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

std::vector<SiteNeighborhood> nearest_neighborhoods(std::span<const double> lon,
                                                    std::span<const double> lat,
                                                    std::size_t neighbors) {
  const std::size_t n = lon.size();
  std::vector<SiteNeighborhood> out(n);
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < n; ++i) {
    dist.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) dist.emplace_back(geodesic_km(lon[i], lat[i], lon[j], lat[j]), j);
    const std::size_t take = std::min(neighbors, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
    out[i].center = i;
    out[i].members.push_back(i);
    for (std::size_t k = 0; k < take; ++k) out[i].members.push_back(dist[k].second);
  }
  return out;
}

MarginalModel::MarginalModel(double threshold, GpdParams gpd, std::vector<double> sample)
    : threshold_(threshold), gpd_(gpd) {
  validate(gpd_);
  std::erase_if(sample, [](double x) { return std::isnan(x); });
  if (sample.empty()) throw Error(ErrorKind::InsufficientData, "marginal model needs a sample");
  std::sort(sample.begin(), sample.end());
  sorted_ = std::move(sample);
  const auto above = static_cast<double>(
      sorted_.end() - std::upper_bound(sorted_.begin(), sorted_.end(), threshold_));
  zeta_ = above / static_cast<double>(sorted_.size());
  if (!(zeta_ > 0.0))
    throw Error(ErrorKind::InsufficientData, "no observation above the marginal threshold");
}

MarginalModel::MarginalModel(double threshold, double zeta, GpdParams gpd,
                             std::vector<double> sample)
    : threshold_(threshold), zeta_(zeta), gpd_(gpd) {
  validate(gpd_);
  if (!(zeta > 0.0 && zeta <= 1.0)) throw Error(ErrorKind::Domain, "zeta must lie in (0, 1]");
  std::erase_if(sample, [](double x) { return std::isnan(x); });
  if (sample.empty()) throw Error(ErrorKind::InsufficientData, "marginal model needs a sample");
  std::sort(sample.begin(), sample.end());
  sorted_ = std::move(sample);
}

double MarginalModel::empirical_cdf(double z) const {
  const auto less = std::lower_bound(sorted_.begin(), sorted_.end(), z) - sorted_.begin();
  const auto le = std::upper_bound(sorted_.begin(), sorted_.end(), z) - sorted_.begin();
  const double denom = static_cast<double>(sorted_.size()) + 1.0;
  const auto ties = le - less;
  if (ties == 0) return static_cast<double>(less) / denom;
  return (static_cast<double>(less) + (static_cast<double>(ties) + 1.0) / 2.0) / denom;
}

double MarginalModel::cdf(double z) const {
  if (z >= threshold_) return 1.0 - zeta_ * gpd_sf(z - threshold_, gpd_);
  return empirical_cdf(z);
}

double MarginalModel::to_unit_pareto(double z) const {
  if (std::isnan(z)) return z;
  if (z >= threshold_) {
    const double s = std::max(gpd_sf(z - threshold_, gpd_), std::numeric_limits<double>::min());
    return 1.0 / (zeta_ * s);
  }
  return 1.0 / (1.0 - empirical_cdf(z));
}

std::vector<double> MarginalModel::to_unit_pareto(std::span<const double> series) const {
  std::vector<double> out(series.size());
  std::transform(series.begin(), series.end(), out.begin(),
                 [this](double z) { return to_unit_pareto(z); });
  return out;
}

double MarginalModel::from_unit_pareto(double y) const {
  if (!(y >= 1.0)) throw Error(ErrorKind::Domain, "unit-Pareto value must be >= 1");
  if (y * zeta_ >= 1.0) return threshold_ + gpd_isf(1.0 / (y * zeta_), gpd_);
  const double p = 1.0 - 1.0 / y;
  const double k = p * (static_cast<double>(sorted_.size()) + 1.0);  // 1-based rank
  if (k <= 1.0) return sorted_.front();
  if (k >= static_cast<double>(sorted_.size())) return sorted_.back();
  const auto lo = static_cast<std::size_t>(std::floor(k));
  const double frac = k - static_cast<double>(lo);
  return sorted_[lo - 1] + frac * (sorted_[lo] - sorted_[lo - 1]);
}

double MarginalModel::return_level(double m) const {
  if (!(m * zeta_ > 1.0))
    throw Error(ErrorKind::Domain, "return level below threshold: m * zeta_u must exceed 1");
  return threshold_ + gpd_isf(1.0 / (m * zeta_), gpd_);
}

double return_level(double m, const MarginalModel& model) { return model.return_level(m); }

std::vector<MarginalModel> fit_site_margins(const std::vector<std::vector<double>>& series,
                                            std::span<const double> lon,
                                            std::span<const double> lat,
                                            const MarginFitOptions& options,
                                            std::vector<GpdFit>* fits) {
  const auto hoods = nearest_neighborhoods(lon, lat, options.neighbors);
  std::vector<MarginalModel> models;
  models.reserve(series.size());
  if (fits) fits->clear();
  for (const auto& hood : hoods) {
    const auto& own = series[hood.center];
    const double u = empirical_quantile(own, options.threshold_quantile);
    std::vector<Exceedance> pooled;
    for (std::size_t j : hood.members)
      for (double z : series[j])
        if (z > u) pooled.push_back({z, j});
    auto fit = fit_pooled_gpd(pooled, u);
    models.emplace_back(u, fit.params, own);
    if (fits) fits->push_back(fit);
  }
  return models;
}

}  // namespace hrmix
