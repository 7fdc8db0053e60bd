#include "hrmix/pipeline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include "hrmix/error.hpp"
#include "hrmix/simulate.hpp"

namespace hrmix {
namespace {

constexpr int kKmeansAttempts = 5;
constexpr int kLloydIterations = 300;

double sq_dist(const Site& s, const std::array<double, 2>& c) {
  const double dx = s.lon - c[0];
  const double dy = s.lat - c[1];
  return dx * dx + dy * dy;
}

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

std::optional<ClusterAssignment> kmeans_attempt(const std::vector<Site>& sites, std::size_t k,
                                                std::uint64_t seed) {
  const std::size_t n = sites.size();
  std::mt19937_64 rng(seed);
  std::vector<std::array<double, 2>> centres;
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  const auto& s0 = sites[first(rng)];
  centres.push_back({s0.lon, s0.lat});
  std::vector<double> d2(n);
  while (centres.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centres) best = std::min(best, sq_dist(sites[i], c));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> unif(0.0, total);
      double r = unif(rng);
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        if (r < d2[i]) {
          pick = i;
          break;
        }
        r -= d2[i];
      }
      while (d2[pick] <= 0.0) --pick;
    } else {
      pick = first(rng);
    }
    centres.push_back({sites[pick].lon, sites[pick].lat});
  }

  std::vector<int> labels(n, -1);
  for (int iter = 0; iter < kLloydIterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(sites[i], centres[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = sq_dist(sites[i], centres[c]);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    std::vector<std::array<double, 2>> sum(k, {0.0, 0.0});
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(labels[i]);
      sum[c][0] += sites[i].lon;
      sum[c][1] += sites[i].lat;
      ++count[c];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] == 0) return std::nullopt;
      centres[c] = {sum[c][0] / static_cast<double>(count[c]), sum[c][1] / static_cast<double>(count[c])};
    }
    if (!changed) break;
  }
  ClusterAssignment out;
  out.labels = std::move(labels);
  out.k = k;
  out.seed = seed;
  out.centroids = centres;
  for (std::size_t i = 0; i < n; ++i) out.wcss += sq_dist(sites[i], centres[static_cast<std::size_t>(out.labels[i])]);
  return out;
}

}  // namespace

SeasonIndex summer_seasons(const GriddedDataset& data, bool drop_partial) {
  std::map<int, std::pair<bool, bool>> parts;  // season -> (Nov-Dec seen, Jan-Feb seen)
  for (const auto& d : data.dates) {
    if (!in_summer(d)) continue;
    auto& p = parts[season_of(d)];
    (d.month >= 11 ? p.first : p.second) = true;
  }
  SeasonIndex idx;
  for (const auto& [season, p] : parts)
    if (!drop_partial || (p.first && p.second)) idx.seasons.push_back(season);
  for (std::size_t t = 0; t < data.dates.size(); ++t) {
    const auto& d = data.dates[t];
    if (!in_summer(d)) continue;
    const int s = season_of(d);
    if (!std::binary_search(idx.seasons.begin(), idx.seasons.end(), s)) continue;
    idx.times.push_back(t);
    idx.time_season.push_back(s);
  }
  return idx;
}

std::size_t summer_days(int first, std::size_t count) {
  std::size_t days = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const int s = first + static_cast<int>(k);
    days += 30 + 31 + 31 + (is_leap(s + 1) ? 29 : 28);
  }
  return days;
}

std::string Window::label() const { return fmt::format("{}-{}", first_season, last_season + 1); }

std::vector<Window> decadal_windows(const std::vector<int>& seasons, std::size_t width, std::size_t step) {
  if (width == 0 || step == 0) throw Error(ErrorKind::Config, "window width and step must be positive");
  if (seasons.size() < width)
    throw Error(ErrorKind::InsufficientData,
                fmt::format("{} seasons available, a window needs {}", seasons.size(), width));
  std::vector<Window> out;
  for (std::size_t start = 0; start + width <= seasons.size(); start += step)
    out.push_back({out.size(), seasons[start], seasons[start + width - 1]});
  return out;
}

std::vector<std::size_t> window_times(const SeasonIndex& index, const Window& window) {
  std::vector<std::size_t> times;
  for (std::size_t r = 0; r < index.times.size(); ++r)
    if (index.time_season[r] >= window.first_season && index.time_season[r] <= window.last_season)
      times.push_back(index.times[r]);
  return times;
}

std::vector<std::vector<std::size_t>> ClusterAssignment::members() const {
  std::vector<std::vector<std::size_t>> out(k);
  for (std::size_t i = 0; i < labels.size(); ++i) out[static_cast<std::size_t>(labels[i])].push_back(i);
  return out;
}

ClusterAssignment kmeans_clusters(const std::vector<Site>& sites, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw Error(ErrorKind::Validation, "cluster count must be at least 1");
  if (k > sites.size())
    throw Error(ErrorKind::Validation,
                fmt::format("cluster count {} exceeds the {} available sites", k, sites.size()));
  for (int attempt = 0; attempt < kKmeansAttempts; ++attempt) {
    const std::uint64_t s = attempt == 0 ? seed : derive_seed(seed, {static_cast<std::uint64_t>(attempt)});
    if (auto result = kmeans_attempt(sites, k, s)) {
      result->seed = seed;
      return *result;
    }
  }
  throw Error(ErrorKind::Optimization, "k-means left a cluster empty after re-seeding");
}

TrendResult linear_trend(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size()) throw Error(ErrorKind::Domain, "x and y lengths differ");
  if (n < 3) throw Error(ErrorKind::InsufficientData, "trend regression needs at least 3 points");
  double xbar = 0.0, ybar = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    xbar += x[i];
    ybar += y[i];
  }
  xbar /= static_cast<double>(n);
  ybar /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - xbar) * (x[i] - xbar);
    sxy += (x[i] - xbar) * (y[i] - ybar);
    syy += (y[i] - ybar) * (y[i] - ybar);
  }
  if (!(sxx > 0.0)) throw Error(ErrorKind::Domain, "covariate has no spread");
  TrendResult r;
  r.seasons = n;
  if (syy == 0.0) {
    r.slope = 0.0;
    r.intercept = ybar;
    r.p_value = std::numeric_limits<double>::quiet_NaN();
    r.p_defined = false;
    return r;
  }
  r.slope = sxy / sxx;
  r.intercept = ybar - r.slope * xbar;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - r.intercept - r.slope * x[i];
    sse += e * e;
  }
  const double df = static_cast<double>(n - 2);
  const double se = std::sqrt(sse / df / sxx);
  // relative cut keeps rounding noise of an exact line from passing as variance
  if (se <= 1e-12 * std::abs(r.slope)) {
    r.p_value = 0.0;
    return r;
  }
  const double t = std::abs(r.slope / se);
  const boost::math::students_t dist(df);
  r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, t)));
  return r;
}

TrendResult quantile_trend(const std::vector<std::vector<double>>& by_season, double q) {
  std::vector<double> x, y;
  for (std::size_t s = 0; s < by_season.size(); ++s) {
    const bool any = std::any_of(by_season[s].begin(), by_season[s].end(),
                                 [](double v) { return !std::isnan(v); });
    if (!any) continue;
    x.push_back(static_cast<double>(s));
    y.push_back(empirical_quantile(by_season[s], q));
  }
  if (x.size() < 3)
    throw Error(ErrorKind::InsufficientData,
                fmt::format("quantile trend needs 3 seasons with data, found {}", x.size()));
  return linear_trend(x, y);
}

ClusterWindowFit fit_cluster_window(const GriddedDataset& data, const std::vector<std::size_t>& sites,
                                    const std::vector<std::size_t>& times, int cluster,
                                    const Window& window, const PipelineConfig& config,
                                    std::uint64_t seed) {
  if (sites.empty() || times.empty())
    throw Error(ErrorKind::InsufficientData, "cluster/window panel is empty");
  ClusterWindowFit fit;
  fit.cluster = cluster;
  fit.window = window;
  fit.sites = sites;
  fit.seed = seed;

  std::vector<std::vector<double>> series;
  std::vector<double> lon, lat;
  for (std::size_t i : sites) {
    fit.site_info.push_back(data.sites.at(i));
    lon.push_back(data.sites[i].lon);
    lat.push_back(data.sites[i].lat);
    std::vector<double> row;
    row.reserve(times.size());
    for (std::size_t t : times) row.push_back(data.values[i].at(t));
    series.push_back(std::move(row));
  }

  fit.margins = fit_site_margins(series, lon, lat, {config.threshold_quantile, config.neighbors},
                                 &fit.gpd_fits);
  for (std::size_t k = 0; k < sites.size(); ++k) fit.pareto.push_back(fit.margins[k].to_unit_pareto(series[k]));
  if (sites.size() == 1) {
    fit.marginal_only = true;
    return fit;
  }

  const double u = config.dependence_u;
  auto& model = fit.model;
  model.graph = build_lattice(fit.site_info, config.diagonals);
  model.gammas = fit_edge_gammas(fit.pareto, model.graph, u, &fit.gamma_fits);
  model.ensemble = sample_tree_ensemble(model.graph, config.rates, config.ensemble_size, derive_seed(seed, {1}));
  const auto likelihoods = build_likelihood_matrices(fit.pareto, model.graph, model.gammas, u);
  fit.exceedance_times = likelihoods.size();
  fit.dsga = dsga_fit_beta(likelihoods, config.dsga, derive_seed(seed, {2}));
  model.beta = fit.dsga.beta;
  model.prior = tree_prior_probs(model.ensemble, model.beta);

  std::vector<ChiTarget> targets;
  for (auto [i, j] : bias_pairs(model.graph, config.chi_max_hops))
    if (auto chi = empirical_chi(fit.pareto[static_cast<std::size_t>(i)],
                                 fit.pareto[static_cast<std::size_t>(j)], config.chi_quantile))
      targets.push_back({i, j, *chi});
  if (!targets.empty()) {
    fit.bias = fit_bias_scale(model, targets);
    model.a_opt = fit.bias.a;
  }
  model.validate();
  return fit;
}

RiskSummary risk_aggregate(const TreeMixtureModel* model, const std::vector<MarginalModel>& margins,
                           double u, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::Domain, "risk needs at least one sample");
  if (margins.empty()) throw Error(ErrorKind::Domain, "risk needs marginal models");
  if (!(u >= 1.0)) throw Error(ErrorKind::Domain, "dependence threshold must be >= 1");
  Eigen::MatrixXd x;
  if (model) {
    x = sample_mixture(*model, n, seed).values;
    if (static_cast<std::size_t>(x.cols()) != margins.size())
      throw Error(ErrorKind::Domain, "model and margins disagree on the site count");
  } else {
    if (margins.size() != 1) throw Error(ErrorKind::Domain, "a model is required for more than one site");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    x.resize(static_cast<Eigen::Index>(n), 1);
    for (Eigen::Index s = 0; s < x.rows(); ++s) x(s, 0) = 1.0 / (1.0 - unif(rng));
  }
  double sum = 0.0, sum_sq = 0.0;
  for (Eigen::Index s = 0; s < x.rows(); ++s) {
    double row = 0.0;
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
      const double y = std::max(1.0, u * x(s, i));
      row += margins[static_cast<std::size_t>(i)].from_unit_pareto(y);
    }
    row /= static_cast<double>(x.cols());
    sum += row;
    sum_sq += row * row;
  }
  const double nd = static_cast<double>(n);
  RiskSummary r;
  r.risk = sum / nd;
  const double var = n > 1 ? std::max(0.0, (sum_sq - nd * r.risk * r.risk) / (nd - 1.0)) : 0.0;
  r.std_error = std::sqrt(var / nd);
  r.samples = n;
  r.seed = seed;
  return r;
}

RiskSummary risk_aggregate(const ClusterWindowFit& fit, double u, std::size_t n, std::uint64_t seed) {
  RiskSummary r = risk_aggregate(fit.marginal_only ? nullptr : &fit.model, fit.margins, u, n, seed);
  r.cluster = fit.cluster;
  r.window = fit.window.index;
  return r;
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> stream) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  for (std::uint64_t s : stream) h = mix(h ^ mix(s));
  return h;
}

PipelineResult run_pipeline(const GriddedDataset& data, const PipelineConfig& config,
                            std::size_t threads, PipelineStages stages) {
  config.validate();
  data.validate();
  PipelineResult result;
  result.config = config;
  result.seasons = summer_seasons(data, config.drop_partial_seasons);
  result.windows = decadal_windows(result.seasons.seasons, config.window_width, config.window_step);
  if (config.max_windows > 0 && result.windows.size() > config.max_windows)
    result.windows.resize(config.max_windows);
  result.clusters = kmeans_clusters(data.sites, config.clusters, derive_seed(config.seed, {0}));
  const auto members = result.clusters.members();

  struct Job {
    int cluster;
    std::size_t window;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < members.size(); ++c)
    for (std::size_t w = 0; w < result.windows.size(); ++w) jobs.push_back({static_cast<int>(c), w});
  result.fits.resize(jobs.size());
  if (stages.risk) result.risks.resize(jobs.size());

  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const auto& job = jobs[j];
      const auto& window = result.windows[job.window];
      const std::uint64_t seed =
          derive_seed(config.seed, {1, static_cast<std::uint64_t>(job.cluster), window.index});
      try {
        const auto times = window_times(result.seasons, window);
        result.fits[j] = fit_cluster_window(data, members[static_cast<std::size_t>(job.cluster)], times,
                                            job.cluster, window, config, seed);
        if (stages.risk)
          result.risks[j] = risk_aggregate(result.fits[j], config.dependence_u, config.risk_samples,
                                           derive_seed(seed, {3}));
      } catch (const Error& e) {
        errors[j] = std::make_exception_ptr(Error(
            e.kind(), fmt::format("cluster {} window {}: {}", job.cluster, window.label(), e.what())));
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const std::size_t pool = std::max<std::size_t>(1, std::min(threads, jobs.size()));
  if (pool == 1) {
    worker();
  } else {
    std::vector<std::thread> workers;
    for (std::size_t k = 0; k < pool; ++k) workers.emplace_back(worker);
    for (auto& t : workers) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  if (stages.trends) {
    result.trends.resize(data.site_count());
    const auto& seasons = result.seasons.seasons;
    for (std::size_t i = 0; i < data.site_count(); ++i) {
      std::vector<std::vector<double>> by_season(seasons.size());
      for (std::size_t r = 0; r < result.seasons.times.size(); ++r) {
        const auto pos = std::lower_bound(seasons.begin(), seasons.end(), result.seasons.time_season[r]) -
                         seasons.begin();
        by_season[static_cast<std::size_t>(pos)].push_back(data.values[i][result.seasons.times[r]]);
      }
      try {
        result.trends[i] = quantile_trend(by_season, config.trend_quantile);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::InsufficientData) throw;
      }
    }
  }
  return result;
}

}  // namespace hrmix
