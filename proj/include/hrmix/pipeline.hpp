#pragma once

// Seasons, windows, clustering, per-cluster fits and risk aggregation.

#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "hrmix/config.hpp"
#include "hrmix/dataset.hpp"
#include "hrmix/dependence_fit.hpp"
#include "hrmix/gpd_margins.hpp"
#include "hrmix/mixture.hpp"

namespace hrmix {

struct SeasonIndex {
  std::vector<int> seasons;          // sorted, unique
  std::vector<std::size_t> times;    // retained dataset time indices
  std::vector<int> time_season;      // season per retained time
};

/// Keeps Nov-Feb dates. With drop_partial, seasons lacking either their
/// Nov-Dec or their Jan-Feb part are removed.
SeasonIndex summer_seasons(const GriddedDataset& data, bool drop_partial = false);

/// Nov-Feb day count of `count` consecutive seasons from `first`.
std::size_t summer_days(int first, std::size_t count);

struct Window {
  std::size_t index = 0;
  int first_season = 0;
  int last_season = 0;
  /// "first-(last+1)", the calendar years the window touches.
  std::string label() const;
};

/// Sliding windows over consecutive seasons. Throws InsufficientData when
/// there are fewer than `width` seasons.
std::vector<Window> decadal_windows(const std::vector<int>& seasons, std::size_t width = 10,
                                    std::size_t step = 1);

std::vector<std::size_t> window_times(const SeasonIndex& index, const Window& window);

struct ClusterAssignment {
  std::vector<int> labels;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  double wcss = 0.0;
  std::vector<std::array<double, 2>> centroids;

  std::vector<std::vector<std::size_t>> members() const;
};

/// Lloyd's algorithm with k-means++ seeding on (lon, lat).
ClusterAssignment kmeans_clusters(const std::vector<Site>& sites, std::size_t k, std::uint64_t seed);

struct TrendResult {
  double slope = 0.0;
  double intercept = 0.0;
  double p_value = 1.0;
  bool p_defined = true;  // false for a constant series
  std::size_t seasons = 0;
};

/// OLS of y on x with a two-sided t-test on the slope.
TrendResult linear_trend(std::span<const double> x, std::span<const double> y);

/// Per-season q-quantile regressed on the season number (0, 1, ...).
/// Throws InsufficientData with fewer than 3 usable seasons.
TrendResult quantile_trend(const std::vector<std::vector<double>>& by_season, double q = 0.98);

struct ClusterWindowFit {
  int cluster = 0;
  Window window;
  std::vector<std::size_t> sites;  // dataset indices
  std::vector<Site> site_info;
  std::vector<MarginalModel> margins;
  std::vector<GpdFit> gpd_fits;
  Panel pareto;  // unit-Pareto panel of the window
  bool marginal_only = false;
  TreeMixtureModel model;
  std::vector<EdgeGammaFit> gamma_fits;
  DsgaResult dsga;
  BiasFit bias;
  std::size_t exceedance_times = 0;
  std::uint64_t seed = 0;
};

/// Margins, unit-Pareto transform, edge gammas, tree ensemble, DSGA weights,
/// priors and the bias scale for one cluster and window.
ClusterWindowFit fit_cluster_window(const GriddedDataset& data, const std::vector<std::size_t>& sites,
                                    const std::vector<std::size_t>& times, int cluster,
                                    const Window& window, const PipelineConfig& config,
                                    std::uint64_t seed);

struct RiskSummary {
  int cluster = 0;
  std::size_t window = 0;
  double risk = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

/// Mixture samples X mapped through u*X and each site's inverse transform,
/// averaged over sites and samples. `model` null means a single-site cluster.
RiskSummary risk_aggregate(const TreeMixtureModel* model, const std::vector<MarginalModel>& margins,
                           double u, std::size_t n, std::uint64_t seed);
RiskSummary risk_aggregate(const ClusterWindowFit& fit, double u, std::size_t n, std::uint64_t seed);

/// splitmix64 mixing of a base seed with stream identifiers.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> stream);

struct PipelineResult {
  PipelineConfig config;
  ClusterAssignment clusters;
  SeasonIndex seasons;
  std::vector<Window> windows;
  std::vector<ClusterWindowFit> fits;  // cluster-major, then window
  std::vector<RiskSummary> risks;
  std::vector<std::optional<TrendResult>> trends;  // per site
};

struct PipelineStages {
  bool risk = true;
  bool trends = true;
};

/// Runs every cluster/window fit on a pool of `threads` workers. Output
/// order and content depend only on the data and config.
PipelineResult run_pipeline(const GriddedDataset& data, const PipelineConfig& config,
                            std::size_t threads = 1, PipelineStages stages = {});

}  // namespace hrmix
