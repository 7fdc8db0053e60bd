#pragma once

// Exact simulation from tree HR Pareto models and synthetic panel generation.

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "hrmix/gpd_margins.hpp"
#include "hrmix/graphs.hpp"

namespace hrmix {

struct TreeMixtureModel;
struct GriddedDataset;

struct RootedSample {
  int root = 0;
  std::vector<double> values;
};

/// Precomputed outward traversals of a tree, one per root.
class RootedTreeSampler {
 public:
  RootedTreeSampler(const SpanningTree& tree, const EdgeValues& gammas);

  std::size_t node_count() const noexcept { return n_; }
  /// X_root ~ unit Pareto; log X_child = log X_parent + N(-G/2, G) along edges.
  void sample(std::size_t root, std::mt19937_64& rng, std::vector<double>& x) const;

 private:
  struct Step {
    int parent;
    int child;
    double mean;
    double sd;
  };
  std::size_t n_ = 0;
  std::vector<std::vector<Step>> orders_;
};

RootedSample sample_tree_hr_rooted(const SpanningTree& tree, const EdgeValues& gammas, int root,
                                   std::uint64_t seed);

struct MpdSamples {
  Eigen::MatrixXd values;  // samples x nodes
  std::size_t proposals = 0;
  double acceptance_rate() const {
    return proposals ? static_cast<double>(values.rows()) / static_cast<double>(proposals) : 0.0;
  }
};

/// Rejection sampler from the tree MPD on {max x > 1}: uniform root proposal,
/// accepted with probability 1 / #{j : x_j > 1}.
/// Throws SamplerDegeneracy when acceptance drops below 1e-3.
MpdSamples sample_mpd_tree(const SpanningTree& tree, const EdgeValues& gammas, std::size_t n,
                           std::uint64_t seed);
MpdSamples sample_mpd_tree(const SpanningTree& tree, const EdgeValues& gammas, std::size_t n,
                           std::mt19937_64& rng);

struct MixtureSamples {
  Eigen::MatrixXd values;
  std::vector<int> tree_index;  // ensemble index per sample
};

/// Tree drawn by prior, then one MPD sample with gammas scaled by a_opt.
MixtureSamples sample_mixture(const TreeMixtureModel& model, std::size_t n, std::uint64_t seed);

struct GridSpec {
  std::size_t nx = 5;
  std::size_t ny = 5;
  double lon0 = 140.0;
  double lat0 = -38.0;
  double step = 0.5;
};

/// Uniform bulk on [0, threshold) below the threshold probability, GP above.
/// `trend` shifts every value by trend * season index.
struct MarginalSpec {
  double threshold = 20.0;
  double threshold_prob = 0.95;
  GpdParams gpd{2.0, 0.1};
  double trend = 0.0;
};

/// Either independence or a single tree HR model on the grid's node order.
struct DependenceSpec {
  bool independent = false;
  SpanningTree tree;
  EdgeValues gammas;
};

/// Sites on an nx x ny grid (row-major from (lon0, lat0)), consecutive Nov-Feb
/// days starting on 1 Nov of first_season.
GriddedDataset generate_synthetic_dataset(const GridSpec& grid, const MarginalSpec& margins,
                                          const DependenceSpec& dependence, std::size_t T,
                                          std::uint64_t seed, int first_season = 1999);

/// Random spanning tree of the 4-neighbour grid with a constant edge gamma.
DependenceSpec random_tree_dependence(const GridSpec& grid, double gamma, std::uint64_t seed);

std::vector<Site> grid_sites(const GridSpec& grid);

}  // namespace hrmix
