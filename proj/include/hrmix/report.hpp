#pragma once

// CSV tables, SVG heatmaps and the run manifest.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hrmix/pipeline.hpp"

namespace hrmix {

/// Gaussian-kernel regression of y on x evaluated at `grid`. Grid points with
/// no kernel mass return NaN.
std::vector<double> nadaraya_watson(std::span<const double> x, std::span<const double> y,
                                    std::span<const double> grid, double bandwidth);

struct ChiDistanceRow {
  int cluster = 0;
  std::size_t window = 0;
  std::string site_i, site_j;
  double distance_km = 0.0;
  double chi_empirical = 0.0;  // NaN when undefined
  double chi_model = 0.0;
};

/// Every site pair of a fitted cluster/window with empirical and model chi.
std::vector<ChiDistanceRow> chi_distance_rows(const ClusterWindowFit& fit, double q);

/// Heatmap of a matrix with row/column labels. NaN cells are drawn grey.
std::string svg_heatmap(const std::string& title, const Eigen::MatrixXd& values,
                        const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels);

/// Sites drawn as squares at their lon/lat, coloured by value.
std::string svg_site_map(const std::string& title, const std::vector<Site>& sites,
                         const std::vector<double>& values);

/// Collects output files in memory order and records their hashes; the
/// single place that touches the output directory.
class OutputWriter {
 public:
  explicit OutputWriter(std::string out_dir);
  void write(const std::string& name, const std::string& content);
  const std::vector<std::pair<std::string, std::uint64_t>>& files() const noexcept { return files_; }
  const std::string& dir() const noexcept { return dir_; }

 private:
  std::string dir_;
  std::vector<std::pair<std::string, std::uint64_t>> files_;
};

struct RunInfo {
  std::string command;
  std::string input_name;
  std::uint64_t input_hash = 0;
  std::uint64_t seed = 0;
  std::string config_text;
};

struct OutputSelection {
  bool margins = true;
  bool bundles = true;
  bool chi = true;
  bool risk = true;
  bool trends = true;
};

/// Writes the selected tables and figures for a pipeline run.
void emit_outputs(const PipelineResult& result, const GriddedDataset& data, const OutputSelection& select,
                  OutputWriter& writer);

/// manifest.json listing the run info and every file written so far.
void write_manifest(OutputWriter& writer, const RunInfo& info,
                    const std::vector<std::pair<std::string, std::string>>& extra = {});

}  // namespace hrmix
