#pragma once

// Flat `key = value` run configuration.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

#include "hrmix/dependence_fit.hpp"
#include "hrmix/graphs.hpp"

namespace hrmix {

struct PipelineConfig {
  // margins
  double threshold_quantile = 0.95;
  std::size_t neighbors = 4;
  // dependence
  double dependence_u = 20.0;
  bool diagonals = true;
  std::size_t ensemble_size = 200;
  OrientationRates rates;
  DsgaConfig dsga;
  double chi_quantile = 0.95;
  int chi_max_hops = 3;
  // orchestration
  std::size_t clusters = 25;
  std::size_t window_width = 10;
  std::size_t window_step = 1;
  std::size_t max_windows = 0;  // 0 keeps every window
  bool drop_partial_seasons = false;
  bool thin = false;
  double trend_quantile = 0.98;
  std::size_t risk_samples = 10000;
  std::size_t chi_curve_points = 25;
  std::uint64_t seed = 20240101;

  /// Throws Config when a value is out of range.
  void validate() const;
};

/// Parses `key = value` lines; `#` starts a comment. Unknown keys and bad
/// values raise Config errors with the line number.
PipelineConfig parse_config(std::istream& in, PipelineConfig base = {});
PipelineConfig load_config(const std::string& path, PipelineConfig base = {});

/// Canonical text form: every key, fixed order, shortest round-trip numbers.
std::string to_text(const PipelineConfig& config);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace hrmix
