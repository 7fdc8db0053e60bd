#pragma once

#include <functional>
#include <span>
#include <vector>

namespace hrmix::optimize {

struct BoxSimplexOptions {
  int max_iterations = 2000;
  double f_tolerance = 1e-11;  // spread of function values across the simplex
  double x_tolerance = 1e-9;   // largest vertex distance from the best vertex
  double initial_step = 0.1;
};

struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Nelder-Mead minimization with every vertex clamped into [lower, upper].
/// Non-finite objective values are treated as +inf.
SimplexResult box_simplex_minimize(
    const std::function<double(std::span<const double>)>& objective,
    std::vector<double> start, std::span<const double> lower,
    std::span<const double> upper, const BoxSimplexOptions& options = {});

struct ScalarResult {
  double x = 0.0;
  double value = 0.0;
};

/// Grid scan over [lo, hi] followed by Brent refinement between the grid
/// neighbours of the best point. Ties on the grid go to the larger x when
/// prefer_upper is set.
ScalarResult grid_brent_minimize(const std::function<double(double)>& objective,
                                 double lo, double hi, int grid_points,
                                 int brent_bits = 40, bool prefer_upper = false);

}  // namespace hrmix::optimize
