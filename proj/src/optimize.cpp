#include "hrmix/optimize.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <limits>
#include <numeric>

namespace hrmix::optimize {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void clamp_into(std::vector<double>& x, std::span<const double> lo,
                std::span<const double> hi) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
}

}  // namespace

SimplexResult box_simplex_minimize(
    const std::function<double(std::span<const double>)>& objective,
    std::vector<double> start, std::span<const double> lower,
    std::span<const double> upper, const BoxSimplexOptions& options) {
  const std::size_t n = start.size();
  auto eval = [&](const std::vector<double>& x) {
    const double v = objective(x);
    return std::isfinite(v) ? v : kInf;
  };

  clamp_into(start, lower, upper);
  std::vector<std::vector<double>> simplex(n + 1, start);
  for (std::size_t i = 0; i < n; ++i) {
    double step = options.initial_step * std::max(1.0, std::abs(start[i]));
    // step away from a bound we are sitting on
    if (simplex[i + 1][i] + step > upper[i]) step = -step;
    simplex[i + 1][i] += step;
    clamp_into(simplex[i + 1], lower, upper);
  }
  std::vector<double> values(n + 1);
  for (std::size_t i = 0; i <= n; ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  SimplexResult result;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[n - 1];

    double size = 0.0;
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t d = 0; d < n; ++d)
        size = std::max(size, std::abs(simplex[i][d] - simplex[best][d]));
    const double spread = values[worst] - values[best];
    if (std::isfinite(values[worst]) && spread <= options.f_tolerance &&
        size <= options.x_tolerance * std::max(1.0, size)) {
      result.converged = true;
      break;
    }
    if (size <= 1e-14) {
      result.converged = std::isfinite(values[best]);
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t d = 0; d < n; ++d) centroid[d] += simplex[i][d] / static_cast<double>(n);
    }
    auto along = [&](double t) {
      std::vector<double> p(n);
      for (std::size_t d = 0; d < n; ++d) p[d] = centroid[d] + t * (simplex[worst][d] - centroid[d]);
      clamp_into(p, lower, upper);
      return p;
    };

    auto reflected = along(-1.0);
    const double fr = eval(reflected);
    if (fr < values[best]) {
      auto expanded = along(-2.0);
      const double fe = eval(expanded);
      if (fe < fr) {
        simplex[worst] = std::move(expanded);
        values[worst] = fe;
      } else {
        simplex[worst] = std::move(reflected);
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = std::move(reflected);
      values[worst] = fr;
      continue;
    }
    auto contracted = fr < values[worst] ? along(-0.5) : along(0.5);
    const double fc = eval(contracted);
    if (fc < std::min(fr, values[worst])) {
      simplex[worst] = std::move(contracted);
      values[worst] = fc;
      continue;
    }
    // shrink toward the best vertex
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t d = 0; d < n; ++d)
        simplex[i][d] = simplex[best][d] + 0.5 * (simplex[i][d] - simplex[best][d]);
      values[i] = eval(simplex[i]);
    }
  }

  const auto best_it = std::min_element(values.begin(), values.end());
  const auto best = static_cast<std::size_t>(best_it - values.begin());
  result.x = simplex[best];
  result.value = values[best];
  result.iterations = it;
  return result;
}

ScalarResult grid_brent_minimize(const std::function<double(double)>& objective,
                                 double lo, double hi, int grid_points, int brent_bits,
                                 bool prefer_upper) {
  grid_points = std::max(grid_points, 3);
  const double step = (hi - lo) / (grid_points - 1);
  int best = 0;
  double best_value = kInf;
  for (int k = 0; k < grid_points; ++k) {
    const double x = k == grid_points - 1 ? hi : lo + k * step;
    double v = objective(x);
    if (!std::isfinite(v)) v = kInf;
    if (v < best_value || (prefer_upper && v == best_value)) {
      best_value = v;
      best = k;
    }
  }
  const double x_grid = best == grid_points - 1 ? hi : lo + best * step;
  const double a = std::max(lo, x_grid - step);
  const double b = std::min(hi, x_grid + step);
  auto wrapped = [&](double x) {
    const double v = objective(x);
    return std::isfinite(v) ? v : kInf;
  };
  const auto [x_ref, v_ref] = boost::math::tools::brent_find_minima(wrapped, a, b, brent_bits);
  if (v_ref < best_value) return {x_ref, v_ref};
  return {x_grid, best_value};
}

}  // namespace hrmix::optimize
