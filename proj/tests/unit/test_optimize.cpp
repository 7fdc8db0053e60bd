#include <doctest.h>

#include <cmath>
#include <vector>

#include "hrmix/optimize.hpp"

using namespace hrmix::optimize;

TEST_CASE("box simplex finds an interior quadratic minimum") {
  auto f = [](std::span<const double> x) {
    return (x[0] - 0.3) * (x[0] - 0.3) + 4.0 * (x[1] + 0.7) * (x[1] + 0.7);
  };
  const std::vector<double> lo{-2, -2}, hi{2, 2};
  const auto r = box_simplex_minimize(f, {1.0, 1.0}, lo, hi);
  CHECK(r.converged);
  CHECK(r.x[0] == doctest::Approx(0.3).epsilon(1e-4));
  CHECK(r.x[1] == doctest::Approx(-0.7).epsilon(1e-4));
}

TEST_CASE("box simplex respects the box") {
  auto f = [](std::span<const double> x) { return x[0] + x[1]; };
  const std::vector<double> lo{-1, 0.5}, hi{1, 2};
  const auto r = box_simplex_minimize(f, {0.0, 1.0}, lo, hi);
  CHECK(r.x[0] == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(r.x[1] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("non-finite objective values are avoided") {
  auto f = [](std::span<const double> x) { return x[0] < 0 ? NAN : (x[0] - 1) * (x[0] - 1); };
  const std::vector<double> lo{-5}, hi{5};
  const auto r = box_simplex_minimize(f, {0.5}, lo, hi);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("grid plus Brent") {
  const auto r = grid_brent_minimize([](double x) { return std::cos(x); }, 0.0, 6.0, 25);
  CHECK(r.x == doctest::Approx(M_PI).epsilon(1e-7));
  CHECK(r.value == doctest::Approx(-1.0));

  // flat objective: prefer_upper picks the right end
  const auto flat = grid_brent_minimize([](double) { return 0.0; }, 0.0, 1.0, 11, 40, true);
  CHECK(flat.x == doctest::Approx(1.0));
  const auto edge = grid_brent_minimize([](double x) { return x; }, 2.0, 3.0, 11);
  CHECK(edge.x == doctest::Approx(2.0));
}
