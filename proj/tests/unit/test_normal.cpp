#include <doctest.h>

#include <boost/math/distributions/normal.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>

#include "hrmix/normal.hpp"

using boost::multiprecision::cpp_bin_float_50;
namespace hn = hrmix::normal;

namespace {

// 50-digit reference values
double ref_cdf(double x) {
  boost::math::normal_distribution<cpp_bin_float_50> d;
  return static_cast<double>(boost::math::cdf(d, cpp_bin_float_50(x)));
}
double ref_sf(double x) {
  boost::math::normal_distribution<cpp_bin_float_50> d;
  return static_cast<double>(boost::math::cdf(boost::math::complement(d, cpp_bin_float_50(x))));
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("cdf and sf against a 50-digit oracle") {
  for (double x = -30.0; x <= 8.0; x += 0.37) {
    CHECK(rel(hn::cdf(x), ref_cdf(x)) < 1e-14);
    CHECK(rel(hn::sf(-x), ref_cdf(x)) < 1e-14);
  }
  for (double x = -8.0; x <= 30.0; x += 0.41) CHECK(rel(hn::sf(x), ref_sf(x)) < 1e-14);
}

TEST_CASE("known values") {
  CHECK(hn::cdf(0.0) == 0.5);
  CHECK(2.0 * hn::cdf(1.0) == doctest::Approx(1.6826894921370859).epsilon(1e-15));
  CHECK(2.0 * hn::sf(1.0) == doctest::Approx(0.31731050786291410).epsilon(1e-15));
}

TEST_CASE("log_cdf stays finite in the far lower tail") {
  for (double x = -35.0; x < 5.0; x += 0.5) {
    const double r = std::log(ref_cdf(x));
    CHECK(std::abs(hn::log_cdf(x) - r) < 1e-12 * std::max(1.0, std::abs(r)));
  }
  CHECK(std::isfinite(hn::log_cdf(-60.0)));
  CHECK(hn::log_cdf(-60.0) == doctest::Approx(-1805.0135606805671).epsilon(1e-14));
}

TEST_CASE("quantile inverts cdf") {
  for (double p : {1e-300, 1e-20, 1e-6, 0.01, 0.2, 0.5, 0.77, 0.999, 1.0 - 1e-12}) {
    const double x = hn::quantile(p);
    CHECK(rel(hn::cdf(x), p) < 1e-12);
  }
  for (double q : {1e-200, 1e-9, 0.3, 0.9}) CHECK(rel(hn::sf(hn::isf(q)), q) < 1e-12);
  CHECK(std::isinf(hn::quantile(0.0)));
  CHECK(std::isinf(hn::quantile(1.0)));
}
