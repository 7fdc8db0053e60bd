#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "hrmix/error.hpp"
#include "hrmix/graphs.hpp"
#include "hrmix/hr_core.hpp"

using namespace hrmix;
using boost::math::quadrature::gauss_kronrod;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// squared distances between points in general position are a strictly
// conditionally negative definite variogram
Eigen::MatrixXd random_variogram(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 0.8);
  Eigen::MatrixXd p(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) p(i, j) = z(rng);
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = (p.row(i) - p.row(j)).squaredNorm();
  return g;
}

Eigen::MatrixXd pair_gamma(double g) {
  Eigen::MatrixXd m(2, 2);
  m << 0, g, g, 0;
  return m;
}

double lambda2(double x1, double x2, double g) {
  const double x[2] = {x1, x2};
  return hr_intensity(x, pair_gamma(g), 0);
}

// integral over y2 in (lo, inf) on the log scale
double inner(double y1, double lo, double g) {
  auto f = [&](double t) {
    const double y2 = std::exp(t);
    return y2 > 0.0 && std::isfinite(y2) ? lambda2(y1, y2, g) * y2 : 0.0;
  };
  return gauss_kronrod<double, 61>::integrate(f, lo > 0 ? std::log(lo) : -kInf, kInf, 15, 1e-12);
}

// Lambda{y : y1 > x1 or y2 > x2} by nested quadrature of the intensity
double V_quadrature(double x1, double x2, double g) {
  auto a = [&](double y1) { return std::isfinite(y1) ? inner(y1, 0.0, g) : 0.0; };
  auto b = [&](double y1) { return y1 > 0.0 ? inner(y1, x2, g) : 0.0; };
  const double upper = gauss_kronrod<double, 61>::integrate(a, x1, kInf, 15, 1e-11);
  const double lower = gauss_kronrod<double, 61>::integrate(b, 0.0, x1, 15, 1e-11);
  return upper + lower;
}

}  // namespace

TEST_CASE("sigma_k examples") {
  CHECK(sigma_k(pair_gamma(2.5), 1)(0, 0) == 2.5);
  Eigen::MatrixXd chain(3, 3);
  chain << 0, 1, 3, 1, 0, 2, 3, 2, 0;
  Eigen::MatrixXd expected(2, 2);
  expected << 1, 1, 1, 3;
  CHECK((sigma_k(chain, 0) - expected).norm() == 0.0);
  CHECK_THROWS_AS(sigma_k(Eigen::MatrixXd::Zero(3, 3), 0), Error);
  Eigen::MatrixXd asym = chain;
  asym(0, 1) = 2.0;
  CHECK_THROWS_AS(validate_variogram(asym), Error);
}

TEST_CASE("intensity homogeneity and anchor invariance") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> ux(0.3, 4.0);
  for (int n : {2, 3, 4}) {
    for (int rep = 0; rep < 20; ++rep) {
      const auto g = random_variogram(n, rng);
      std::vector<double> x(n), x2(n);
      for (int i = 0; i < n; ++i) {
        x[i] = ux(rng);
        x2[i] = 2.0 * x[i];
      }
      const double l0 = hr_intensity(x, g, 0);
      CHECK(l0 > 0.0);
      CHECK(std::abs(hr_intensity(x2, g, 0) - std::pow(2.0, -(n + 1)) * l0) < 1e-10 * l0);
      for (int k = 1; k < n; ++k) CHECK(std::abs(hr_intensity(x, g, k) - l0) < 1e-10 * l0);
    }
  }
}

TEST_CASE("bivariate intensity agrees with the N-variate form") {
  for (double g : {0.1, 1.0, 7.0})
    for (double x1 : {0.5, 1.0, 3.0})
      for (double x2 : {0.8, 2.0}) {
        const double l = lambda2(x1, x2, g);
        CHECK(std::abs(bivariate_intensity(x1, x2, g) - l) < 1e-12 * l);
        CHECK(bivariate_log_intensity(x1, x2, g) == doctest::Approx(std::log(l)).epsilon(1e-12));
      }
}

TEST_CASE("margin normalization by quadrature") {
  auto f = [](double y1) { return inner(y1, 0.0, 1.0); };
  const double mass = gauss_kronrod<double, 61>::integrate(f, 1.0, kInf, 15, 1e-10);
  CHECK(std::abs(mass - 1.0) < 1e-4);
}

TEST_CASE("closed-form V against quadrature of the intensity") {
  CHECK(bivariate_V(1.0, 1.0, 4.0) == doctest::Approx(1.6826894921370859).epsilon(1e-14));
  CHECK(std::abs(V_quadrature(1.0, 1.0, 4.0) - bivariate_V(1.0, 1.0, 4.0)) < 1e-6);
  CHECK(std::abs(V_quadrature(0.7, 2.3, 1.3) - bivariate_V(0.7, 2.3, 1.3)) < 1e-6);
  CHECK(bivariate_V(1.0, 1.0, 1e6) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(bivariate_V(3.0, 6.0, 2.0) == doctest::Approx(bivariate_V(1.0, 2.0, 2.0) / 3.0).epsilon(1e-14));
  CHECK(bivariate_V(2.0, 4.0, 0.0) == 0.5);
}

TEST_CASE("partial derivatives against finite differences") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ux(0.3, 5.0), ug(0.05, 10.0);
  const double h = 1e-5;
  for (int rep = 0; rep < 200; ++rep) {
    const double x1 = ux(rng), x2 = ux(rng), g = ug(rng);
    const double fd1 = (bivariate_V(x1 + h, x2, g) - bivariate_V(x1 - h, x2, g)) / (2 * h);
    const double fd2 = (bivariate_V(x1, x2 + h, g) - bivariate_V(x1, x2 - h, g)) / (2 * h);
    CHECK(std::abs(bivariate_V1(x1, x2, g) - fd1) < 1e-6);
    CHECK(std::abs(bivariate_V2(x1, x2, g) - fd2) < 1e-6);
    const double mixed = -(bivariate_V1(x1, x2 + h, g) - bivariate_V1(x1, x2 - h, g)) / (2 * h);
    CHECK(mixed >= -1e-9);
    CHECK(std::abs(mixed - bivariate_intensity(x1, x2, g)) < 1e-6);
    CHECK(bivariate_log_neg_V1(x1, x2, g) == doctest::Approx(std::log(-bivariate_V1(x1, x2, g))).epsilon(1e-12));
  }
  CHECK(bivariate_V1(2.0, 3.0, 1e8) == doctest::Approx(-0.25).epsilon(1e-10));
}

TEST_CASE("log -V1 survives extreme arguments") {
  const double v = bivariate_log_neg_V1(1e6, 1.0, 0.01);
  CHECK(std::isfinite(v));
  CHECK(v < -500.0);
}

TEST_CASE("chi_hr") {
  CHECK(chi_hr(0.0) == 1.0);
  CHECK(chi_hr(4.0) == doctest::Approx(0.31731050786291410).epsilon(1e-15));
  CHECK(chi_hr(1e8) < 1e-300);
  double prev = 1.0;
  for (double g = 0.01; g < 50.0; g *= 1.3) {
    const double c = chi_hr(g);
    CHECK(c < prev);
    CHECK(c == 2.0 - bivariate_V(1.0, 1.0, g));
    CHECK(gamma_from_chi(c) == doctest::Approx(g).epsilon(1e-10));
    prev = c;
  }
}

TEST_CASE("Monte Carlo extremal coefficient") {
  const auto pair = SpanningTree::from_edges(2, {{0, 1}});
  const auto est = mc_exponent_V1(pair, EdgeValues{{{0, 1}, 4.0}}, 200000, 3);
  CHECK(std::abs(est.estimate - 1.6826894921370859) < 3.0 * est.std_error);

  const auto near_one = mc_exponent_V1(pair, EdgeValues{{{0, 1}, 1e-10}}, 10000, 4);
  CHECK(near_one.estimate == doctest::Approx(1.0).epsilon(1e-3));

  const auto chain = SpanningTree::from_edges(3, {{0, 1}, {1, 2}});
  const EdgeValues g{{{0, 1}, 1.0}, {{1, 2}, 1.0}};
  const auto a = mc_exponent_V1(chain, g, 100000, 10);
  const auto b = mc_exponent_V1(chain, g, 100000, 11);
  CHECK(std::abs(a.estimate - b.estimate) < 3.0 * std::hypot(a.std_error, b.std_error));
}
