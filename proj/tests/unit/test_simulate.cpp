#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "hrmix/dataset.hpp"
#include "hrmix/error.hpp"
#include "hrmix/gpd_margins.hpp"
#include "hrmix/hr_core.hpp"
#include "hrmix/mixture.hpp"
#include "hrmix/simulate.hpp"

using namespace hrmix;

namespace {

double ks_unit_pareto(std::vector<double> y) {
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(y.size());
  double d = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double f = 1.0 - 1.0 / y[k];
    d = std::max({d, std::abs(f - k / n), std::abs(f - (k + 1) / n)});
  }
  return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

double sample_variance(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= v.size();
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / (v.size() - 1);
}

}  // namespace

TEST_CASE("rooted sampler basics") {
  const auto single = SpanningTree::from_edges(1, {});
  std::vector<double> roots;
  for (std::uint64_t s = 0; s < 4000; ++s) {
    const auto r = sample_tree_hr_rooted(single, {}, 0, s);
    CHECK(r.values.size() == 1);
    CHECK(r.values[0] >= 1.0);
    roots.push_back(r.values[0]);
  }
  CHECK(ks_unit_pareto(roots) < 0.03);

  const auto pair = SpanningTree::from_edges(2, {{0, 1}});
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto r = sample_tree_hr_rooted(pair, EdgeValues{{{0, 1}, 0.0}}, 1, s);
    CHECK(r.root == 1);
    CHECK(r.values[0] == r.values[1]);
  }
}

TEST_CASE("rooted chain variogram matches the path sum") {
  const auto chain = SpanningTree::from_edges(3, {{0, 1}, {1, 2}});
  const EdgeValues g{{{0, 1}, 1.0}, {{1, 2}, 2.0}};
  const RootedTreeSampler sampler(chain, g);
  std::mt19937_64 rng(123);
  std::vector<double> x(3), d;
  const std::size_t n = 100000;
  for (std::size_t s = 0; s < n; ++s) {
    sampler.sample(0, rng, x);
    d.push_back(std::log(x[0]) - std::log(x[2]));
  }
  const double var = sample_variance(d);
  // Var of a sample variance for Gaussian data is 2 sigma^4 / (n - 1)
  const double se = std::sqrt(2.0 * 9.0 / (n - 1));
  CHECK(std::abs(var - 3.0) < 3.0 * se);
}

TEST_CASE("MPD sampler") {
  const auto pair = SpanningTree::from_edges(2, {{0, 1}});
  const auto s = sample_mpd_tree(pair, EdgeValues{{{0, 1}, 4.0}}, 100000, 2);
  REQUIRE(s.values.rows() == 100000);
  CHECK(s.proposals >= 100000);
  CHECK(s.acceptance_rate() > 0.5);
  double n1 = 0, joint = 0;
  std::vector<double> margin;
  for (Eigen::Index r = 0; r < s.values.rows(); ++r) {
    CHECK(s.values.row(r).maxCoeff() > 1.0);
    CHECK(s.values.row(r).minCoeff() > 0.0);
    if (s.values(r, 0) > 1.0) {
      ++n1;
      joint += s.values(r, 1) > 1.0;
      if (margin.size() < 10000) margin.push_back(s.values(r, 0));
    }
  }
  const double chi = chi_hr(4.0);
  CHECK(std::abs(joint / n1 - chi) < 3.0 * std::sqrt(chi * (1 - chi) / n1));
  CHECK(ks_unit_pareto(margin) < 0.02);

  // exceedance fractions give V(1, 1) = Lambda{max > 1} / Lambda{x_1 > 1}
  const double v_hat = s.values.rows() / n1;
  const double p = n1 / s.values.rows();
  const double se = std::sqrt(p * (1 - p) / s.values.rows()) / (p * p);
  CHECK(std::abs(v_hat - bivariate_V(1.0, 1.0, 4.0)) < 3.0 * se);

  const auto again = sample_mpd_tree(pair, EdgeValues{{{0, 1}, 4.0}}, 1000, 2);
  CHECK(again.values == s.values.topRows(1000));
}

TEST_CASE("MPD sampler reports degeneracy") {
  // near-comonotone star: every proposal exceeds at all nodes, acceptance 1/2000
  std::vector<EdgeKey> star;
  for (int j = 1; j < 2000; ++j) star.push_back({0, j});
  const auto tree = SpanningTree::from_edges(2000, star);
  EdgeValues g;
  for (auto [i, j] : star) g.set(i, j, 1e-8);
  CHECK_THROWS_AS(sample_mpd_tree(tree, g, 10, 1), Error);
}

TEST_CASE("mixture sampler") {
  TreeMixtureModel m;
  m.graph = LatticeGraph::from_edges(3, {{0, 1}, {0, 2}, {1, 2}});
  m.ensemble.trees = {SpanningTree::from_edges(3, {{0, 1}, {1, 2}}), SpanningTree::from_edges(3, {{0, 2}, {1, 2}})};
  m.gammas = EdgeValues{{{0, 1}, 1.0}, {{1, 2}, 1.5}, {{0, 2}, 0.6}};
  m.prior = {0.25, 0.75};
  const std::size_t n = 100000;
  const auto s = sample_mixture(m, n, 7);
  const double f0 = std::count(s.tree_index.begin(), s.tree_index.end(), 0) / double(n);
  CHECK(std::abs(f0 - 0.25) < 3.0 * std::sqrt(0.25 * 0.75 / n));

  TreeMixtureModel single = m;
  single.ensemble.trees = {m.ensemble.trees[0]};
  single.prior = {1.0};
  const auto a = sample_mixture(single, 20000, 1);
  const auto b = sample_mpd_tree(m.ensemble.trees[0], m.gammas, 20000, 99);
  for (Eigen::Index c = 0; c < 3; ++c) {
    std::vector<double> va(a.values.col(c).data(), a.values.col(c).data() + 20000);
    std::vector<double> vb(b.values.col(c).data(), b.values.col(c).data() + 20000);
    // two-sample KS critical value at the 0.001 level
    CHECK(ks_two_sample(va, vb) < 1.95 * std::sqrt(2.0 / 20000));
  }
}

TEST_CASE("grid sites and random tree dependence") {
  const GridSpec grid{3, 2, 140.0, -38.0, 0.5};
  const auto sites = grid_sites(grid);
  REQUIRE(sites.size() == 6);
  CHECK(sites[0].id == "S0000");
  CHECK(sites[1].lon == 140.5);
  CHECK(sites[3].lat == -37.5);
  const auto dep = random_tree_dependence(grid, 1.5, 3);
  CHECK(dep.tree.edges.size() == 5);
  CHECK(is_spanning_tree(dep.tree));
  for (const auto& [k, v] : dep.gammas) CHECK(v == 1.5);
}

TEST_CASE("synthetic datasets") {
  const GridSpec grid{3, 3, 140.0, -38.0, 0.5};
  DependenceSpec indep;
  indep.independent = true;
  const auto d = generate_synthetic_dataset(grid, {}, indep, 20000, 4);
  CHECK(d.site_count() == 9);
  CHECK(d.time_count() == 20000);
  CHECK(d.dates.front() == Date{1999, 11, 1});
  for (const auto& date : d.dates) CHECK(in_summer(date));
  double mean_chi = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = i + 1; j < 9; ++j, ++pairs) mean_chi += *empirical_chi(d.values[i], d.values[j]);
  mean_chi /= pairs;
  CHECK(std::abs(mean_chi - 0.05) < 3.0 * std::sqrt(0.05 * 0.95 / 1000.0 / pairs));

  std::ostringstream a, b;
  write_dataset_csv(d, a);
  write_dataset_csv(generate_synthetic_dataset(grid, {}, indep, 20000, 4), b);
  CHECK(a.str() == b.str());
}

TEST_CASE("synthetic GP margins are recovered") {
  const GridSpec grid{2, 1, 140.0, -38.0, 0.5};
  const auto dep = random_tree_dependence(grid, 1.0, 1);
  const auto d = generate_synthetic_dataset(grid, {}, dep, 100000, 2);
  for (const auto& row : d.values) {
    std::vector<Exceedance> e;
    for (double z : row)
      if (z > 20.0) e.push_back({z, 0});
    const auto fit = fit_pooled_gpd(e, 20.0);
    CHECK(std::abs(fit.params.sigma - 2.0) <= 0.1);
    CHECK(std::abs(fit.params.xi - 0.1) <= 0.05);
  }
}

TEST_CASE("synthetic trend shifts later seasons") {
  const GridSpec grid{1, 1, 140.0, -38.0, 0.5};
  DependenceSpec indep;
  indep.independent = true;
  MarginalSpec m;
  m.trend = 0.5;
  const auto d = generate_synthetic_dataset(grid, m, indep, 1203, 1);
  MarginalSpec flat;
  const auto base = generate_synthetic_dataset(grid, flat, indep, 1203, 1);
  for (std::size_t t = 0; t < d.time_count(); ++t)
    CHECK(d.values[0][t] - base.values[0][t] == doctest::Approx(0.5 * (season_of(d.dates[t]) - 1999)));
}
