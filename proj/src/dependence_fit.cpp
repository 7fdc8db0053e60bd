#include "hrmix/dependence_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "hrmix/error.hpp"
#include "hrmix/hr_core.hpp"
#include "hrmix/normal.hpp"
#include "hrmix/optimize.hpp"

namespace hrmix {
namespace {

const double kLogFloor = std::log(kLikelihoodFloor);
constexpr double kSingularObjective = -1e300;

struct LogDetGrad {
  double log_det = 0.0;
  bool singular = false;
};

// log det Q(W) for W = exp(log_w) on the series edges; when grad is given,
// adds scale * d log det / d log w_e into it.
LogDetGrad log_det_q(const LikelihoodSeries& s, const Eigen::VectorXd& log_w, double scale,
                     std::vector<double>* grad) {
  const auto n = static_cast<Eigen::Index>(s.node_count);
  if (n <= 1) return {};
  const double shift = log_w.maxCoeff();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t e = 0; e < s.edges.size(); ++e) {
    const double v = std::exp(log_w(static_cast<Eigen::Index>(e)) - shift);
    w(s.edges[e].first, s.edges[e].second) = v;
    w(s.edges[e].second, s.edges[e].first) = v;
  }
  const LogDet ld = log_laplacian_minor_det(w);
  if (ld.singular) return {0.0, true};
  LogDetGrad out{ld.value + static_cast<double>(n - 1) * shift, false};
  if (grad) {
    const Eigen::MatrixXd minor = laplacian(w).topLeftCorner(n - 1, n - 1);
    const Eigen::MatrixXd inv = minor.llt().solve(Eigen::MatrixXd::Identity(n - 1, n - 1));
    auto entry = [&](int a, int b) {
      return (a == n - 1 || b == n - 1) ? 0.0 : inv(a, b);
    };
    for (std::size_t e = 0; e < s.edges.size(); ++e) {
      const auto [i, j] = s.edges[e];
      const double r = entry(i, i) + entry(j, j) - 2.0 * entry(i, j);
      (*grad)[e] += scale * w(i, j) * r;
    }
  }
  return out;
}

ObjectiveValue evaluate(std::span<const double> eta, std::span<const std::size_t> batch,
                        const LikelihoodSeries& series, double a1, std::vector<double>* grad) {
  const std::size_t m = series.edges.size();
  if (eta.size() != m) throw Error(ErrorKind::Domain, "eta length must equal the edge count");
  const Eigen::Map<const Eigen::VectorXd> eta_v(eta.data(), static_cast<Eigen::Index>(m));
  if (!eta_v.allFinite()) throw Error(ErrorKind::Domain, "eta must be finite");
  if (grad) grad->assign(m, 0.0);

  bool singular = false;
  double value = 0.0;
  for (std::size_t r : batch) {
    if (r >= series.size()) throw Error(ErrorKind::Domain, "batch index out of range");
    const Eigen::VectorXd lw = eta_v + series.log_values.row(static_cast<Eigen::Index>(r)).transpose();
    const auto term = log_det_q(series, lw, 1.0, grad);
    if (term.singular) {
      singular = true;
      continue;
    }
    value += term.log_det;
  }
  const double b = static_cast<double>(batch.size());
  const auto base = log_det_q(series, eta_v, -b, grad);
  if (base.singular) singular = true;
  value -= b * base.log_det;

  double sq = 0.0;
  for (double x : eta) sq += std::exp(2.0 * x);
  value -= a1 * (sq - 1.0) * (sq - 1.0);
  if (grad)
    for (std::size_t e = 0; e < m; ++e) (*grad)[e] -= 4.0 * a1 * (sq - 1.0) * std::exp(2.0 * eta[e]);
  if (singular) return {kSingularObjective, true};
  return {value, false};
}

void project(std::vector<double>& eta) {
  double sq = 0.0;
  for (double x : eta) sq += std::exp(2.0 * x);
  const double shift = 0.5 * std::log(sq);
  for (double& x : eta) x -= shift;
}

}  // namespace

std::optional<double> censored_pair_loglik(double yi, double yj, double u, double g,
                                           std::size_t* floor_hits) {
  if (!(u > 1.0)) throw Error(ErrorKind::Domain, "dependence threshold must exceed 1");
  if (!(g > 0.0)) throw Error(ErrorKind::Domain, "variogram value must be positive");
  if (std::isnan(yi) || std::isnan(yj)) return std::nullopt;
  const bool ei = yi > u;
  const bool ej = yj > u;
  if (!ei && !ej) return std::nullopt;
  const double log_v = std::log(bivariate_V(1.0, 1.0, g));
  double value;
  if (ei && ej)
    value = bivariate_log_intensity(yi / u, yj / u, g);
  else if (ei)
    value = bivariate_log_neg_V1(yi / u, 1.0, g);
  else
    value = bivariate_log_neg_V1(yj / u, 1.0, g);  // V2(1, y) = V1(y, 1)
  value -= log_v;
  if (!(value >= kLogFloor)) {
    if (floor_hits) ++*floor_hits;
    value = kLogFloor;
  }
  return value;
}

double censored_pair_total(std::span<const double> yi, std::span<const double> yj, double u,
                           double g, std::size_t* floor_hits) {
  if (yi.size() != yj.size()) throw Error(ErrorKind::Domain, "series lengths differ");
  double total = 0.0;
  for (std::size_t t = 0; t < yi.size(); ++t)
    if (auto v = censored_pair_loglik(yi[t], yj[t], u, g, floor_hits)) total += *v;
  return total;
}

EdgeGammaFit fit_edge_gamma(std::span<const double> yi, std::span<const double> yj, double u) {
  if (yi.size() != yj.size()) throw Error(ErrorKind::Domain, "series lengths differ");
  if (!(u > 1.0)) throw Error(ErrorKind::Domain, "dependence threshold must exceed 1");
  std::vector<double> a, b;
  std::size_t ni = 0, nj = 0, joint = 0;
  for (std::size_t t = 0; t < yi.size(); ++t) {
    if (std::isnan(yi[t]) || std::isnan(yj[t])) continue;
    const bool ei = yi[t] > u;
    const bool ej = yj[t] > u;
    if (!ei && !ej) continue;
    a.push_back(yi[t]);
    b.push_back(yj[t]);
    ni += ei;
    nj += ej;
    joint += ei && ej;
  }
  EdgeGammaFit fit;
  fit.exceedances = a.size();
  if (a.size() < kMinPairExceedances)
    throw Error(ErrorKind::InsufficientData,
                "edge has " + std::to_string(a.size()) + " bivariate exceedances, need " +
                    std::to_string(kMinPairExceedances));

  const double chi = 2.0 * static_cast<double>(joint) / static_cast<double>(ni + nj);
  double g0 = chi > 0.0 ? (chi >= 1.0 ? kGammaLower : gamma_from_chi(chi)) : kGammaUpper;
  g0 = std::clamp(g0, kGammaLower, kGammaUpper);

  auto negll = [&](double log_g) { return -censored_pair_total(a, b, u, std::exp(log_g)); };
  const double lo = std::log(kGammaLower);
  const double hi = std::log(kGammaUpper);
  const auto best = optimize::grid_brent_minimize(negll, lo, hi, 57, 40, true);

  fit.start_gamma = g0;
  fit.start_loglik = -negll(std::log(g0));
  if (-best.value >= fit.start_loglik) {
    fit.gamma = std::exp(best.x);
    fit.loglik = -best.value;
  } else {
    fit.gamma = g0;
    fit.loglik = fit.start_loglik;
  }
  censored_pair_total(a, b, u, fit.gamma, &fit.floor_hits);
  const double log_gamma = std::log(fit.gamma);
  fit.boundary = log_gamma - lo < 1e-3 || hi - log_gamma < 1e-3;
  return fit;
}

EdgeValues fit_edge_gammas(const Panel& panel, const LatticeGraph& graph, double u,
                           std::vector<EdgeGammaFit>* fits) {
  EdgeValues out;
  if (fits) fits->clear();
  for (const auto& e : graph.edges) {
    const auto& yi = panel.at(static_cast<std::size_t>(e.i));
    const auto& yj = panel.at(static_cast<std::size_t>(e.j));
    EdgeGammaFit fit;
    try {
      fit = fit_edge_gamma(yi, yj, u);
    } catch (const Error& err) {
      throw Error(err.kind(), "edge (" + std::to_string(e.i) + ", " + std::to_string(e.j) + "): " + err.what());
    }
    out.set(e.i, e.j, fit.gamma);
    if (fits) fits->push_back(fit);
  }
  return out;
}

Eigen::MatrixXd LikelihoodSeries::matrix(std::size_t r) const {
  const auto n = static_cast<Eigen::Index>(node_count);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double v = std::exp(log_values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(e)));
    m(edges[e].first, edges[e].second) = v;
    m(edges[e].second, edges[e].first) = v;
  }
  return m;
}

LikelihoodSeries build_likelihood_matrices(const Panel& panel, const LatticeGraph& graph,
                                           const EdgeValues& gammas, double u) {
  if (panel.size() != graph.node_count())
    throw Error(ErrorKind::Domain, "panel rows must match the graph nodes");
  LikelihoodSeries s;
  s.node_count = graph.node_count();
  s.edges = graph.edge_keys();
  const std::size_t T = panel.empty() ? 0 : panel.front().size();
  for (std::size_t t = 0; t < T; ++t) {
    bool any = false;
    for (const auto& row : panel) any = any || row.at(t) > u;
    if (any) s.times.push_back(t);
  }
  s.log_values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s.times.size()),
                                       static_cast<Eigen::Index>(s.edges.size()));
  for (std::size_t e = 0; e < s.edges.size(); ++e) {
    const auto [i, j] = s.edges[e];
    const double g = gammas.at(i, j);
    for (std::size_t r = 0; r < s.times.size(); ++r) {
      const std::size_t t = s.times[r];
      const double yi = panel[static_cast<std::size_t>(i)][t];
      const double yj = panel[static_cast<std::size_t>(j)][t];
      if (auto v = censored_pair_loglik(yi, yj, u, g, &s.floor_hits)) {
        // divide out the unit-Pareto margins of the exceeding coordinates
        double margin = 0.0;
        if (yi > u) margin += 2.0 * std::log(yi / u);
        if (yj > u) margin += 2.0 * std::log(yj / u);
        s.log_values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(e)) = *v + margin;
      }
    }
  }
  return s;
}

void DsgaConfig::validate() const {
  if (!(a1 > 0.0) || !(rho0 > 0.0) || !(kappa > 0.0) || batch == 0 || !(tolerance > 0.0) ||
      patience == 0 || eval_every == 0)
    throw Error(ErrorKind::Config, "DSGA constants must be positive");
}

ObjectiveValue dsga_objective(std::span<const double> eta, std::span<const std::size_t> batch,
                              const LikelihoodSeries& series, double a1) {
  return evaluate(eta, batch, series, a1, nullptr);
}

std::vector<double> dsga_gradient(std::span<const double> eta, std::span<const std::size_t> batch,
                                  const LikelihoodSeries& series, double a1) {
  std::vector<double> grad;
  evaluate(eta, batch, series, a1, &grad);
  return grad;
}

std::vector<std::size_t> full_batch(const LikelihoodSeries& series) {
  std::vector<std::size_t> all(series.size());
  std::iota(all.begin(), all.end(), 0);
  return all;
}

double upper_norm(const EdgeValues& beta) {
  double sq = 0.0;
  for (const auto& [key, b] : beta) sq += b * b;
  return std::sqrt(sq);
}

DsgaResult dsga_fit_beta(const LikelihoodSeries& series, const DsgaConfig& config,
                         std::uint64_t seed) {
  config.validate();
  const std::size_t m = series.edges.size();
  if (m == 0) throw Error(ErrorKind::Domain, "graph has no edges");
  if (series.size() == 0) throw Error(ErrorKind::InsufficientData, "likelihood series is empty");

  std::vector<double> eta(m, -0.5 * std::log(static_cast<double>(m)));
  const auto all = full_batch(series);
  const std::size_t B = std::min(config.batch, series.size());

  DsgaResult result;
  const auto init = dsga_objective(eta, all, series, config.a1);
  result.initial_objective = init.value;
  result.trace.push_back({0, init.value});
  std::vector<double> best_eta = eta;
  double best = init.value;
  std::size_t last_improvement = 0;
  std::size_t singular_run = 0;

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> pool = all;
  std::vector<std::size_t> batch(B);
  std::size_t k = 0;
  for (; k < config.max_iterations; ++k) {
    for (std::size_t b = 0; b < B; ++b) {
      std::uniform_int_distribution<std::size_t> pick(b, pool.size() - 1);
      std::swap(pool[b], pool[pick(rng)]);
      batch[b] = pool[b];
    }
    const auto grad = dsga_gradient(eta, batch, series, config.a1);
    const double rho = config.rho0 / (1.0 + static_cast<double>(k) / config.kappa);
    for (std::size_t e = 0; e < m; ++e) eta[e] += rho * grad[e] / static_cast<double>(B);
    project(eta);

    const std::size_t done = k + 1;
    if (done % config.eval_every != 0 && done != config.max_iterations) continue;
    const auto full = dsga_objective(eta, all, series, config.a1);
    result.trace.push_back({done, full.value});
    if (full.singular) {
      if (++singular_run >= 5)
        throw OptimizationError("DSGA objective stayed singular over 5 evaluations", eta);
      continue;
    }
    singular_run = 0;
    if (full.value > best + config.tolerance * std::max(1.0, std::abs(best))) {
      last_improvement = done;
    }
    if (full.value > best) {
      best = full.value;
      best_eta = eta;
    }
    if (done - last_improvement >= config.patience) {
      result.converged = true;
      ++k;
      break;
    }
  }
  result.iterations = k;
  if (k == config.max_iterations && config.max_iterations == 0) result.converged = true;
  project(best_eta);
  result.eta = best_eta;
  result.objective = best;
  double sq = 0.0;
  std::vector<double> b(m);
  for (std::size_t e = 0; e < m; ++e) {
    b[e] = std::exp(best_eta[e]);
    sq += b[e] * b[e];
  }
  const double norm = std::sqrt(sq);
  for (std::size_t e = 0; e < m; ++e) result.beta.set(series.edges[e].first, series.edges[e].second, b[e] / norm);
  return result;
}

}  // namespace hrmix
