#include "hrmix/normal.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <limits>

namespace hrmix::normal {

double log_cdf(double x) noexcept {
  if (x > -30.0) return std::log(cdf(x));
  // Mills-ratio expansion: Phi(x) ~ phi(x)/|x| * (1 - 1/x^2 + 3/x^4 - 15/x^6)
  const double r = 1.0 / (x * x);
  return log_pdf(x) - std::log(-x) + std::log1p(r * (-1.0 + r * (3.0 - 15.0 * r)));
}

double quantile(double p) {
  if (!(p > 0.0)) return -std::numeric_limits<double>::infinity();
  if (!(p < 1.0)) return std::numeric_limits<double>::infinity();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double isf(double q) {
  if (!(q > 0.0)) return std::numeric_limits<double>::infinity();
  if (!(q < 1.0)) return -std::numeric_limits<double>::infinity();
  return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
}

}  // namespace hrmix::normal
