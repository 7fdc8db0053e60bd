#pragma once

// Standard normal helpers. The CDF goes through std::erfc with the rounding
// error of x/sqrt(2) folded back in, so relative precision holds in both
// tails; the quantile uses Boost's inverse complementary error function.

#include <cmath>
#include <numbers>

namespace hrmix::normal {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

inline double pdf(double x) noexcept {
  return std::exp(-0.5 * x * x - kLogSqrt2Pi);
}

inline double log_pdf(double x) noexcept { return -0.5 * x * x - kLogSqrt2Pi; }

/// Survival function 1 - Phi(x), accurate for large positive x.
inline double sf(double x) noexcept {
  constexpr double kInvSqrt2Lo = -4.833646656726457e-17;
  constexpr double kTwoOverSqrtPi = 1.1283791670955126;
  const double t = x * kInvSqrt2;
  const double d = std::fma(x, kInvSqrt2, -t) + x * kInvSqrt2Lo;
  return 0.5 * (std::erfc(t) - d * kTwoOverSqrtPi * std::exp(-t * t));
}

inline double cdf(double x) noexcept { return sf(-x); }

/// log Phi(x); switches to an asymptotic series deep in the lower tail.
double log_cdf(double x) noexcept;

/// Inverse of cdf on (0, 1); returns -inf / +inf at the endpoints.
double quantile(double p);

/// Inverse of sf on (0, 1).
double isf(double q);

}  // namespace hrmix::normal
