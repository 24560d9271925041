#pragma once

#include <cmath>

namespace ordfa {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
inline constexpr double kLogSqrt2Pi = 0.918938533204672741780329736406;
inline constexpr double kInvSqrt2 = 0.707106781186547524400844362105;

inline double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

/// Standard normal CDF.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

/// Upper tail, 1 - norm_cdf(x), without cancellation.
inline double norm_ccdf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

/// Standard normal quantile (Wichura's AS241, ~1e-16 relative accuracy).
/// Returns -inf / +inf at 0 / 1 and NaN outside [0, 1].
double norm_quantile(double p);

/// Log-density of Normal(mu, sd) at x.
inline double normal_lpdf(double x, double mu, double sd) {
  const double z = (x - mu) / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}

inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace ordfa
