#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "pdpfi/errors.hpp"

namespace pdpfi {

/// Symmetric t-interval around a mean estimate. `variance` is the variance of
/// the mean itself, already scaled by any resampling correction.
struct IntervalEstimate {
  double mean = 0.0;
  double variance = 0.0;
  std::size_t df = 1;
  double lower = 0.0;
  double upper = 0.0;
  double alpha = 0.05;

  bool contains(double value) const { return lower <= value && value <= upper; }
  double width() const { return upper - lower; }
};

namespace detail {

// Continued fraction for the regularized incomplete beta (Lentz's method).
inline double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 400;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = a * std::log(x) + b * std::log1p(-x) -
                          (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0))
    return front * detail::beta_cf(a, b, x) / a;
  return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

/// Quantile of the t-distribution with `df` degrees of freedom: the value q
/// with CDF(q) = p. Inverts the incomplete-beta representation of the t CDF
/// by bisection; absolute accuracy well below 1e-8.
inline double t_quantile(double p, std::size_t df) {
  if (!(p > 0.0 && p < 1.0))
    throw Error(ErrorKind::InvalidProbability,
                "t_quantile needs p in (0,1)");
  if (df == 0)
    throw Error(ErrorKind::InvalidArgument, "t_quantile needs df >= 1");
  if (p == 0.5) return 0.0;

  // By symmetry solve for the upper tail and flip the sign if needed.
  const bool negate = p < 0.5;
  const double pu = negate ? 1.0 - p : p;

  // For q >= 0:  CDF(q) = 1 - I_x(df/2, 1/2) / 2  with  x = df / (df + q^2),
  // so I_x(df/2, 1/2) = 2 (1 - pu), with I_x increasing in x.
  const double a = 0.5 * static_cast<double>(df);
  const double b = 0.5;
  const double target = 2.0 * (1.0 - pu);

  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (incomplete_beta(a, b, mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  const double x = 0.5 * (lo + hi);
  const double q = std::sqrt(static_cast<double>(df) * (1.0 - x) / x);
  return negate ? -q : q;
}

/// Mean, corrected variance and symmetric t-interval of a sample:
///   variance = (1/m + c) * s^2   with s^2 the unbiased sample variance,
///   interval = mean -+ t_{1 - alpha/2, m-1} * sqrt(variance).
/// c = 0 gives the standard estimator; c > 0 compensates for training-set
/// overlap between resampled refits.
inline IntervalEstimate corrected_mean_ci(std::span<const double> samples,
                                          double c, double alpha) {
  const std::size_t m = samples.size();
  if (m < 2)
    throw Error(ErrorKind::TooFewSamples,
                "need at least 2 samples, got " + std::to_string(m));
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(ErrorKind::InvalidProbability, "alpha must be in (0,1)");
  if (!(c >= 0.0))
    throw Error(ErrorKind::InvalidArgument, "correction constant must be >= 0");
  for (double v : samples)
    if (!std::isfinite(v))
      throw Error(ErrorKind::NonFiniteValue, "non-finite sample");

  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(m);

  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double sample_var = ss / static_cast<double>(m - 1);
  const double variance = (1.0 / static_cast<double>(m) + c) * sample_var;

  IntervalEstimate est;
  est.mean = mean;
  est.variance = variance;
  est.df = m - 1;
  est.alpha = alpha;
  const double half = t_quantile(1.0 - alpha / 2.0, m - 1) * std::sqrt(variance);
  est.lower = mean - half;
  est.upper = mean + half;
  return est;
}

}  // namespace pdpfi
