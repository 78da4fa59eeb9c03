#pragma once

#include <cmath>
#include <limits>

#include "mmcd/error.hpp"

namespace mmcd::stats {

namespace detail {

inline constexpr double kGammaEps = 1e-15;
inline constexpr int kGammaMaxIter = 10000;

// P(a, x) by its power series; converges quickly for x < a + 1.
inline double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int i = 0; i < kGammaMaxIter; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kGammaEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Q(a, x) by the modified Lentz continued fraction; used for x >= a + 1.
inline double gamma_q_continued_fraction(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / kGammaEps;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kGammaMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kGammaEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

/// Regularized lower incomplete gamma function P(a, x).
inline double gamma_p(double a, double x) {
  if (!(a > 0.0)) throw PreconditionError("gamma_p requires a > 0");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return detail::gamma_p_series(a, x);
  return 1.0 - detail::gamma_q_continued_fraction(a, x);
}

/// Regularized upper incomplete gamma function Q(a, x) = 1 - P(a, x).
inline double gamma_q(double a, double x) {
  if (!(a > 0.0)) throw PreconditionError("gamma_q requires a > 0");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_continued_fraction(a, x);
}

inline double chi_square_cdf(double x, double dof) {
  if (!(dof > 0.0)) throw PreconditionError("chi-square degrees of freedom must be positive");
  return gamma_p(0.5 * dof, 0.5 * x);
}

/// Quantile of the chi-square distribution by bracketed bisection on the CDF.
inline double chi_square_quantile(double prob, double dof) {
  if (!(dof > 0.0)) throw PreconditionError("chi-square degrees of freedom must be positive");
  if (!(prob >= 0.0 && prob <= 1.0)) throw PreconditionError("probability must lie in [0, 1]");
  if (prob == 0.0) return 0.0;
  if (prob == 1.0) return std::numeric_limits<double>::infinity();
  double lo = 0.0;
  double hi = std::max(1.0, dof);
  while (chi_square_cdf(hi, dof) < prob) {
    lo = hi;
    hi *= 2.0;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-14 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (chi_square_cdf(mid, dof) < prob)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace mmcd::stats
