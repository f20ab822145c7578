#pragma once
#include <cmath>
#include <cstdint>
#include <numbers>

#include "oqc/errors.hpp"

namespace oqc {

// Poisson pmf evaluated through the saddle-point decomposition
//   log p(y; lambda) = -stirlerr(y) - bd0(y, lambda) - 0.5*log(2*pi*y)
// which avoids the catastrophic cancellation of y*log(lambda) - lambda -
// lgamma(y+1) at large rates. Accurate to a few ulp for lambda up to 1e4
// and beyond.

namespace detail {

/// stirlerr(n) = log(n!) - [n log n - n + 0.5 log(2 pi n)]
inline double stirlerr(double n) {
  constexpr double s0 = 1.0 / 12.0;
  constexpr double s1 = 1.0 / 360.0;
  constexpr double s2 = 1.0 / 1260.0;
  constexpr double s3 = 1.0 / 1680.0;
  constexpr double s4 = 1.0 / 1188.0;
  if (n < 16.0) {
    // exact via lgamma; cancellation is mild at small n
    return std::lgamma(n + 1.0) -
           (n * std::log(n) - n + 0.5 * std::log(2.0 * std::numbers::pi * n));
  }
  const double nn = n * n;
  return (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / n;
}

/// bd0(x, np) = x log(x/np) + np - x, evaluated stably near x == np.
inline double bd0(double x, double np) {
  if (std::abs(x - np) < 0.1 * (x + np)) {
    const double v = (x - np) / (x + np);
    double s = (x - np) * v;
    double ej = 2.0 * x * v;
    const double v2 = v * v;
    for (int j = 1; j < 1000; ++j) {
      ej *= v2;
      const double s1 = s + ej / (2 * j + 1);
      if (s1 == s) return s1;
      s = s1;
    }
  }
  return x * std::log(x / np) + np - x;
}

}  // namespace detail

/// log of the Poisson pmf with rate lambda at count y.
inline double poisson_log_pmf(std::int64_t y, double lambda) {
  if (y < 0) throw domain_error("poisson_log_pmf: negative count");
  if (lambda < 0.0 || !std::isfinite(lambda))
    throw domain_error("poisson_log_pmf: rate must be finite and >= 0");
  if (lambda == 0.0)
    return y == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  if (y == 0) return -lambda;
  const double yd = static_cast<double>(y);
  return -detail::stirlerr(yd) - detail::bd0(yd, lambda) -
         0.5 * std::log(2.0 * std::numbers::pi * yd);
}

inline double poisson_pmf(std::int64_t y, double lambda) {
  return std::exp(poisson_log_pmf(y, lambda));
}

/// Upper-tail mass Pr(Y >= y0). Forward sum plus a geometric remainder bound,
/// accurate when the survival itself is small; otherwise via 1 - cdf.
inline double poisson_survival(std::int64_t y0, double lambda) {
  if (y0 <= 0) return 1.0;
  if (lambda == 0.0) return 0.0;
  const double mean = lambda;
  if (static_cast<double>(y0) > mean) {
    // tail is the small side: sum forward until negligible
    double sum = 0.0;
    double logp = poisson_log_pmf(y0, lambda);
    double p = std::exp(logp);
    std::int64_t y = y0;
    while (p > 0.0) {
      sum += p;
      ++y;
      p *= lambda / static_cast<double>(y);
      if (p < sum * 1e-18 && static_cast<double>(y) > lambda) break;
    }
    // geometric remainder
    const double r = lambda / static_cast<double>(y + 1);
    if (r < 1.0) sum += p * r / (1.0 - r);
    return sum;
  }
  // head is the small side
  double head = 0.0;
  double p = std::exp(-lambda);
  head = p;
  for (std::int64_t y = 1; y < y0; ++y) {
    p *= lambda / static_cast<double>(y);
    head += p;
  }
  return 1.0 - head;
}

/// Smallest Y_max with Poisson upper-tail mass beyond Y_max at most tail_eps.
/// Monotone nondecreasing in lambda and in 1/tail_eps.
inline std::int64_t truncation_bound(double lambda, double tail_eps) {
  if (!(tail_eps > 0.0 && tail_eps < 1.0))
    throw domain_error("truncation_bound: tail_eps must lie in (0,1)");
  if (lambda < 0.0 || !std::isfinite(lambda))
    throw domain_error("truncation_bound: rate must be finite and >= 0");
  if (lambda == 0.0) return 0;

  // Start far enough out that the remainder beyond y_top is negligible.
  std::int64_t y_top =
      static_cast<std::int64_t>(lambda + 12.0 * std::sqrt(lambda + 1.0) + 60.0);
  while (true) {
    const double r = lambda / static_cast<double>(y_top + 2);
    const double rem =
        (r < 1.0) ? poisson_pmf(y_top + 1, lambda) / (1.0 - r) : 1.0;
    if (rem <= tail_eps * 1e-3) break;
    y_top += y_top / 2 + 16;
  }
  // Walk down: tail(Y) = sum_{y > Y} pmf. Return the smallest Y with
  // tail(Y) <= tail_eps.
  const double r = lambda / static_cast<double>(y_top + 2);
  double tail = poisson_pmf(y_top + 1, lambda) * (r < 1.0 ? r / (1.0 - r) : 0.0);
  tail += poisson_pmf(y_top + 1, lambda);
  for (std::int64_t y = y_top; y >= 1; --y) {
    const double next_tail = tail + poisson_pmf(y, lambda);  // tail(y-1)
    if (next_tail > tail_eps) return y;
    tail = next_tail;
  }
  return 0;
}

}  // namespace oqc
