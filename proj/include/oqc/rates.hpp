#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include "oqc/coherent.hpp"
#include "oqc/errors.hpp"
#include "oqc/poisson.hpp"
#include "oqc/quadrature.hpp"

namespace oqc {

inline constexpr int kEnumerationCap = 14;  ///< hard cap on K for 2^K paths
inline constexpr double kLn2 = std::numbers::ln2;

/// Sum-rate together with its Gaussian-approximation bounds and internals.
struct RateBreakdown {
  double exact = 0.0;       ///< bits, series evaluation
  double lower_ga = 0.0;    ///< bits
  double upper_ga = 0.0;    ///< bits
  double asymptotic = 0.0;  ///< bits, exact midpoint of the two bounds
  std::vector<double> omega_low;
  std::vector<double> omega_up;
  double xi_low = 0.0;
  double xi_up = 0.0;
};

namespace detail {

inline void check_k_cap(std::size_t k) {
  if (k > kEnumerationCap)
    throw capacity_error(
        "K exceeds the 2^K enumeration cap (14); use the sampled estimator");
}

inline double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// log pmf of outcome y under a receiver variant.
inline double variant_log_pmf(double lambda, const DetectionConfig& det,
                              std::int64_t y) {
  switch (det.variant) {
    case ReceiverVariant::ideal_pnrd:
      return poisson_log_pmf(y, lambda);
    case ReceiverVariant::finite_pnrd:
      if (y < det.n_max) return poisson_log_pmf(y, lambda);
      return std::log(poisson_survival(det.n_max, lambda));
    case ReceiverVariant::on_off_kennedy:
      return y == 0 ? -lambda : std::log(-std::expm1(-lambda));
  }
  return -std::numeric_limits<double>::infinity();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Exact sum-rate and its entropy-definition oracle
// ---------------------------------------------------------------------------

/// Exact sum-rate in bits: K + 1/(2^K ln2) * sum_y { sum_i p_i ln p_i -
/// (sum_i p_i) ln(sum_i p_i) } with p_i the detection pmf of configuration i.
inline double exact_sum_rate(std::span<const double> amps_on,
                             const DetectionConfig& det, double tail_eps = 1e-12) {
  det.validate();
  detail::check_k_cap(amps_on.size());
  if (!(tail_eps > 0.0 && tail_eps < 1.0))
    throw domain_error("exact_sum_rate: tail_eps must lie in (0,1)");
  const int K = static_cast<int>(amps_on.size());
  const auto amps = enumerate_amplitudes(amps_on);
  const std::size_t n = amps.size();
  std::vector<double> lambda(n);
  double lam_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lambda[i] = detection_rate(amps[i] * amps[i], det);
    lam_max = std::max(lam_max, lambda[i]);
  }
  const std::int64_t ny = outcome_count(lam_max, det, tail_eps);

  double acc = 0.0;  // sum_y [ sum_i p ln p - S ln S ]
  std::vector<double> logp(n);
  for (std::int64_t y = 0; y < ny; ++y) {
    double t1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      logp[i] = detail::variant_log_pmf(lambda[i], det, y);
      const double p = std::exp(logp[i]);
      if (p > 0.0) t1 += p * logp[i];
    }
    const double ls = detail::log_sum_exp(logp);
    if (std::isfinite(ls)) acc += t1 - std::exp(ls) * ls;
  }
  return K + acc / (static_cast<double>(n) * kLn2);
}

/// Independent evaluation path: H(Y) - H(Y|X_1..X_K) with uniform priors,
/// accumulated directly in bits. Exists to cross-validate exact_sum_rate.
inline double entropy_oracle_sum_rate(std::span<const double> amps_on,
                                      const DetectionConfig& det,
                                      double tail_eps = 1e-12) {
  det.validate();
  detail::check_k_cap(amps_on.size());
  const auto amps = enumerate_amplitudes(amps_on);
  const std::size_t n = amps.size();
  const double prior = 1.0 / static_cast<double>(n);
  std::vector<double> lambda(n);
  double lam_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lambda[i] = detection_rate(amps[i] * amps[i], det);
    lam_max = std::max(lam_max, lambda[i]);
  }
  const std::int64_t ny = outcome_count(lam_max, det, tail_eps);

  double h_y = 0.0;
  double h_y_given_x = 0.0;
  for (std::int64_t y = 0; y < ny; ++y) {
    double p_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = detection_pmf(amps[i] * amps[i], det, y);
      p_y += prior * p;
      if (p > 0.0) h_y_given_x -= prior * p * std::log2(p);
    }
    if (p_y > 0.0) h_y -= p_y * std::log2(p_y);
  }
  return h_y - h_y_given_x;
}

// ---------------------------------------------------------------------------
// Gaussian approximation machinery
// ---------------------------------------------------------------------------

/// Normal(lambda, lambda) density at y, the Gaussian stand-in for the
/// Poisson detection pmf.
inline double gaussian_pmf(double mean_signal_photons, const DetectionConfig& det,
                           double y) {
  const double lambda = detection_rate(mean_signal_photons, det);
  if (!(lambda > 0.0)) throw domain_error("gaussian_pmf: lambda must be > 0");
  const double z = y - lambda;
  return std::exp(-z * z / (2.0 * lambda)) /
         std::sqrt(2.0 * std::numbers::pi * lambda);
}

/// The two omega vectors of the bound machinery. omega_low scales the
/// enumerated-power differences by the background-noise width, omega_up by
/// the width at the full superposed power.
inline std::pair<std::vector<double>, std::vector<double>> omega_terms(
    std::span<const double> amps_on, const DetectionConfig& det) {
  det.validate();
  detail::check_k_cap(amps_on.size());
  if (!(det.n_b > 0.0))
    throw domain_error("omega_terms: n_b = 0 degenerates the lower bound");
  const auto amps = enumerate_amplitudes(amps_on);
  const std::size_t n = amps.size();
  double total = 0.0;
  std::vector<double> amp2(n);
  for (std::size_t i = 0; i < n; ++i) {
    amp2[i] = amps[i] * amps[i];
    total += amp2[i];
  }
  double sum_amp = 0.0;
  for (double a : amps_on) sum_amp += a;
  const double v_full = det.eta * sum_amp * sum_amp + det.n_b;
  const double c_low = det.eta / (2.0 * std::sqrt(2.0 * det.n_b));
  const double c_up = det.eta / (2.0 * std::sqrt(2.0 * v_full));
  std::vector<double> w_low(n), w_up(n);
  for (std::size_t i = 0; i < n; ++i) {
    w_low[i] = c_low * (total - 2.0 * amp2[i]);
    w_up[i] = c_up * (total - 2.0 * amp2[i]);
  }
  return {std::move(w_low), std::move(w_up)};
}

namespace detail {

/// Cached log binomial weights log C(n, i+1), i = 0..n-1.
inline const std::vector<double>& log_binom_weights(std::size_t n) {
  static std::map<std::size_t, std::vector<double>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> w(n);
  const double ln_np1 = std::lgamma(static_cast<double>(n) + 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double k = static_cast<double>(i + 1);
    w[i] = ln_np1 - std::lgamma(k + 1.0) -
           std::lgamma(static_cast<double>(n) - k + 1.0);
  }
  auto [pos, _] = cache.emplace(n, std::move(w));
  return pos->second;
}

/// ln{ sqrt(pi/2) sum_ij C(n,i) C(n,j) exp(((w_i - w_j)/2)^2) }, log domain.
/// The combinatorial weights attach to the descending rank of the omegas, so
/// the expression is a symmetric function of the omega multiset.
inline double double_sum_log(std::span<const double> omegas) {
  const std::size_t n = omegas.size();
  const auto& lb = log_binom_weights(n);
  std::vector<double> w(omegas.begin(), omegas.end());
  std::sort(w.begin(), w.end(), std::greater<double>());
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = 0.5 * (w[i] - w[j]);
      m = std::max(m, lb[i] + lb[j] + d * d);
    }
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = 0.5 * (w[i] - w[j]);
      s += std::exp(lb[i] + lb[j] + d * d - m);
    }
  return 0.5 * std::log(std::numbers::pi / 2.0) + m + std::log(s);
}

}  // namespace detail

/// Combinatorial bound core: the double-sum log expression plus the
/// calibration constant plus the closed-form tail term supplied by the
/// caller.
inline double f_bound(std::span<const double> omegas, double xi, double tail_term) {
  for (double w : omegas)
    if (!std::isfinite(w)) throw domain_error("f_bound: non-finite omega");
  return detail::double_sum_log(omegas) + xi + tail_term;
}

/// Tail terms of the two bounds. The printed forms divide these by the
/// Gaussian width, which breaks both the bound ordering and the gap
/// monotonicity at finite noise; the deflation algebra gives the plain
/// log-width terms used here.
inline double tail_term_low(std::size_t n_configs, double n_b) {
  if (!(n_b > 0.0)) throw domain_error("tail_term_low: n_b must be > 0");
  return -0.5 * static_cast<double>(n_configs) *
         std::log(2.0 * std::numbers::pi * n_b);
}
inline double tail_term_up(std::size_t n_configs, double eta, double sum_amp_sq,
                           double n_b) {
  const double v = eta * sum_amp_sq + n_b;
  if (!(v > 0.0)) throw domain_error("tail_term_up: width must be > 0");
  return -0.5 * static_cast<double>(n_configs) *
         std::log(2.0 * std::numbers::pi * v);
}

/// g(omega) by adaptive quadrature: integral of S ln S with
/// S(u) = sum_i exp(-(u + w_i)^2), over a window covering all omegas plus
/// ten unit widths.
inline double g_quadrature(std::span<const double> omegas, double tol = 1e-11) {
  double lo = 0.0, hi = 0.0;
  for (double w : omegas) {
    lo = std::min(lo, -w);
    hi = std::max(hi, -w);
  }
  lo -= 12.0;
  hi += 12.0;
  const std::vector<double> ws(omegas.begin(), omegas.end());
  auto integrand = [&ws](double u) {
    double s = 0.0;
    for (double w : ws) {
      const double z = u + w;
      s += std::exp(-z * z);
    }
    return s > 0.0 ? s * std::log(s) : 0.0;
  };
  // the integral grows like n ln n; keep the tolerance relative to that
  const double n = static_cast<double>(omegas.size());
  const double scale = std::max(1.0, n * (std::log(n + 1.0) + 1.0));
  return integrate(integrand, lo, hi, tol * scale);
}

/// Calibration constant: shifts the closed-form double sum so that it equals
/// the quadrature value of g at the probe point (default omega = 0).
/// Cached per configuration count.
inline std::pair<double, double> calibrate_xi(std::size_t n_configs,
                                              std::span<const double> probe = {}) {
  static std::map<std::size_t, double> cache;
  static std::mutex mu;
  if (probe.empty()) {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n_configs);
    if (it != cache.end()) return {it->second, it->second};
  }
  std::vector<double> omega_ref(probe.begin(), probe.end());
  if (omega_ref.empty()) omega_ref.assign(n_configs, 0.0);
  if (omega_ref.size() != n_configs)
    throw dimension_error("calibrate_xi: probe length mismatch");
  const double xi = g_quadrature(omega_ref) - detail::double_sum_log(omega_ref);
  if (probe.empty()) {
    std::lock_guard<std::mutex> lock(mu);
    cache[n_configs] = xi;
  }
  return {xi, xi};
}

/// Gaussian-approximation bounds and their midpoint approximation.
/// Throws for n_b = 0 (the bounds are derived in the large-noise regime).
inline RateBreakdown bounds_and_asymptotic(std::span<const double> amps_on,
                                           const DetectionConfig& det,
                                           bool with_exact = false,
                                           double tail_eps = 1e-12) {
  det.validate();
  detail::check_k_cap(amps_on.size());
  if (!(det.n_b > 0.0))
    throw domain_error("bounds_and_asymptotic: n_b must be > 0");
  const int K = static_cast<int>(amps_on.size());
  const std::size_t n = std::size_t{1} << K;

  RateBreakdown rb;
  auto [w_low, w_up] = omega_terms(amps_on, det);
  const auto [xi_l, xi_u] = calibrate_xi(n);
  rb.xi_low = xi_l;
  rb.xi_up = xi_u;

  const auto amps = enumerate_amplitudes(amps_on);
  double log_prod = 0.0;
  for (double a : amps) log_prod += std::log(det.eta * a * a + det.n_b);
  // phi(Phi) as printed, including the leading n_b factor
  const double phi_pot =
      -0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi) +
              std::log(det.n_b) + log_prod) -
      0.5 * static_cast<double>(n);

  double sum_amp = 0.0;
  for (double a : amps_on) sum_amp += a;
  const double f_low =
      f_bound(w_low, xi_l, tail_term_low(n, det.n_b));
  const double f_up =
      f_bound(w_up, xi_u, tail_term_up(n, det.eta, sum_amp * sum_amp, det.n_b));

  const double c = 1.0 / (static_cast<double>(n) * kLn2);
  rb.lower_ga = K + c * (phi_pot - f_low);
  rb.upper_ga = K + c * (phi_pot - f_up);
  rb.asymptotic = 0.5 * (rb.lower_ga + rb.upper_ga);
  rb.omega_low = std::move(w_low);
  rb.omega_up = std::move(w_up);
  if (rb.upper_ga < rb.lower_ga - 1e-9)
    throw numeric_error("bounds_and_asymptotic: bound ordering violated");
  if (with_exact) rb.exact = exact_sum_rate(amps_on, det, tail_eps);
  return rb;
}

/// The common large-noise limit of both bounds, K + [phi - f(0)]/(2^K ln 2),
/// with f(0) carrying the lower bound's tail term.
inline double asymptotic_limit_value(std::span<const double> amps_on,
                                     const DetectionConfig& det) {
  const std::size_t n = std::size_t{1} << amps_on.size();
  const auto amps = enumerate_amplitudes(amps_on);
  double log_prod = 0.0;
  for (double a : amps) log_prod += std::log(det.eta * a * a + det.n_b);
  const double phi_pot =
      -0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi) +
              std::log(det.n_b) + log_prod) -
      0.5 * static_cast<double>(n);
  const std::vector<double> zeros(n, 0.0);
  const auto [xi_l, xi_u] = calibrate_xi(n);
  const double f0 = f_bound(zeros, xi_l, tail_term_low(n, det.n_b));
  return amps_on.size() + (phi_pot - f0) / (static_cast<double>(n) * kLn2);
}

// ---------------------------------------------------------------------------
// Reference capacities
// ---------------------------------------------------------------------------

inline double binary_entropy_bits(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

/// Holevo information of the equiprobable binary coherent ensemble
/// {|alpha>, |-alpha>}: the eigenvalue entropy of the two-state mixture.
inline double holevo_binary(double alpha_sq) {
  if (alpha_sq < 0.0) throw domain_error("holevo_binary: negative photon number");
  const double overlap = std::exp(-2.0 * alpha_sq);
  return binary_entropy_bits(0.5 * (1.0 - overlap));
}

/// Holevo capacity of the coherent-state channel at mean photon number n:
/// g(n) = (n+1) log2(n+1) - n log2 n.
inline double holevo_gaussian(double n_photons) {
  if (n_photons < 0.0) throw domain_error("holevo_gaussian: negative photon number");
  if (n_photons == 0.0) return 0.0;
  return (n_photons + 1.0) * std::log2(n_photons + 1.0) -
         n_photons * std::log2(n_photons);
}

/// Conventional-measurement (SQL) capacity log2(1 + n) and the classical
/// Shannon-AWGN curve 0.5 log2(1 + P/noise) for a configured noise power.
inline std::pair<double, double> reference_capacities(double mean_photons,
                                                      double awgn_noise_power) {
  if (mean_photons < 0.0)
    throw domain_error("reference_capacities: negative power");
  const double sql = std::log2(1.0 + mean_photons);
  const double shannon =
      awgn_noise_power > 0.0
          ? 0.5 * std::log2(1.0 + mean_photons / awgn_noise_power)
          : 0.0;
  return {sql, shannon};
}

}  // namespace oqc
