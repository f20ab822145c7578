#pragma once
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "oqc/errors.hpp"
#include "oqc/poisson.hpp"
#include "oqc/rng.hpp"

namespace oqc {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// One BPSK symbol vector: entries are exactly -1 or +1, one per user.
struct SymbolConfig {
  std::vector<int> bits;

  /// Stable lexicographic index in [0, 2^K): user K-1 is the fastest bit,
  /// -1 before +1.
  static SymbolConfig from_index(std::uint64_t index, int K) {
    SymbolConfig c;
    c.bits.resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k)
      c.bits[static_cast<std::size_t>(k)] =
          (index >> (K - 1 - k)) & 1ULL ? +1 : -1;
    return c;
  }
};

/// Per-user received amplitude after the Kennedy displacement: X_k = +1 maps
/// to amplitude_on, X_k = -1 to the vacuum.
struct UserSignal {
  double amplitude_on = 0.0;
  static constexpr double amplitude_off = 0.0;
};

enum class ReceiverVariant { ideal_pnrd, finite_pnrd, on_off_kennedy };

/// Lossy-channel transmittance, background noise, and detector resolution.
struct DetectionConfig {
  double eta = 0.9;
  double n_b = 1.7;
  ReceiverVariant variant = ReceiverVariant::ideal_pnrd;
  std::int64_t n_max = 0;  ///< finite_pnrd only: largest resolvable count

  void validate() const {
    if (!(eta >= 0.0 && eta <= 1.0)) throw domain_error("eta must lie in [0,1]");
    if (!(n_b >= 0.0)) throw domain_error("n_b must be >= 0");
    if (variant == ReceiverVariant::finite_pnrd && n_max < 1)
      throw domain_error("finite_pnrd requires n_max >= 1");
  }
};

/// Free-space channel geometry for one user.
struct ChannelParams {
  double sigma_x = 0.3;  ///< turbulence intensity
  double d = 50.0;       ///< BS-user distance, m
  double d_t = 0.1;      ///< transmitter aperture diameter, m
  double d_r = 1.0;      ///< receiver aperture diameter, m
  double nu = 1550e-9;   ///< wavelength, m

  void validate() const {
    if (!(sigma_x > 0.0 && d > 0.0 && d_t > 0.0 && d_r > 0.0 && nu > 0.0))
      throw domain_error("channel parameters must be strictly positive");
  }
};

/// One fading draw, split into turbulence and path-loss factors.
struct ChannelRealization {
  double h_t = 1.0;
  double h_l = 1.0;
  double h = 1.0;  ///< h_t * h_l
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Amplitude of the superposed received state for one symbol configuration:
/// the sum of amplitude_on over users sending +1.
inline double superposed_amplitude(const SymbolConfig& config,
                                   std::span<const UserSignal> signals) {
  if (config.bits.size() != signals.size())
    throw dimension_error("superposed_amplitude: K mismatch");
  double a = 0.0;
  for (std::size_t k = 0; k < signals.size(); ++k) {
    if (signals[k].amplitude_on < 0.0)
      throw domain_error("superposed_amplitude: negative amplitude");
    if (config.bits[k] == 1) a += signals[k].amplitude_on;
  }
  return a;
}

/// All 2^K superposed amplitudes in stable lexicographic config order.
inline std::vector<double> enumerate_amplitudes(std::span<const double> amps_on) {
  const int K = static_cast<int>(amps_on.size());
  if (K > 30) throw capacity_error("enumerate_amplitudes: K too large");
  std::vector<double> out(std::size_t{1} << K, 0.0);
  for (std::uint64_t i = 1; i < out.size(); ++i) {
    // peel lowest set bit; bit b set means user (K-1-b) sends +1
    const std::uint64_t low = i & (i - 1);
    const int b = std::countr_zero(i);
    out[i] = out[low] + amps_on[static_cast<std::size_t>(K - 1 - b)];
  }
  return out;
}

/// Detection rate lambda = eta * |Phi|^2 + n_b for a given mean signal
/// photon number.
inline double detection_rate(double mean_signal_photons, const DetectionConfig& det) {
  if (mean_signal_photons < 0.0 || !std::isfinite(mean_signal_photons))
    throw domain_error("detection_rate: |Phi|^2 must be finite and >= 0");
  return det.eta * mean_signal_photons + det.n_b;
}

/// Conditional pmf of detecting outcome y.
///
/// ideal_pnrd: Poisson(lambda) at y. finite_pnrd: Poisson for y < N_max with
/// all remaining mass aggregated at y = N_max. on_off_kennedy: y = 0 is
/// "no click" (e^-lambda), y = 1 is "click".
inline double detection_pmf(double mean_signal_photons, const DetectionConfig& det,
                            std::int64_t y) {
  det.validate();
  if (y < 0) throw domain_error("detection_pmf: negative outcome");
  const double lambda = detection_rate(mean_signal_photons, det);
  switch (det.variant) {
    case ReceiverVariant::ideal_pnrd:
      return poisson_pmf(y, lambda);
    case ReceiverVariant::finite_pnrd:
      if (y > det.n_max) return 0.0;
      if (y < det.n_max) return poisson_pmf(y, lambda);
      return poisson_survival(det.n_max, lambda);
    case ReceiverVariant::on_off_kennedy:
      if (y > 1) return 0.0;
      return y == 0 ? std::exp(-lambda) : -std::expm1(-lambda);
  }
  return 0.0;
}

/// Number of distinct outcomes after truncation at tail_eps (ideal) or by
/// the variant's own finite support.
inline std::int64_t outcome_count(double max_lambda, const DetectionConfig& det,
                                  double tail_eps) {
  switch (det.variant) {
    case ReceiverVariant::ideal_pnrd:
      return truncation_bound(max_lambda, tail_eps) + 1;
    case ReceiverVariant::finite_pnrd:
      return det.n_max + 1;
    case ReceiverVariant::on_off_kennedy:
      return 2;
  }
  return 0;
}

/// Path loss h_l = (pi D_T D_R / (2 nu))^2 / d^2, reported as written even
/// when it exceeds 1 (the caller flags that in the run manifest).
inline double path_loss(const ChannelParams& p) {
  p.validate();
  const double g = std::numbers::pi * p.d_t * p.d_r / (2.0 * p.nu);
  return (g / p.d) * (g / p.d);
}

/// Log-normal turbulence transmissivity with E[h_t] = 1:
/// ln h_t ~ Normal(-sigma_x^2/2, sigma_x^2).
inline double sample_turbulence(const ChannelParams& p, RngStream& rng) {
  p.validate();
  const double s2 = p.sigma_x * p.sigma_x;
  return std::exp(-0.5 * s2 + p.sigma_x * rng.next_normal());
}

inline ChannelRealization sample_channel(const ChannelParams& p, RngStream& rng) {
  ChannelRealization c;
  c.h_t = sample_turbulence(p, rng);
  c.h_l = path_loss(p);
  c.h = c.h_t * c.h_l;
  return c;
}

}  // namespace oqc
