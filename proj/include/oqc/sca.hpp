#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "oqc/coherent.hpp"
#include "oqc/errors.hpp"
#include "oqc/rates.hpp"

namespace oqc {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Receive-side power caps: aggregate at the BS and per user.
struct PowerConstraints {
  double max_bs_power = 120.0;          ///< |phi_max,BS|^2, photons
  std::vector<double> max_user_power;   ///< |phi_max,k|^2, photons

  void validate() const {
    if (!(max_bs_power > 0.0))
      throw infeasible_error("max_bs_power must be > 0");
    for (double p : max_user_power)
      if (!(p > 0.0)) throw infeasible_error("max_user_power entries must be > 0");
  }
};

/// Per-user received powers |phi_k|^2 with derived amplitudes.
struct PowerAllocation {
  std::vector<double> powers;

  std::vector<double> amplitudes() const {
    std::vector<double> a(powers.size());
    for (std::size_t k = 0; k < powers.size(); ++k) a[k] = std::sqrt(powers[k]);
    return a;
  }
  static PowerAllocation from_amplitudes(std::span<const double> amps) {
    PowerAllocation p;
    p.powers.resize(amps.size());
    for (std::size_t k = 0; k < amps.size(); ++k)
      p.powers[k] = amps[k] * amps[k];
    return p;
  }
  double total_amplitude() const {
    double s = 0.0;
    for (double p : powers) s += std::sqrt(p);
    return s;
  }
  bool feasible(const PowerConstraints& c, double tol = 1e-9) const {
    const double s = total_amplitude();
    if (s * s > c.max_bs_power + tol) return false;
    for (std::size_t k = 0; k < powers.size(); ++k)
      if (powers[k] > c.max_user_power[k] + tol) return false;
    return true;
  }
};

/// SCA anchors: mu in log domain ((2pi)^n overflows otherwise) and the
/// upsilon width, both refreshed from the previous iterate.
struct SurrogateState {
  std::vector<double> anchor_amps;  ///< phi^(t-1)
  double log_mu_anchor = 0.0;       ///< ln mu^(t-1)
  double upsilon_anchor = 0.0;      ///< 2 pi (eta |sum phi|^2 + n_b)
  int t = 0;
};

struct SolverConfig {
  int t_max = 100;
  double eps_sca = 1e-4;        ///< bits, SCA stopping gain
  double subproblem_tol = 1e-8; ///< projected-gradient norm target
  double barrier_initial = 1e-2;
  double barrier_shrink = 0.1;
  int newton_max = 60;

  void validate() const {
    if (t_max < 1) throw domain_error("t_max must be >= 1");
    if (!(eps_sca > 0.0 && eps_sca < 1.0))
      throw domain_error("eps_sca must lie in (0,1)");
    if (!(subproblem_tol > 0.0)) throw domain_error("subproblem_tol must be > 0");
  }
};

struct SolveDiagnostics {
  bool converged = false;
  int iterations = 0;
  double kkt_residual = 0.0;
  bool bs_cap_active = false;
  std::vector<bool> user_cap_active;
  bool epigraph_constraints_active = true;  ///< 35b/35c hold with equality
};

// ---------------------------------------------------------------------------
// Surrogate pieces (per-iteration Taylor anchors)
// ---------------------------------------------------------------------------

/// Tangent of phi(mu) = -ln(mu)/2 - 2^{K-1} at mu_prev, in log domain:
/// arguments are ln(mu) and ln(mu_prev). half_count = 2^{K-1} (or S/2 for the
/// sampled variant).
inline double surrogate_phi_log(double log_mu, double log_mu_prev,
                                double half_count) {
  if (!std::isfinite(log_mu) || !std::isfinite(log_mu_prev))
    throw domain_error("surrogate_phi: anchors must be positive and finite");
  const double d = log_mu - log_mu_prev;
  const double ratio_m1 = d > 700.0 ? std::numeric_limits<double>::infinity()
                                    : std::expm1(d);
  return -0.5 * log_mu_prev - half_count - 0.5 * ratio_m1;
}

/// Convenience overload on plain mu values (small problems only).
inline double surrogate_phi(double mu, double mu_prev, double half_count) {
  if (!(mu > 0.0) || !(mu_prev > 0.0))
    throw domain_error("surrogate_phi: anchors must be positive");
  return surrogate_phi_log(std::log(mu), std::log(mu_prev), half_count);
}

/// Width-substitution tail h(upsilon) = -2^{K-1} ln(upsilon). This is the
/// upper bound's tail term expressed in upsilon = 2 pi (eta|sum phi|^2+n_b);
/// the printed sqrt-width form is inconsistent with the deflation algebra
/// (see f_bound tails).
inline double h_of_upsilon(double upsilon, double half_count) {
  if (!(upsilon > 0.0)) throw domain_error("h_of_upsilon: upsilon must be > 0");
  return -half_count * std::log(upsilon);
}

/// First-order Taylor expansion of h at upsilon_prev. h is convex, so the
/// tangent minorizes it: h(upsilon) >= surrogate_h everywhere.
inline double surrogate_h(double upsilon, double upsilon_prev, int K) {
  if (!(upsilon_prev > 0.0) || !(upsilon > 0.0))
    throw domain_error("surrogate_h: anchors must be positive");
  const double half_count = std::pow(2.0, K - 1);
  const double slope = -half_count / upsilon_prev;
  return -half_count * std::log(upsilon_prev) + slope * (upsilon - upsilon_prev);
}

// ---------------------------------------------------------------------------
// Objective model (shared by the full-enumeration and sampled paths)
// ---------------------------------------------------------------------------

namespace detail {

struct DsResult {
  double value = 0.0;             ///< double-sum log expression (no xi/tail)
  std::vector<double> dvec;       ///< d(value)/d(omega_i)
  double sum_d_omega = 0.0;       ///< sum_i dvec_i * omega_i
};

/// Fused value + gradient of the double-sum log expression. The binomial
/// weights attach to the descending rank of the omegas (the expression is a
/// symmetric function of the omega multiset), so the gradient is scattered
/// back through the sort permutation.
inline void double_sum_eval(std::span<const double> w_in,
                            std::span<const double> lb, DsResult& out) {
  const std::size_t n = w_in.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return w_in[a] > w_in[b];
  });
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = w_in[order[i]];

  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double d = 0.5 * (w[i] - w[j]);
      m = std::max(m, lb[i] + lb[j] + d * d);
    }
  std::vector<double> dsorted(n, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = 0.5 * (w[i] - w[j]);
      const double p = std::exp(lb[i] + lb[j] + d * d - m);
      z += p;
      dsorted[i] += p * (w[i] - w[j]);
    }
  }
  out.value = 0.5 * std::log(std::numbers::pi / 2.0) + m + std::log(z);
  out.dvec.assign(n, 0.0);
  out.sum_d_omega = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dsorted[i] /= z;
    out.dvec[order[i]] = dsorted[i];
    out.sum_d_omega += dsorted[i] * w[i];
  }
}

}  // namespace detail

/// Asymptotic-sum-rate objective over a configuration list, usable both for
/// the full 2^K enumeration and for a weighted sample of configurations.
/// Amplitudes are the optimization variables; everything else is fixed.
class GaObjective {
public:
  /// Full-enumeration model over all 2^K configurations.
  static GaObjective full(int K, const DetectionConfig& det) {
    detail::check_k_cap(static_cast<std::size_t>(K));
    GaObjective m;
    m.init(K, det);
    const std::size_t n = std::size_t{1} << K;
    m.masks_.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      m.masks_[i] = static_cast<std::uint32_t>(i);
    m.scale_.assign(n, 1.0);
    m.finish();
    return m;
  }

  /// Sampled model over selected configurations with importance scales
  /// (mean-one weights applied to the superposed amplitudes).
  static GaObjective sampled(int K, const DetectionConfig& det,
                             std::span<const std::uint32_t> masks,
                             std::span<const double> scales) {
    if (masks.size() != scales.size())
      throw dimension_error("GaObjective::sampled: size mismatch");
    GaObjective m;
    m.init(K, det);
    m.masks_.assign(masks.begin(), masks.end());
    m.scale_.assign(scales.begin(), scales.end());
    m.finish();
    return m;
  }

  int users() const { return K_; }
  std::size_t configs() const { return masks_.size(); }
  const DetectionConfig& detection() const { return det_; }

  /// True asymptotic objective (bits). Gradient w.r.t. amplitudes optional.
  double value(std::span<const double> x, std::vector<double>* grad = nullptr) const {
    return eval(x, nullptr, grad);
  }

  /// Surrogate objective anchored at state (bits): tangent of phi(mu) in log
  /// domain plus the width tail evaluated on the linearized |sum phi|^2.
  /// Minorizes value() with equality and matching gradient at the anchor.
  double surrogate(std::span<const double> x, const SurrogateState& state,
                   std::vector<double>* grad = nullptr) const {
    return eval(x, &state, grad);
  }

  SurrogateState make_state(std::span<const double> anchor, int t) const {
    SurrogateState s;
    s.anchor_amps.assign(anchor.begin(), anchor.end());
    s.log_mu_anchor = log_mu(anchor);
    double sum = 0.0;
    for (double a : anchor) sum += a;
    s.upsilon_anchor =
        2.0 * std::numbers::pi * (det_.eta * sum * sum + det_.n_b);
    s.t = t;
    return s;
  }

  /// ln mu = n ln(2 pi) + ln n_b + sum_i ln(eta |Phi_i|^2 + n_b).
  double log_mu(std::span<const double> x) const {
    const std::size_t n = masks_.size();
    double s = static_cast<double>(n) * std::log(2.0 * std::numbers::pi) +
               std::log(det_.n_b);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = scale_[i] * config_amplitude(i, x);
      s += std::log(det_.eta * a * a + det_.n_b);
    }
    return s;
  }

private:
  void init(int K, const DetectionConfig& det) {
    det.validate();
    if (!(det.n_b > 0.0))
      throw domain_error("GaObjective: n_b must be > 0 for the bounds");
    K_ = K;
    det_ = det;
    report_scale_ = 1.0 / (std::pow(2.0, K) * kLn2);
  }
  void finish() {
    const std::size_t n = masks_.size();
    lb_ = detail::log_binom_weights(n);
    xi_ = calibrate_xi(n).first;
    half_count_ = 0.5 * static_cast<double>(n);
  }

  double config_amplitude(std::size_t i, std::span<const double> x) const {
    double a = 0.0;
    std::uint32_t m = masks_[i];
    while (m) {
      const int b = std::countr_zero(m);
      a += x[static_cast<std::size_t>(K_ - 1 - b)];
      m &= m - 1;
    }
    return a;
  }

  double eval(std::span<const double> x, const SurrogateState* state,
              std::vector<double>* grad) const {
    const std::size_t n = masks_.size();
    const double eta = det_.eta;
    const double nb = det_.n_b;

    std::vector<double> a(n), amp2(n), lam(n);
    double total2 = 0.0, sum_x = 0.0, log_prod = 0.0;
    for (double v : x) sum_x += v;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = config_amplitude(i, x);
      const double sa = scale_[i] * a[i];
      amp2[i] = sa * sa;
      lam[i] = eta * amp2[i] + nb;
      total2 += amp2[i];
      log_prod += std::log(lam[i]);
    }
    const double lmu = static_cast<double>(n) * std::log(2.0 * std::numbers::pi) +
                       std::log(nb) + log_prod;

    // potential term
    double phi_pot, dphi_dlmu;
    if (state) {
      const double d = lmu - state->log_mu_anchor;
      if (d > 690.0) return -std::numeric_limits<double>::infinity();
      phi_pot = -0.5 * state->log_mu_anchor - half_count_ - 0.5 * std::expm1(d);
      dphi_dlmu = -0.5 * std::exp(d);
    } else {
      phi_pot = -0.5 * lmu - half_count_;
      dphi_dlmu = -0.5;
    }

    // omega vectors
    const double v_full = eta * sum_x * sum_x + nb;
    const double c_low = eta / (2.0 * std::sqrt(2.0 * nb));
    const double c_up = eta / (2.0 * std::sqrt(2.0 * v_full));
    std::vector<double> w_low(n), w_up(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = total2 - 2.0 * amp2[i];
      w_low[i] = c_low * t;
      w_up[i] = c_up * t;
    }
    detail::DsResult ds_low, ds_up;
    detail::double_sum_eval(w_low, lb_, ds_low);
    detail::double_sum_eval(w_up, lb_, ds_up);

    // tails
    const double tail_low = -half_count_ * std::log(2.0 * std::numbers::pi * nb);
    double tail_up, dtail_dsum = 0.0;
    if (state) {
      const double s_anchor = std::accumulate(state->anchor_amps.begin(),
                                              state->anchor_amps.end(), 0.0);
      const double v_lin =
          s_anchor * s_anchor + 2.0 * s_anchor * (sum_x - s_anchor);
      const double width = eta * v_lin + nb;
      if (!(width > 0.0)) return -std::numeric_limits<double>::infinity();
      tail_up = -half_count_ * std::log(2.0 * std::numbers::pi * width);
      dtail_dsum = -half_count_ * eta * 2.0 * s_anchor / width;
    } else {
      tail_up = -half_count_ * std::log(2.0 * std::numbers::pi * v_full);
      dtail_dsum = -half_count_ * eta * 2.0 * sum_x / v_full;
    }

    const double f_low = ds_low.value + xi_ + tail_low;
    const double f_up = ds_up.value + xi_ + tail_up;
    const double obj =
        K_ + report_scale_ * (phi_pot - 0.5 * (f_low + f_up));

    if (grad) {
      grad->assign(x.size(), 0.0);
      // per-config coefficient d(obj)/d(amp2_i)
      // phi term: dphi_dlmu * eta/lam_i
      // ds terms: -(1/2)*(-2 c D_i) = + c D_i   for each of low/up
      std::vector<double> coeff(n);
      for (std::size_t i = 0; i < n; ++i) {
        coeff[i] = dphi_dlmu * eta / lam[i] +
                   0.5 * (2.0 * c_low * ds_low.dvec[i]) +
                   0.5 * (2.0 * c_up * ds_up.dvec[i]);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double gi = coeff[i] * 2.0 * scale_[i] * scale_[i] * a[i];
        std::uint32_t m = masks_[i];
        while (m) {
          const int b = std::countr_zero(m);
          (*grad)[static_cast<std::size_t>(K_ - 1 - b)] += gi;
          m &= m - 1;
        }
      }
      // |sum phi|^2 channel: the up tail and omega_up's width factor
      const double g_tail = -0.5 * dtail_dsum;
      // d(ds_up)/d(V) = -eta/(2 v_full) * sum_i D_i omega_i; dV/d(sum) = 2 sum
      const double dds_dv = -0.5 * eta / v_full * ds_up.sum_d_omega;
      const double g_omega = -0.5 * dds_dv * 2.0 * sum_x;
      const double g_sum = g_tail + g_omega;
      for (std::size_t k = 0; k < x.size(); ++k)
        (*grad)[k] = report_scale_ * ((*grad)[k] + g_sum);
    }
    return obj;
  }

  int K_ = 1;
  DetectionConfig det_;
  std::vector<std::uint32_t> masks_;
  std::vector<double> scale_;
  std::vector<double> lb_;
  double xi_ = 0.0;
  double half_count_ = 1.0;
  double report_scale_ = 1.0;
};

// ---------------------------------------------------------------------------
// Subproblem solver: log-barrier damped Newton in amplitude space
// ---------------------------------------------------------------------------

namespace detail {

using ObjectiveFn =
    std::function<double(std::span<const double>, std::vector<double>*)>;

inline void pull_strictly_feasible(std::vector<double>& x,
                                   const PowerConstraints& c) {
  const double s_max = std::sqrt(c.max_bs_power);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double ub = std::sqrt(c.max_user_power[k]);
    x[k] = std::clamp(x[k], 1e-8 * (ub + 1.0), ub * (1.0 - 1e-9));
  }
  double s = std::accumulate(x.begin(), x.end(), 0.0);
  if (s >= s_max) {
    const double f = s_max * (1.0 - 1e-9) / s;
    for (double& v : x) v *= f;
  }
}

/// Cholesky solve of (H + ridge I) d = b for a small dense symmetric H.
inline bool solve_spd(std::vector<double> h, std::span<const double> b,
                      std::vector<double>& d, double ridge) {
  const std::size_t n = b.size();
  for (std::size_t i = 0; i < n; ++i) h[i * n + i] += ridge;
  // in-place Cholesky
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = h[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= h[i * n + k] * h[j * n + k];
      if (i == j) {
        if (s <= 0.0) return false;
        h[i * n + i] = std::sqrt(s);
      } else {
        h[i * n + j] = s / h[j * n + j];
      }
    }
  }
  d.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= h[i * n + k] * d[k];
    d[i] = s / h[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = d[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= h[k * n + i] * d[k];
    d[i] = s / h[i * n + i];
  }
  return true;
}

/// Projected-gradient KKT residual for maximization over the box plus the
/// aggregate amplitude cap.
inline double kkt_residual(std::span<const double> x, std::span<const double> grad,
                           const PowerConstraints& c, double act_tol = 1e-7) {
  const std::size_t n = x.size();
  const double s_max = std::sqrt(c.max_bs_power);
  const double s = std::accumulate(x.begin(), x.end(), 0.0);
  const bool bs_active = s >= s_max * (1.0 - act_tol) - act_tol;

  auto residual_for_theta = [&](double theta) {
    double r = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double ub = std::sqrt(c.max_user_power[k]);
      const double g = grad[k] - theta;
      double v;
      if (x[k] <= act_tol * (1.0 + ub))
        v = std::max(g, 0.0);  // at lower bound: ascent only if g > 0
      else if (x[k] >= ub * (1.0 - act_tol))
        v = std::max(-g, 0.0);  // at upper bound: ascent only if g < 0
      else
        v = std::abs(g);
      r = std::max(r, v);
    }
    return r;
  };
  if (!bs_active) return residual_for_theta(0.0);
  // theta >= 0 is the multiplier of the aggregate cap; pick the best
  double lo = 0.0, hi = 0.0;
  for (std::size_t k = 0; k < n; ++k) hi = std::max(hi, std::abs(grad[k]));
  double best = residual_for_theta(0.0);
  for (int it = 0; it < 80; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    const double r1 = residual_for_theta(m1);
    const double r2 = residual_for_theta(m2);
    best = std::min({best, r1, r2});
    if (r1 < r2) hi = m2; else lo = m1;
  }
  return best;
}

/// Maximize f over {x >= 0, x_k <= sqrt(cap_k), sum x <= sqrt(cap_bs)} with a
/// log-barrier continuation and damped Newton steps (finite-difference
/// Hessian of the analytic gradient).
inline std::vector<double> barrier_maximize(const ObjectiveFn& f,
                                            std::vector<double> x,
                                            const PowerConstraints& c,
                                            const SolverConfig& cfg,
                                            SolveDiagnostics* diag = nullptr) {
  c.validate();
  const std::size_t n = x.size();
  const double s_max = std::sqrt(c.max_bs_power);
  std::vector<double> ub(n);
  for (std::size_t k = 0; k < n; ++k) ub[k] = std::sqrt(c.max_user_power[k]);
  pull_strictly_feasible(x, c);

  auto barrier_value = [&](std::span<const double> xx,
                           double tau, std::vector<double>* grad) -> double {
    double s = std::accumulate(xx.begin(), xx.end(), 0.0);
    const double slack_bs = s_max - s;
    if (slack_bs <= 0.0) return -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k)
      if (xx[k] <= 0.0 || xx[k] >= ub[k])
        return -std::numeric_limits<double>::infinity();
    double v = f(xx, grad);
    if (!std::isfinite(v)) return -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      v += tau * (std::log(xx[k]) + std::log(ub[k] - xx[k]));
      if (grad) (*grad)[k] += tau * (1.0 / xx[k] - 1.0 / (ub[k] - xx[k]));
    }
    v += tau * std::log(slack_bs);
    if (grad)
      for (std::size_t k = 0; k < n; ++k) (*grad)[k] -= tau / slack_bs;
    return v;
  };

  const double tau_min =
      std::max(cfg.subproblem_tol / (10.0 * (2.0 * n + 1.0)), 1e-14);
  std::vector<double> g(n), gp(n), d(n), hess(n * n), xt(n);
  for (double tau = cfg.barrier_initial; tau >= tau_min;
       tau *= cfg.barrier_shrink) {
    for (int it = 0; it < cfg.newton_max; ++it) {
      const double fv = barrier_value(x, tau, &g);
      double gnorm = 0.0;
      for (double v : g) gnorm = std::max(gnorm, std::abs(v));
      if (gnorm <= std::max(tau, 0.05 * cfg.subproblem_tol)) break;

      // FD Hessian of the barrier gradient
      const double hstep = 1e-6;
      for (std::size_t k = 0; k < n; ++k) {
        xt = x;
        const double dx = hstep * (1.0 + std::abs(x[k]));
        xt[k] += dx;
        if (barrier_value(xt, tau, &gp) ==
            -std::numeric_limits<double>::infinity()) {
          xt[k] = x[k] - dx;
          barrier_value(xt, tau, &gp);
          for (std::size_t j = 0; j < n; ++j)
            hess[k * n + j] = (g[j] - gp[j]) / dx;
        } else {
          for (std::size_t j = 0; j < n; ++j)
            hess[k * n + j] = (gp[j] - g[j]) / dx;
        }
      }
      // symmetrize and negate (maximization -> solve -H d = g)
      std::vector<double> hs(n * n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          hs[i * n + j] = -0.5 * (hess[i * n + j] + hess[j * n + i]);
      // Newton ascent direction: d = (-Hess F)^{-1} grad F, ridged until SPD
      double ridge = 1e-12;
      while (!solve_spd(hs, std::span<const double>(g).subspan(0, n), d, ridge) &&
             ridge < 1e6)
        ridge *= 100.0;
      double alpha = 1.0;
      // fraction to the boundary
      {
        double s = std::accumulate(x.begin(), x.end(), 0.0);
        double ds = std::accumulate(d.begin(), d.end(), 0.0);
        if (ds > 0.0 && s + ds > s_max)
          alpha = std::min(alpha, 0.99 * (s_max - s) / ds);
        for (std::size_t k = 0; k < n; ++k) {
          if (d[k] < 0.0) alpha = std::min(alpha, -0.99 * x[k] / d[k]);
          if (d[k] > 0.0) alpha = std::min(alpha, 0.99 * (ub[k] - x[k]) / d[k]);
        }
      }
      double gd = 0.0;
      for (std::size_t k = 0; k < n; ++k) gd += g[k] * d[k];
      if (gd <= 0.0) {  // not an ascent direction; fall back to gradient
        d = g;
        gd = 0.0;
        for (double v : g) gd += v * v;
        double dn = std::sqrt(gd);
        if (dn > 0) for (double& v : d) v /= dn;
        gd = dn;
        alpha = std::min(alpha, 1.0);
      }
      bool improved = false;
      for (int ls = 0; ls < 50; ++ls) {
        xt = x;
        for (std::size_t k = 0; k < n; ++k) xt[k] += alpha * d[k];
        const double ft = barrier_value(xt, tau, nullptr);
        if (ft > fv + 1e-4 * alpha * gd) {
          x = xt;
          improved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!improved) break;
    }
  }

  if (diag) {
    std::vector<double> grad(n);
    f(x, &grad);
    diag->kkt_residual = kkt_residual(x, grad, c);
    diag->converged = diag->kkt_residual <= cfg.subproblem_tol * 10.0;
    const double s = std::accumulate(x.begin(), x.end(), 0.0);
    diag->bs_cap_active = s >= s_max * (1.0 - 1e-6);
    diag->user_cap_active.assign(n, false);
    for (std::size_t k = 0; k < n; ++k)
      diag->user_cap_active[k] = x[k] >= ub[k] * (1.0 - 1e-6);
  }
  return x;
}

}  // namespace detail

/// One convexified subproblem: maximize the anchored surrogate from a
/// feasible warm start. The returned point never scores below the warm
/// start on the surrogate.
inline PowerAllocation solve_subproblem_p2(const GaObjective& model,
                                           const SurrogateState& state,
                                           const PowerConstraints& constraints,
                                           const SolverConfig& cfg,
                                           const PowerAllocation& warm_start,
                                           SolveDiagnostics* diag = nullptr) {
  cfg.validate();
  constraints.validate();
  if (warm_start.powers.size() != constraints.max_user_power.size())
    throw dimension_error("solve_subproblem_p2: K mismatch");
  auto fn = [&](std::span<const double> x, std::vector<double>* g) {
    return model.surrogate(x, state, g);
  };
  auto x0 = warm_start.amplitudes();
  auto x = detail::barrier_maximize(fn, x0, constraints, cfg, diag);
  // ascent contract on the surrogate
  const double f0 = model.surrogate(x0, state);
  if (model.surrogate(x, state) < f0) {
    x = x0;
    if (diag) diag->converged = true;
  }
  return PowerAllocation::from_amplitudes(x);
}

// ---------------------------------------------------------------------------
// Algorithm 1: successive convex approximation loop
// ---------------------------------------------------------------------------

struct AllocationResult {
  PowerAllocation allocation;
  std::vector<double> trace;  ///< true asymptotic objective per iteration
  SolveDiagnostics diagnostics;
};

namespace detail {

/// Monotone MM acceleration: extend the surrogate step along its direction
/// as long as the true objective keeps improving. The tangent surrogates are
/// conservative far from the anchor, so plain MM can crawl; extrapolation
/// keeps the ascent guarantee while restoring geometric progress.
template <typename ValueFn>
inline void mm_extrapolate(const ValueFn& value, const PowerConstraints& c,
                           std::span<const double> anchor,
                           std::vector<double>& x, double& fx) {
  const std::size_t n = x.size();
  std::vector<double> cand(n);
  double factor = 2.0;
  for (int round = 0; round < 8; ++round, factor *= 2.0) {
    for (std::size_t k = 0; k < n; ++k)
      cand[k] = anchor[k] + factor * (x[k] - anchor[k]);
    pull_strictly_feasible(cand, c);
    const double fc = value(cand);
    if (!(fc > fx)) break;
    x = cand;
    fx = fc;
  }
}

}  // namespace detail

/// ENP-style strictly interior start: equal powers at 0.9 of the largest
/// feasible common value.
inline PowerAllocation sca_initial_point(const PowerConstraints& c) {
  const std::size_t K = c.max_user_power.size();
  double p = c.max_bs_power / static_cast<double>(K * K);
  for (double cap : c.max_user_power) p = std::min(p, cap);
  PowerAllocation a;
  a.powers.assign(K, 0.9 * p);
  return a;
}

inline AllocationResult allocate_sca_model(const GaObjective& model,
                                           const PowerConstraints& constraints,
                                           const SolverConfig& cfg,
                                           const PowerAllocation* start = nullptr) {
  cfg.validate();
  constraints.validate();
  AllocationResult res;
  PowerAllocation x = start ? *start : sca_initial_point(constraints);
  auto amps = x.amplitudes();
  detail::pull_strictly_feasible(amps, constraints);
  x = PowerAllocation::from_amplitudes(amps);

  double current = model.value(x.amplitudes());
  res.trace.push_back(current);
  int stalls = 0;
  for (int t = 1; t <= cfg.t_max; ++t) {
    const auto state = model.make_state(x.amplitudes(), t);
    SolveDiagnostics diag;
    PowerAllocation next =
        solve_subproblem_p2(model, state, constraints, cfg, x, &diag);
    double f_next = model.value(next.amplitudes());
    if (f_next < current) {
      next = x;  // reject non-ascent step; surrogate minorization makes this
      f_next = current;  // a termination signal rather than an expected path
    } else {
      auto amps = next.amplitudes();
      detail::mm_extrapolate(
          [&](std::span<const double> xx) { return model.value(xx); },
          constraints, state.anchor_amps, amps, f_next);
      next = PowerAllocation::from_amplitudes(amps);
    }
    const double gain = f_next - current;
    x = next;
    current = f_next;
    res.trace.push_back(current);
    res.diagnostics = diag;

    // stationarity of the true objective at the new anchor (its gradient
    // matches the surrogate's there)
    std::vector<double> grad;
    model.value(x.amplitudes(), &grad);
    res.diagnostics.kkt_residual =
        detail::kkt_residual(x.amplitudes(), grad, constraints);
    stalls = gain <= 1e-15 ? stalls + 1 : 0;
    if (gain <= cfg.eps_sca &&
        (res.diagnostics.kkt_residual <= cfg.subproblem_tol || stalls >= 3))
      break;
  }
  res.diagnostics.converged =
      res.diagnostics.kkt_residual <= 100.0 * cfg.subproblem_tol;
  res.allocation = std::move(x);
  return res;
}

/// Coherent-state power allocation: maximizes the asymptotic sum-rate under
/// the aggregate and per-user receive caps. Users are processed in
/// descending channel-gain order (ties by index).
inline AllocationResult allocate_sca(const DetectionConfig& det,
                                     const PowerConstraints& constraints,
                                     std::span<const double> channel_gains,
                                     const SolverConfig& cfg) {
  const std::size_t K = constraints.max_user_power.size();
  if (channel_gains.size() != K)
    throw dimension_error("allocate_sca: channel gain count mismatch");
  // descending-gain processing order; the objective itself is symmetric in
  // the received amplitudes, so this fixes determinism only
  std::vector<std::size_t> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return channel_gains[a] > channel_gains[b];
  });
  PowerConstraints sorted_c;
  sorted_c.max_bs_power = constraints.max_bs_power;
  sorted_c.max_user_power.resize(K);
  for (std::size_t i = 0; i < K; ++i)
    sorted_c.max_user_power[i] = constraints.max_user_power[order[i]];

  const auto model = GaObjective::full(static_cast<int>(K), det);
  AllocationResult res = allocate_sca_model(model, sorted_c, cfg);
  PowerAllocation unsorted;
  unsorted.powers.assign(K, 0.0);
  for (std::size_t i = 0; i < K; ++i)
    unsorted.powers[order[i]] = res.allocation.powers[i];
  res.allocation = std::move(unsorted);
  return res;
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

/// Orthogonal multiple access: channel-gain-proportional power split; the
/// rate is the mean of exact single-user rates (each user holds 1/K of the
/// resource).
inline std::pair<PowerAllocation, double> baseline_oma(
    std::span<const double> channel_gains, const PowerConstraints& constraints,
    const DetectionConfig& det, double tail_eps = 1e-12) {
  constraints.validate();
  const std::size_t K = channel_gains.size();
  double hsum = 0.0;
  for (double h : channel_gains) hsum += h;
  if (!(hsum > 0.0)) throw domain_error("baseline_oma: channel gains must be > 0");
  PowerAllocation alloc;
  alloc.powers.resize(K);
  for (std::size_t k = 0; k < K; ++k)
    alloc.powers[k] = constraints.max_bs_power * channel_gains[k] / hsum;
  double bits = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double amp[1] = {std::sqrt(alloc.powers[k])};
    bits += exact_sum_rate(amp, det, tail_eps) / static_cast<double>(K);
  }
  return {std::move(alloc), bits};
}

/// Equal average photon number per user, scaled to the largest feasible
/// common value under both cap families.
inline PowerAllocation baseline_enp(const PowerConstraints& constraints) {
  constraints.validate();
  const std::size_t K = constraints.max_user_power.size();
  double p = constraints.max_bs_power / static_cast<double>(K * K);
  for (double cap : constraints.max_user_power) p = std::min(p, cap);
  PowerAllocation a;
  a.powers.assign(K, p);
  return a;
}

/// Interference assimilation: each user's rate is the single-user asymptotic
/// rate with the other users' mean photon contributions folded into the
/// background noise. Allocation by the same SCA machinery on this degraded
/// objective (interference frozen at the anchor each iteration).
inline std::pair<AllocationResult, double> baseline_ia(
    const DetectionConfig& det, const PowerConstraints& constraints,
    const SolverConfig& cfg) {
  constraints.validate();
  cfg.validate();
  const std::size_t K = constraints.max_user_power.size();

  auto objective_at = [&](std::span<const double> x,
                          std::span<const double> anchor) {
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      DetectionConfig dk = det;
      double interf = 0.0;
      for (std::size_t j = 0; j < K; ++j)
        if (j != k) interf += 0.5 * anchor[j] * anchor[j];
      dk.n_b = det.n_b + det.eta * interf;
      const double amp[1] = {x[k]};
      total += bounds_and_asymptotic(amp, dk).asymptotic;
    }
    return total;
  };

  AllocationResult res;
  PowerAllocation x = sca_initial_point(constraints);
  auto amps = x.amplitudes();
  detail::pull_strictly_feasible(amps, constraints);
  double current = objective_at(amps, amps);
  res.trace.push_back(current);
  for (int t = 1; t <= cfg.t_max; ++t) {
    const std::vector<double> anchor = amps;
    auto fn = [&](std::span<const double> xx, std::vector<double>* g) {
      const double f0 = objective_at(xx, anchor);
      if (g) {  // small K: finite differences are exact enough here
        g->assign(xx.size(), 0.0);
        std::vector<double> xp(xx.begin(), xx.end());
        for (std::size_t k = 0; k < xx.size(); ++k) {
          const double h = 1e-6 * (1.0 + std::abs(xx[k]));
          const double old = xp[k];
          xp[k] = old + h;
          const double fp = objective_at(xp, anchor);
          xp[k] = old - h;
          const double fm = objective_at(xp, anchor);
          xp[k] = old;
          (*g)[k] = (fp - fm) / (2.0 * h);
        }
      }
      return f0;
    };
    SolveDiagnostics diag;
    auto xn = detail::barrier_maximize(fn, amps, constraints, cfg, &diag);
    const double f_next = objective_at(xn, xn);
    const double gain = f_next - current;
    if (f_next >= current) {
      amps = xn;
      current = f_next;
    }
    res.trace.push_back(current);
    res.diagnostics = diag;
    if (gain <= cfg.eps_sca) break;
  }
  res.allocation = PowerAllocation::from_amplitudes(amps);
  return {std::move(res), current};
}

}  // namespace oqc
