#pragma once
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "oqc/coherent.hpp"
#include "oqc/errors.hpp"
#include "oqc/rng.hpp"
#include "oqc/sca.hpp"

namespace oqc {

inline constexpr int kSampledUserCap = 24;  ///< practical cap for the sampled path

struct SamplerConfig {
  std::size_t sample_size = 0;  ///< S; 0 selects the default 16*K
  double theta = 3.0;           ///< t-distribution degrees of freedom
  double r_threshold = 1e-3;    ///< weight-change threshold
  int max_rounds = 50;
  bool force_uniform_weights = false;  ///< exhaustive-consistency test mode

  std::size_t effective_sample_size(int K) const {
    std::size_t s = sample_size ? sample_size : 16u * static_cast<std::size_t>(K);
    if (K < 63) s = std::min(s, std::size_t{1} << K);
    return std::max<std::size_t>(s, 2);
  }
  void validate(int K) const {
    if (!(theta > 0.0)) throw domain_error("sampler theta must be > 0");
    if (!(r_threshold > 0.0)) throw domain_error("r_threshold must be > 0");
    if (max_rounds < 1) throw domain_error("max_rounds must be >= 1");
    if (K < 63 && sample_size > (std::size_t{1} << K))
      throw domain_error("sample_size exceeds 2^K");
  }
};

struct SamplerState {
  std::vector<std::uint32_t> indices;      ///< distinct configuration masks
  std::vector<double> weights;             ///< raw importance weights
  std::vector<double> normalized_weights;  ///< simplex over the sample
  int round = 0;
  double last_r = std::numeric_limits<double>::infinity();
  bool degenerate_reset = false;  ///< all-zero weights encountered
};

// ---------------------------------------------------------------------------
// Statistic, proposal, and target densities
// ---------------------------------------------------------------------------

/// Standardization statistics of the superposed-amplitude distribution plus
/// the target's evaluation point (the mean detection rate).
struct SamplerStatModel {
  double amp_mean = 0.0;
  double amp_std = 1.0;
  double y_bar = 0.0;
  bool degenerate = false;  ///< all amplitudes equal; uniform proposal
};

namespace detail {

inline double config_amplitude_mask(std::uint32_t mask, std::span<const double> x,
                                    int K) {
  double a = 0.0;
  while (mask) {
    const int b = std::countr_zero(mask);
    a += x[static_cast<std::size_t>(K - 1 - b)];
    mask &= mask - 1;
  }
  return a;
}

inline double student_t_log_pdf(double z, double theta) {
  return std::lgamma(0.5 * (theta + 1.0)) - std::lgamma(0.5 * theta) -
         0.5 * std::log(theta * std::numbers::pi) -
         0.5 * (theta + 1.0) * std::log1p(z * z / theta);
}

}  // namespace detail

/// Builds the standardization model. Exact moments over all 2^K configs for
/// K <= 20; 4096 uniform probes above that.
inline SamplerStatModel make_stat_model(std::span<const double> amps_on,
                                        const DetectionConfig& det,
                                        RngStream& rng) {
  const int K = static_cast<int>(amps_on.size());
  SamplerStatModel m;
  double s1 = 0.0, s2 = 0.0, sy = 0.0;
  std::size_t count = 0;
  if (K <= 20) {
    const auto amps = enumerate_amplitudes(amps_on);
    count = amps.size();
    for (double a : amps) {
      s1 += a;
      s2 += a * a;
      sy += det.eta * a * a + det.n_b;
    }
  } else {
    count = 4096;
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint32_t mask =
          static_cast<std::uint32_t>(rng.next_u64() & ((1ULL << K) - 1));
      const double a = detail::config_amplitude_mask(mask, amps_on, K);
      s1 += a;
      s2 += a * a;
      sy += det.eta * a * a + det.n_b;
    }
  }
  const double n = static_cast<double>(count);
  m.amp_mean = s1 / n;
  m.amp_std = std::sqrt(std::max(s2 / n - m.amp_mean * m.amp_mean, 0.0));
  m.y_bar = sy / n;
  if (!(m.amp_std > 1e-12)) {
    m.amp_std = 1.0;
    m.degenerate = true;
  }
  return m;
}

/// Student-t proposal density evaluated at the configuration's standardized
/// amplitude statistic. Degenerate statistics fall back to a uniform value.
inline double proposal_density(std::uint32_t config_mask, double theta, int K,
                               std::span<const double> amps_on,
                               const SamplerStatModel& model) {
  if (!(theta > 0.0)) throw domain_error("proposal_density: theta must be > 0");
  if (model.degenerate) return std::exp(detail::student_t_log_pdf(0.0, theta));
  const double a = detail::config_amplitude_mask(config_mask, amps_on, K);
  const double z = (a - model.amp_mean) / model.amp_std;
  return std::exp(detail::student_t_log_pdf(z, theta));
}

/// Gaussian-approximation target density of the configuration, evaluated at
/// the fixed point y_bar. Strictly positive.
inline double target_density(std::uint32_t config_mask, const DetectionConfig& det,
                             std::span<const double> amps_on,
                             const SamplerStatModel& model) {
  const int K = static_cast<int>(amps_on.size());
  const double a = detail::config_amplitude_mask(config_mask, amps_on, K);
  const double lambda = det.eta * a * a + det.n_b;
  const double z = model.y_bar - lambda;
  return std::exp(-z * z / (2.0 * lambda)) /
         std::sqrt(2.0 * std::numbers::pi * lambda);
}

// ---------------------------------------------------------------------------
// Resampling rounds
// ---------------------------------------------------------------------------

namespace detail {

/// Draw one mask from the 50/50 mixture of the current normalized weights
/// and the t-proposal over all configurations.
struct MixtureDrawer {
  int K;
  double theta;
  std::span<const double> amps_on;
  const SamplerStatModel* model;
  // materialized proposal cdf for K <= 20
  std::vector<double> cdf;
  std::vector<std::uint32_t> order;

  void materialize() {
    if (K > 20) return;
    const std::size_t n = std::size_t{1} << K;
    cdf.resize(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += proposal_density(static_cast<std::uint32_t>(i), theta, K, amps_on,
                              *model);
      cdf[i] = acc;
    }
    for (double& v : cdf) v /= acc;
  }

  std::uint32_t draw_proposal(RngStream& rng) const {
    if (K <= 20) {
      const double u = rng.next_double();
      const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
      return static_cast<std::uint32_t>(it - cdf.begin());
    }
    // rejection sampling: the t-density peaks at z = 0
    const double peak = std::exp(student_t_log_pdf(0.0, theta));
    for (int tries = 0; tries < 10000; ++tries) {
      const std::uint32_t mask =
          static_cast<std::uint32_t>(rng.next_u64() & ((1ULL << K) - 1));
      const double d = proposal_density(mask, theta, K, amps_on, *model);
      if (rng.next_double() * peak <= d) return mask;
    }
    return static_cast<std::uint32_t>(rng.next_u64() & ((1ULL << K) - 1));
  }
};

}  // namespace detail

/// One adaptive-importance-sampling round: stochastic mixture draws propose
/// fresh configurations, the sample is refined to the S highest-weight
/// members of (current set) union (fresh draws), weights are recomputed and
/// normalized, and r accumulates the normalized-weight change over matched
/// indices (unmatched entries count as weight zero).
inline SamplerState resample_and_weight(const SamplerState& state,
                                        const SamplerConfig& cfg,
                                        const DetectionConfig& det,
                                        std::span<const double> amps_on,
                                        const SamplerStatModel& model,
                                        RngStream& rng) {
  const int K = static_cast<int>(amps_on.size());
  cfg.validate(K);
  const std::size_t S = cfg.effective_sample_size(K);

  detail::MixtureDrawer drawer{K, cfg.theta, amps_on, &model, {}, {}};
  drawer.materialize();

  auto weight_of = [&](std::uint32_t mask) {
    const double t = target_density(mask, det, amps_on, model);
    const double p = proposal_density(mask, cfg.theta, K, amps_on, model);
    return t / p;
  };

  // union of current indices and S fresh mixture draws
  std::map<std::uint32_t, double> pool;
  for (std::size_t s = 0; s < state.indices.size(); ++s)
    pool.emplace(state.indices[s], weight_of(state.indices[s]));
  for (std::size_t s = 0; s < S; ++s) {
    std::uint32_t mask;
    if (!state.indices.empty() && rng.next_double() < 0.5) {
      // categorical draw over the current normalized weights
      const double u = rng.next_double();
      double acc = 0.0;
      std::size_t pick = state.indices.size() - 1;
      for (std::size_t i = 0; i < state.indices.size(); ++i) {
        acc += state.normalized_weights[i];
        if (u <= acc) {
          pick = i;
          break;
        }
      }
      mask = state.indices[pick];
    } else {
      mask = drawer.draw_proposal(rng);
    }
    pool.emplace(mask, weight_of(mask));
  }

  // keep the S most important distinct configurations (mask ascending on ties)
  std::vector<std::pair<std::uint32_t, double>> entries(pool.begin(), pool.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (entries.size() > S) entries.resize(S);
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  SamplerState next;
  next.round = state.round + 1;
  next.indices.reserve(entries.size());
  next.weights.reserve(entries.size());
  for (const auto& [mask, w] : entries) {
    next.indices.push_back(mask);
    next.weights.push_back(w);
  }
  double wsum = std::accumulate(next.weights.begin(), next.weights.end(), 0.0);
  if (!(wsum > 0.0) || !std::isfinite(wsum)) {
    next.weights.assign(next.indices.size(), 1.0);
    wsum = static_cast<double>(next.indices.size());
    next.degenerate_reset = true;
  }
  next.normalized_weights.resize(next.weights.size());
  for (std::size_t i = 0; i < next.weights.size(); ++i)
    next.normalized_weights[i] = next.weights[i] / wsum;

  // r over matched indices of the two normalized simplices
  double r = 0.0;
  {
    std::map<std::uint32_t, double> prev;
    for (std::size_t i = 0; i < state.indices.size(); ++i)
      prev.emplace(state.indices[i], state.normalized_weights[i]);
    std::map<std::uint32_t, double> cur;
    for (std::size_t i = 0; i < next.indices.size(); ++i)
      cur.emplace(next.indices[i], next.normalized_weights[i]);
    for (const auto& [mask, w] : cur) {
      auto it = prev.find(mask);
      r += std::abs(w - (it == prev.end() ? 0.0 : it->second));
    }
    for (const auto& [mask, w] : prev)
      if (!cur.count(mask)) r += w;
  }
  next.last_r = r;
  return next;
}

/// Cold start: S distinct uniform configuration draws with weights attached.
inline SamplerState sampler_cold_start(const SamplerConfig& cfg,
                                       const DetectionConfig& det,
                                       std::span<const double> amps_on,
                                       const SamplerStatModel& model,
                                       RngStream& rng) {
  const int K = static_cast<int>(amps_on.size());
  const std::size_t S = cfg.effective_sample_size(K);
  SamplerState st;
  std::map<std::uint32_t, double> chosen;
  const std::uint64_t space = K < 63 ? (1ULL << K) : ~0ULL;
  while (chosen.size() < S) {
    const std::uint32_t mask = static_cast<std::uint32_t>(rng.next_below(space));
    chosen.emplace(mask, 0.0);
  }
  for (auto& [mask, w] : chosen) {
    const double t = target_density(mask, det, amps_on, model);
    const double p = proposal_density(mask, cfg.theta, K, amps_on, model);
    w = t / p;
  }
  for (const auto& [mask, w] : chosen) {
    st.indices.push_back(mask);
    st.weights.push_back(w);
  }
  double wsum = std::accumulate(st.weights.begin(), st.weights.end(), 0.0);
  if (!(wsum > 0.0)) {
    st.weights.assign(st.indices.size(), 1.0);
    wsum = static_cast<double>(st.indices.size());
    st.degenerate_reset = true;
  }
  st.normalized_weights.resize(st.weights.size());
  for (std::size_t i = 0; i < st.weights.size(); ++i)
    st.normalized_weights[i] = st.weights[i] / wsum;
  return st;
}

// ---------------------------------------------------------------------------
// Algorithm 2: sampled power allocation
// ---------------------------------------------------------------------------

struct SampledAllocationResult {
  PowerAllocation allocation;
  std::vector<double> trace;  ///< sampled objective per SCA iteration
  SolveDiagnostics diagnostics;
  SamplerState sampler;
  std::vector<double> r_trace;
  std::vector<double> assemble_seconds;  ///< per-iteration model assembly
  std::vector<double> solve_seconds;     ///< per-iteration subproblem solve
};

/// Low-complexity allocation: the adaptive sampler selects S representative
/// configurations (converged once, then frozen per the printed control
/// flow), and the SCA loop maximizes the sampled surrogate over them.
inline SampledAllocationResult allocate_sampled(
    const DetectionConfig& det, const PowerConstraints& constraints,
    std::span<const double> channel_gains, const SolverConfig& cfg,
    const SamplerConfig& scfg, std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  cfg.validate();
  constraints.validate();
  const std::size_t K = constraints.max_user_power.size();
  if (channel_gains.size() != K)
    throw dimension_error("allocate_sampled: channel gain count mismatch");
  if (K > kSampledUserCap)
    throw capacity_error("allocate_sampled: K exceeds the practical cap (24)");
  scfg.validate(static_cast<int>(K));

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

  SampledAllocationResult res;
  RngStream rng(seed, 0xA15u);
  PowerAllocation x = sca_initial_point(sorted_c);
  auto amps = x.amplitudes();
  detail::pull_strictly_feasible(amps, sorted_c);
  x = PowerAllocation::from_amplitudes(amps);

  // inner adaptive sampling, run to convergence then frozen
  const auto x0 = x.amplitudes();
  const auto model_stats = make_stat_model(x0, det, rng);
  SamplerState st = sampler_cold_start(scfg, det, x0, model_stats, rng);
  while (st.last_r >= scfg.r_threshold && st.round < scfg.max_rounds) {
    st = resample_and_weight(st, scfg, det, x0, model_stats, rng);
    res.r_trace.push_back(st.last_r);
  }

  const std::size_t S = st.indices.size();
  std::vector<double> scales(S, 1.0);
  if (!scfg.force_uniform_weights) {
    for (std::size_t s = 0; s < S; ++s)
      scales[s] = static_cast<double>(S) * st.normalized_weights[s];
  }

  double current = 0.0;
  int stalls = 0;
  for (int t = 1; t <= cfg.t_max; ++t) {
    const auto t0 = clock::now();
    const auto model = GaObjective::sampled(static_cast<int>(K), det,
                                            st.indices, scales);
    const auto state = model.make_state(x.amplitudes(), t);
    const auto t1 = clock::now();
    if (t == 1) {
      current = model.value(x.amplitudes());
      res.trace.push_back(current);
    }
    SolveDiagnostics diag;
    PowerAllocation next =
        solve_subproblem_p2(model, state, sorted_c, cfg, x, &diag);
    const auto t2 = clock::now();
    res.assemble_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    res.solve_seconds.push_back(std::chrono::duration<double>(t2 - t1).count());

    double f_next = model.value(next.amplitudes());
    if (f_next < current) {
      next = x;
      f_next = current;
    } else {
      auto amps = next.amplitudes();
      detail::mm_extrapolate(
          [&](std::span<const double> xx) { return model.value(xx); },
          sorted_c, state.anchor_amps, amps, f_next);
      next = PowerAllocation::from_amplitudes(amps);
    }
    const double gain = f_next - current;
    x = next;
    current = f_next;
    res.trace.push_back(current);
    res.diagnostics = diag;

    std::vector<double> grad;
    model.value(x.amplitudes(), &grad);
    res.diagnostics.kkt_residual =
        detail::kkt_residual(x.amplitudes(), grad, sorted_c);
    stalls = gain <= 1e-15 ? stalls + 1 : 0;
    if (gain <= cfg.eps_sca &&
        (res.diagnostics.kkt_residual <= cfg.subproblem_tol || stalls >= 3))
      break;
  }

  PowerAllocation unsorted;
  unsorted.powers.assign(K, 0.0);
  for (std::size_t i = 0; i < K; ++i)
    unsorted.powers[order[i]] = x.powers[i];
  res.allocation = std::move(unsorted);
  res.sampler = std::move(st);
  return res;
}

}  // namespace oqc
