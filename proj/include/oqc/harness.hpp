#pragma once
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "oqc/rates.hpp"
#include "oqc/sampler.hpp"
#include "oqc/sca.hpp"
#include "oqc/scenario.hpp"
#include "oqc/srm.hpp"

namespace oqc {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kCsvSchema = "oqc-csv-1";

// ---------------------------------------------------------------------------
// CSV + manifest plumbing
// ---------------------------------------------------------------------------

/// Shortest round-trip representation; locale-independent.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvTable {
public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> cells) { rows_.push_back(std::move(cells)); }

  /// Full body including the schema comment and header line.
  std::string body() const {
    std::string out = std::string("# schema=") + kCsvSchema + "\n";
    out += join(header_);
    for (const auto& r : rows_) out += join(r);
    return out;
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary);
    f << body();
  }

  std::size_t row_count() const { return rows_.size(); }

private:
  static std::string join(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) line += ',';
      line += cells[i];
    }
    line += '\n';
    return line;
  }
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct RunManifest {
  std::string scenario_hash;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  double wall_seconds = 0.0;
  std::vector<std::string> warnings;
  std::vector<std::string> outputs;

  void write(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["scenario_hash"] = scenario_hash;
    j["seed"] = seed;
    j["tool_version"] = tool_version;
    j["wall_seconds"] = wall_seconds;
    j["warnings"] = warnings;
    j["outputs"] = outputs;
    std::ofstream f(path, std::ios::binary);
    f << j.dump(2) << "\n";
  }
};

inline std::string scenario_hash(const Scenario& s) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(scenario_to_json(s).dump())));
  return buf;
}

/// Runs fn(i) for i in [0, n) on a worker pool; outputs must be written to
/// pre-sized slots so the result is independent of scheduling.
inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const int nw = std::min<int>(threads, static_cast<int>(n));
  pool.reserve(static_cast<std::size_t>(nw));
  for (int w = 0; w < nw; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) break;
        fn(i);
      }
    });
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Allocation dispatch and rate evaluation
// ---------------------------------------------------------------------------

struct AlgorithmOutcome {
  PowerAllocation allocation;
  double rate_ga = 0.0;     ///< asymptotic objective at the allocation
  double rate_exact = 0.0;  ///< exact sum-rate at the allocation (K <= cap)
  double rate_own = 0.0;    ///< scheme-specific rate where one exists
  std::vector<double> trace;
  std::vector<std::string> warnings;
};

inline double ga_rate_at(const Scenario& s, const PowerAllocation& alloc) {
  const auto model = GaObjective::full(s.users, s.det);
  return model.value(alloc.amplitudes());
}

inline double exact_rate_at(const Scenario& s, const PowerAllocation& alloc,
                            const DetectionConfig& det) {
  if (s.users > kEnumerationCap) return std::nan("");
  const auto amps = alloc.amplitudes();
  return exact_sum_rate(amps, det, s.tail_eps);
}

inline AlgorithmOutcome run_algorithm(const Scenario& s, const std::string& name,
                                      std::span<const double> h) {
  AlgorithmOutcome out;
  if (name == "sca") {
    auto res = allocate_sca(s.det, s.constraints, h, s.solver);
    out.allocation = res.allocation;
    out.trace = res.trace;
    if (!res.diagnostics.converged)
      out.warnings.push_back("sca: subproblem not fully converged");
    out.rate_own = res.trace.back();
  } else if (name == "sampled") {
    auto res = allocate_sampled(s.det, s.constraints, h, s.solver, s.sampler, s.seed);
    out.allocation = res.allocation;
    out.trace = res.trace;
    if (res.sampler.degenerate_reset)
      out.warnings.push_back("sampler: degenerate weights were reset");
    out.rate_own = res.trace.back();
  } else if (name == "enp") {
    out.allocation = baseline_enp(s.constraints);
    out.rate_own = 0.0;
  } else if (name == "oma") {
    auto [alloc, bits] = baseline_oma(h, s.constraints, s.det, s.tail_eps);
    out.allocation = std::move(alloc);
    out.rate_own = bits;
  } else if (name == "ia") {
    auto [res, bits] = baseline_ia(s.det, s.constraints, s.solver);
    out.allocation = res.allocation;
    out.trace = res.trace;
    out.rate_own = bits;
  } else {
    throw domain_error("unknown algorithm: " + name);
  }
  out.rate_ga = ga_rate_at(s, out.allocation);
  out.rate_exact = exact_rate_at(s, out.allocation, s.det);
  return out;
}

inline DetectionConfig variant_config(const Scenario& s, const std::string& name) {
  DetectionConfig det = s.det;
  if (name == "ideal_pnrd") {
    det.variant = ReceiverVariant::ideal_pnrd;
  } else if (name == "on_off_kennedy") {
    det.variant = ReceiverVariant::on_off_kennedy;
  } else if (name.rfind("finite_pnrd_", 0) == 0) {
    det.variant = ReceiverVariant::finite_pnrd;
    det.n_max = std::stoll(name.substr(12));
  } else {
    throw domain_error("unknown receiver variant: " + name);
  }
  return det;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct CommandResult {
  std::vector<std::pair<std::string, CsvTable>> tables;
  RunManifest manifest;
};

/// rate: one row per receiver variant with the full RateBreakdown at the
/// ENP (largest feasible equal-power) allocation.
inline CommandResult cmd_rate(const Scenario& s) {
  CommandResult out;
  s.validate();
  auto h = resolve_channel_gains(s, &out.manifest.warnings);
  const auto alloc = baseline_enp(s.constraints);
  const auto amps = alloc.amplitudes();

  CsvTable t({"variant", "K", "eta", "n_b", "total_power", "exact_bits",
              "lower_ga", "upper_ga", "asymptotic_ga", "ordering_ok",
              "exact_minus_asym"});
  const auto rb = bounds_and_asymptotic(amps, s.det);
  for (const auto& vname : s.variants) {
    const auto det = variant_config(s, vname);
    const double exact = exact_rate_at(s, alloc, det);
    const bool ordering = rb.lower_ga < rb.asymptotic && rb.asymptotic < rb.upper_ga;
    t.add_row({vname, std::to_string(s.users), fmt(s.det.eta), fmt(s.det.n_b),
               fmt(alloc.total_amplitude() * alloc.total_amplitude()), fmt(exact),
               fmt(rb.lower_ga), fmt(rb.upper_ga), fmt(rb.asymptotic),
               ordering ? "1" : "0", fmt(exact - rb.asymptotic)});
  }
  out.tables.emplace_back("rate.csv", std::move(t));
  return out;
}

/// allocate: per-user allocation plus the iteration trace of the selected
/// algorithm.
inline CommandResult cmd_allocate(const Scenario& s, const std::string& algorithm) {
  CommandResult out;
  s.validate();
  auto h = resolve_channel_gains(s, &out.manifest.warnings);
  auto res = run_algorithm(s, algorithm, h);
  for (const auto& w : res.warnings) out.manifest.warnings.push_back(w);

  CsvTable alloc_t({"user", "h", "power", "amplitude"});
  for (int k = 0; k < s.users; ++k)
    alloc_t.add_row({std::to_string(k), fmt(h[static_cast<std::size_t>(k)]),
                     fmt(res.allocation.powers[static_cast<std::size_t>(k)]),
                     fmt(std::sqrt(res.allocation.powers[static_cast<std::size_t>(k)]))});
  out.tables.emplace_back("allocation.csv", std::move(alloc_t));

  CsvTable rate_t({"algorithm", "rate_ga", "rate_exact", "rate_own"});
  rate_t.add_row({algorithm, fmt(res.rate_ga), fmt(res.rate_exact), fmt(res.rate_own)});
  out.tables.emplace_back("rates.csv", std::move(rate_t));

  CsvTable trace_t({"iteration", "objective"});
  for (std::size_t i = 0; i < res.trace.size(); ++i)
    trace_t.add_row({std::to_string(i), fmt(res.trace[i])});
  out.tables.emplace_back("trace.csv", std::move(trace_t));
  return out;
}

namespace detail {

/// Scenario at one grid point of the sweep parameter.
inline Scenario at_grid_point(const Scenario& s, double value) {
  Scenario sc = s;
  if (s.sweep.parameter == "max_bs_power") {
    sc.constraints.max_bs_power = value;
  } else if (s.sweep.parameter == "n_b") {
    sc.det.n_b = value;
  } else if (s.sweep.parameter == "eta") {
    sc.det.eta = value;
  } else if (s.sweep.parameter == "users") {
    const int ku = std::max(1, static_cast<int>(std::lround(value)));
    sc.users = ku;
    sc.constraints.max_user_power.assign(
        static_cast<std::size_t>(ku),
        s.constraints.max_user_power.empty() ? s.constraints.max_bs_power
                                             : s.constraints.max_user_power[0]);
    if (!s.explicit_h.empty()) {
      sc.explicit_h.resize(static_cast<std::size_t>(ku));
      for (int k = 0; k < ku; ++k)
        sc.explicit_h[static_cast<std::size_t>(k)] =
            s.explicit_h[static_cast<std::size_t>(k) % s.explicit_h.size()];
    }
    if (!s.channel.empty()) {
      sc.channel.resize(static_cast<std::size_t>(ku));
      for (int k = 0; k < ku; ++k)
        sc.channel[static_cast<std::size_t>(k)] =
            s.channel[static_cast<std::size_t>(k) % s.channel.size()];
    }
  } else {
    throw domain_error("unknown sweep parameter: " + s.sweep.parameter);
  }
  return sc;
}

struct SweepAccum {
  double sum = 0.0, sum_sq = 0.0;
  int n = 0;
  void add(double v) {
    if (std::isnan(v)) return;
    sum += v;
    sum_sq += v * v;
    ++n;
  }
  double mean() const { return n ? sum / n : std::nan(""); }
  double se_of_mean() const {
    if (n < 2) return 0.0;
    const double m = mean();
    const double var = std::max(sum_sq / n - m * m, 0.0) * n / (n - 1.0);
    return std::sqrt(var / n);
  }
};

}  // namespace detail

/// sweep: deterministic grid over one scenario parameter (max_bs_power, n_b,
/// eta, or users); algorithm series plus, when several receiver variants are
/// configured, per-variant exact rates at the max-feasible equal-power
/// allocation. Long format, grid-ordered; realizations > 1 adds
/// standard-error columns over fresh channel draws.
inline CommandResult cmd_sweep(const Scenario& s, int threads) {
  CommandResult out;
  s.validate();
  const int n = s.sweep.points;
  std::vector<double> grid(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    grid[static_cast<std::size_t>(i)] =
        n == 1 ? s.sweep.from
               : s.sweep.from + (s.sweep.to - s.sweep.from) * i / (n - 1.0);

  struct Row {
    double param;
    std::string series;
    double rate_ga, rate_exact, rate_own;
    double se_ga, se_exact, se_own;
  };
  std::vector<std::vector<Row>> rows(static_cast<std::size_t>(n));
  std::vector<std::vector<std::string>> point_warnings(static_cast<std::size_t>(n));

  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
    const Scenario sc = detail::at_grid_point(s, grid[i]);
    auto& out_rows = rows[i];
    for (const auto& alg : sc.algorithms) {
      detail::SweepAccum ga, ex, own;
      for (int r = 0; r < sc.realizations; ++r) {
        auto h = resolve_channel_gains(sc, &point_warnings[i], r);
        auto res = run_algorithm(sc, alg, h);
        ga.add(res.rate_ga);
        ex.add(res.rate_exact);
        own.add(res.rate_own);
        for (auto& w : res.warnings) point_warnings[i].push_back(std::move(w));
      }
      out_rows.push_back({grid[i], alg, ga.mean(), ex.mean(), own.mean(),
                          ga.se_of_mean(), ex.se_of_mean(),
                          own.se_of_mean()});
    }
    if (sc.variants.size() > 1) {
      const auto alloc = baseline_enp(sc.constraints);
      for (const auto& vname : sc.variants) {
        const auto det = variant_config(sc, vname);
        const double exact = exact_rate_at(sc, alloc, det);
        out_rows.push_back({grid[i], "variant:" + vname, std::nan(""), exact,
                            std::nan(""), 0.0, 0.0, 0.0});
      }
    }
  });

  CsvTable t({"param", "value", "series", "rate_ga", "rate_exact", "rate_own",
              "se_ga", "se_exact", "se_own"});
  for (const auto& point_rows : rows)
    for (const auto& r : point_rows)
      t.add_row({s.sweep.parameter, fmt(r.param), r.series, fmt(r.rate_ga),
                 fmt(r.rate_exact), fmt(r.rate_own), fmt(r.se_ga),
                 fmt(r.se_exact), fmt(r.se_own)});
  for (auto& pw : point_warnings)
    for (auto& w : pw) out.manifest.warnings.push_back(std::move(w));
  out.tables.emplace_back("sweep.csv", std::move(t));
  return out;
}

/// Two-user capacity region: corner points via the two SIC orders plus the
/// OMA time-sharing point, all at the gain-proportional full-power
/// allocation.
struct RegionResult {
  double i1_max, i2_max, i_sum;
  double a1, a2;  ///< point A = (I_1delta, I_2max)
  double b1, b2;  ///< point B = (I_1max, I_2delta)
  double c1, c2;  ///< OMA point C
};

inline RegionResult two_user_region(const Scenario& s,
                                    std::span<const double> h) {
  if (s.users != 2) throw domain_error("region requires K = 2");
  const double hsum = h[0] + h[1];
  PowerAllocation alloc;
  alloc.powers = {s.constraints.max_bs_power * h[0] / hsum,
                  s.constraints.max_bs_power * h[1] / hsum};
  for (int k = 0; k < 2; ++k)
    alloc.powers[static_cast<std::size_t>(k)] =
        std::min(alloc.powers[static_cast<std::size_t>(k)],
                 s.constraints.max_user_power[static_cast<std::size_t>(k)]);
  const auto amps = alloc.amplitudes();

  // joint pmf over (config, y) for the two-user system
  const std::vector<double> a2 = {amps[0], amps[1]};
  const auto all = enumerate_amplitudes(a2);  // order: --, -+, +-, ++
  std::vector<double> lam(4);
  double lam_max = 0.0;
  for (int i = 0; i < 4; ++i) {
    lam[static_cast<std::size_t>(i)] =
        detection_rate(all[static_cast<std::size_t>(i)] * all[static_cast<std::size_t>(i)], s.det);
    lam_max = std::max(lam_max, lam[static_cast<std::size_t>(i)]);
  }
  const std::int64_t ny = outcome_count(lam_max, s.det, s.tail_eps);
  auto entropy_of = [&](std::span<const std::size_t> group) {
    double hh = 0.0;
    for (std::int64_t y = 0; y < ny; ++y) {
      double p = 0.0;
      for (std::size_t i : group)
        p += detection_pmf(all[i] * all[i], s.det, y) / static_cast<double>(group.size());
      if (p > 0.0) hh -= p * std::log2(p);
    }
    return hh;
  };
  const std::vector<std::size_t> g_all = {0, 1, 2, 3};
  const std::vector<std::size_t> g_x1m = {0, 1}, g_x1p = {2, 3};
  const std::vector<std::size_t> g_x2m = {0, 2}, g_x2p = {1, 3};
  const double hy = entropy_of(g_all);
  const double hy_x1 = 0.5 * (entropy_of(g_x1m) + entropy_of(g_x1p));
  const double hy_x2 = 0.5 * (entropy_of(g_x2m) + entropy_of(g_x2p));
  double hy_x12 = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::vector<std::size_t> gi = {i};
    hy_x12 += 0.25 * entropy_of(gi);
  }

  RegionResult r{};
  const double i1 = hy - hy_x1;        // I(X1;Y)
  const double i2 = hy - hy_x2;        // I(X2;Y)
  const double i1g2 = hy_x2 - hy_x12;  // I(X1;Y|X2)
  const double i2g1 = hy_x1 - hy_x12;  // I(X2;Y|X1)
  r.i_sum = hy - hy_x12;
  r.i1_max = i1g2;
  r.i2_max = i2g1;
  r.a1 = i1;
  r.a2 = i2g1;  // decode user 1 first
  r.b1 = i1g2;
  r.b2 = i2;    // decode user 2 first

  // OMA point: same proportional powers, exact single-user rates, half share
  for (int k = 0; k < 2; ++k) {
    const double amp[1] = {amps[static_cast<std::size_t>(k)]};
    const double rk = exact_sum_rate(amp, s.det, s.tail_eps) / 2.0;
    if (k == 0) r.c1 = rk; else r.c2 = rk;
  }
  return r;
}

inline CommandResult cmd_region(const Scenario& s) {
  CommandResult out;
  s.validate();
  auto h = resolve_channel_gains(s, &out.manifest.warnings);
  const auto r = two_user_region(s, h);
  CsvTable t({"point", "i1", "i2"});
  t.add_row({"corner_i2max", fmt(0.0), fmt(r.i2_max)});
  t.add_row({"A", fmt(r.a1), fmt(r.a2)});
  t.add_row({"B", fmt(r.b1), fmt(r.b2)});
  t.add_row({"corner_i1max", fmt(r.i1_max), fmt(0.0)});
  t.add_row({"C_oma", fmt(r.c1), fmt(r.c2)});
  t.add_row({"sum_rate", fmt(r.i_sum), fmt(0.0)});
  out.tables.emplace_back("region.csv", std::move(t));
  return out;
}

/// limits: Holevo, conventional-measurement (SQL), and Shannon-AWGN curves
/// over a photon-number grid, plus the Holevo-SQL gap in nats.
inline CommandResult cmd_limits(const Scenario& s, double awgn_noise = 1.0) {
  CommandResult out;
  CsvTable t({"mean_photons", "holevo_bits", "sql_bits", "shannon_awgn_bits",
              "holevo_sql_gap_nats"});
  const int n = s.sweep.points;
  for (int i = 0; i < n; ++i) {
    const double p = n == 1 ? s.sweep.from
                            : s.sweep.from + (s.sweep.to - s.sweep.from) * i / (n - 1.0);
    const double nbar = s.det.eta * p;
    const double hol = holevo_gaussian(nbar);
    const auto [sql, shannon] = reference_capacities(nbar, awgn_noise);
    t.add_row({fmt(p), fmt(hol), fmt(sql), fmt(shannon),
               fmt((hol - sql) * kLn2)});
  }
  out.tables.emplace_back("limits.csv", std::move(t));
  return out;
}

/// qam: SRM sum-rate per modulation order over the power grid; the scale
/// alpha is set from the mean constellation energy.
inline CommandResult cmd_qam(const Scenario& s) {
  CommandResult out;
  CsvTable t({"order", "max_bs_power", "alpha_sq", "rate_bits"});
  const int n = s.sweep.points;
  for (int m : s.qam_orders) {
    const int L = static_cast<int>(std::lround(std::sqrt(m)));
    if (L * L != m) throw domain_error("qam order must be a square number");
    const double mean_energy = 2.0 * (L * L - 1.0) / 3.0;
    for (int i = 0; i < n; ++i) {
      const double p = n == 1 ? s.sweep.from
                              : s.sweep.from + (s.sweep.to - s.sweep.from) * i / (n - 1.0);
      const double alpha_sq = p / std::max(mean_energy, 1e-300);
      const auto c = QamConstellation::make(L, std::sqrt(alpha_sq));
      const double bits = qam_sum_rate(c, s.users);
      t.add_row({std::to_string(m), fmt(p), fmt(alpha_sq), fmt(bits)});
    }
  }
  out.tables.emplace_back("qam.csv", std::move(t));
  return out;
}

/// Writes every table plus the manifest into out_dir.
inline void write_command_result(CommandResult& res, const Scenario& s,
                                 const std::filesystem::path& out_dir,
                                 double wall_seconds) {
  std::filesystem::create_directories(out_dir);
  res.manifest.scenario_hash = scenario_hash(s);
  res.manifest.seed = s.seed;
  res.manifest.wall_seconds = wall_seconds;
  for (auto& [name, table] : res.tables) {
    table.write(out_dir / name);
    res.manifest.outputs.push_back(name);
  }
  res.manifest.write(out_dir / "manifest.json");
}

}  // namespace oqc
