// Batch CLI for uplink NOMA optical-quantum-communication studies: exact and
// asymptotic sum-rates, coherent-state power allocation, and the reference
// experiments (sweeps, two-user region, capacity limits, QAM/SRM).
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "oqc/harness.hpp"
#include "oqc/presets.hpp"

namespace {

struct CommonOpts {
  std::string scenario_file;
  std::string preset;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
  int realizations = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--scenario", o.scenario_file, "scenario JSON file");
  cmd->add_option("--preset", o.preset, "built-in preset name (fig2..fig9)");
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option("--seed", o.seed, "override the scenario seed")
      ->each([&o](const std::string&) { o.seed_set = true; });
  cmd->add_option("--threads", o.threads, "worker threads for sweeps");
  cmd->add_option("--realizations", o.realizations,
                  "channel realizations to average over");
}

oqc::Scenario resolve_scenario(const CommonOpts& o) {
  oqc::Scenario s;
  if (!o.preset.empty())
    s = oqc::preset_scenario(o.preset);
  else if (!o.scenario_file.empty())
    s = oqc::load_scenario(o.scenario_file);
  else
    throw oqc::domain_error("either --scenario or --preset is required");
  if (o.seed_set) s.seed = o.seed;
  if (o.realizations > 0) s.realizations = o.realizations;
  return s;
}

std::filesystem::path resolve_out_dir(const CommonOpts& o, const std::string& cmd) {
  if (!o.out_dir.empty()) return o.out_dir;
  if (const char* env = std::getenv("OQC_OUT_DIR")) return env;
  return std::filesystem::path("out") / cmd;
}

int run(const CommonOpts& o, const std::string& name,
        const std::function<oqc::CommandResult(const oqc::Scenario&)>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto s = resolve_scenario(o);
  auto res = fn(s);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto dir = resolve_out_dir(o, name);
  oqc::write_command_result(res, s, dir, wall);
  std::cout << name << ": wrote " << res.tables.size() << " table(s) to " << dir
            << " (" << wall << " s)\n";
  for (const auto& w : res.manifest.warnings) std::cout << "  warning: " << w << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uplink NOMA-OQC sum-rate and power-allocation toolbox"};
  app.require_subcommand(1);

  CommonOpts rate_o, alloc_o, sweep_o, region_o, limits_o, qam_o;
  std::string algorithm = "sca";

  auto* rate = app.add_subcommand("rate", "exact and asymptotic sum-rates");
  add_common(rate, rate_o);

  auto* alloc = app.add_subcommand("allocate", "run one power allocator");
  add_common(alloc, alloc_o);
  alloc->add_option("--algorithm", algorithm, "sca|sampled|oma|enp|ia");

  auto* sweep = app.add_subcommand("sweep", "parameter sweep, long-format CSV");
  add_common(sweep, sweep_o);

  auto* region = app.add_subcommand("region", "two-user capacity region");
  add_common(region, region_o);

  auto* limits = app.add_subcommand("limits", "Holevo / SQL / Shannon curves");
  add_common(limits, limits_o);

  auto* qam = app.add_subcommand("qam", "QAM sum-rates under the SRM");
  add_common(qam, qam_o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (rate->parsed())
      return run(rate_o, "rate", [](const oqc::Scenario& s) { return oqc::cmd_rate(s); });
    if (alloc->parsed())
      return run(alloc_o, "allocate", [&](const oqc::Scenario& s) {
        return oqc::cmd_allocate(s, algorithm);
      });
    if (sweep->parsed())
      return run(sweep_o, "sweep", [&](const oqc::Scenario& s) {
        return oqc::cmd_sweep(s, sweep_o.threads);
      });
    if (region->parsed())
      return run(region_o, "region",
                 [](const oqc::Scenario& s) { return oqc::cmd_region(s); });
    if (limits->parsed())
      return run(limits_o, "limits",
                 [](const oqc::Scenario& s) { return oqc::cmd_limits(s); });
    if (qam->parsed())
      return run(qam_o, "qam", [](const oqc::Scenario& s) { return oqc::cmd_qam(s); });
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
