#pragma once
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oqc/coherent.hpp"
#include "oqc/errors.hpp"
#include "oqc/sampler.hpp"
#include "oqc/sca.hpp"

namespace oqc {

/// Grid specification for parameter sweeps.
struct SweepSpec {
  std::string parameter = "max_bs_power";
  double from = 10.0;
  double to = 120.0;
  int points = 12;
};

/// One experiment description: system, channel, caps, solver knobs, seed.
struct Scenario {
  std::string name = "scenario";
  int users = 2;
  DetectionConfig det;
  std::vector<double> explicit_h;        ///< channel gains, if given directly
  std::vector<ChannelParams> channel;    ///< else drawn from these
  PowerConstraints constraints;
  SolverConfig solver;
  SamplerConfig sampler;
  SweepSpec sweep;
  std::vector<std::string> algorithms = {"sca", "oma", "enp", "ia"};
  std::vector<std::string> variants = {"ideal_pnrd"};
  std::vector<int> qam_orders = {4, 16, 64};
  std::uint64_t seed = 1;
  int realizations = 1;
  double tail_eps = 1e-12;

  void validate() const {
    if (users < 1) throw domain_error("scenario: users must be >= 1");
    det.validate();
    if (!explicit_h.empty() && explicit_h.size() != static_cast<std::size_t>(users))
      throw dimension_error("scenario: explicit_h length must equal users");
    if (!channel.empty() && channel.size() != static_cast<std::size_t>(users))
      throw dimension_error("scenario: channel params length must equal users");
    if (constraints.max_user_power.size() != static_cast<std::size_t>(users))
      throw dimension_error("scenario: max_user_power length must equal users");
    constraints.validate();
    solver.validate();
    if (!(tail_eps > 0.0 && tail_eps < 1.0))
      throw domain_error("scenario: tail_eps must lie in (0,1)");
    if (realizations < 1) throw domain_error("scenario: realizations must be >= 1");
  }
};

namespace detail {

inline ReceiverVariant variant_from_string(const std::string& s) {
  if (s == "ideal_pnrd") return ReceiverVariant::ideal_pnrd;
  if (s == "finite_pnrd") return ReceiverVariant::finite_pnrd;
  if (s == "on_off_kennedy") return ReceiverVariant::on_off_kennedy;
  throw domain_error("unknown receiver variant: " + s);
}

inline std::string variant_to_string(ReceiverVariant v) {
  switch (v) {
    case ReceiverVariant::ideal_pnrd: return "ideal_pnrd";
    case ReceiverVariant::finite_pnrd: return "finite_pnrd";
    case ReceiverVariant::on_off_kennedy: return "on_off_kennedy";
  }
  return "ideal_pnrd";
}

}  // namespace detail

inline nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["name"] = s.name;
  j["users"] = s.users;
  j["eta"] = s.det.eta;
  j["n_b"] = s.det.n_b;
  j["receiver"] = {{"variant", detail::variant_to_string(s.det.variant)},
                   {"n_max", s.det.n_max}};
  if (!s.explicit_h.empty()) j["channel"]["explicit_h"] = s.explicit_h;
  if (!s.channel.empty()) {
    auto arr = nlohmann::json::array();
    for (const auto& c : s.channel)
      arr.push_back({{"sigma_x", c.sigma_x},
                     {"d", c.d},
                     {"d_t", c.d_t},
                     {"d_r", c.d_r},
                     {"nu", c.nu}});
    j["channel"]["params"] = arr;
  }
  j["constraints"] = {{"max_bs_power", s.constraints.max_bs_power},
                      {"max_user_power", s.constraints.max_user_power}};
  j["solver"] = {{"t_max", s.solver.t_max},
                 {"eps_sca", s.solver.eps_sca},
                 {"subproblem_tol", s.solver.subproblem_tol}};
  j["sampler"] = {{"sample_size", s.sampler.sample_size},
                  {"theta", s.sampler.theta},
                  {"r_threshold", s.sampler.r_threshold},
                  {"max_rounds", s.sampler.max_rounds}};
  j["sweep"] = {{"parameter", s.sweep.parameter},
                {"from", s.sweep.from},
                {"to", s.sweep.to},
                {"points", s.sweep.points}};
  j["algorithms"] = s.algorithms;
  j["variants"] = s.variants;
  j["qam_orders"] = s.qam_orders;
  j["seed"] = s.seed;
  j["realizations"] = s.realizations;
  j["tail_eps"] = s.tail_eps;
  return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  s.name = j.value("name", s.name);
  s.users = j.value("users", s.users);
  s.det.eta = j.value("eta", s.det.eta);
  s.det.n_b = j.value("n_b", s.det.n_b);
  if (j.contains("receiver")) {
    s.det.variant =
        detail::variant_from_string(j["receiver"].value("variant", "ideal_pnrd"));
    s.det.n_max = j["receiver"].value("n_max", std::int64_t{0});
  }
  if (j.contains("channel")) {
    if (j["channel"].contains("explicit_h"))
      s.explicit_h = j["channel"]["explicit_h"].get<std::vector<double>>();
    if (j["channel"].contains("params")) {
      for (const auto& cj : j["channel"]["params"]) {
        ChannelParams c;
        c.sigma_x = cj.value("sigma_x", c.sigma_x);
        c.d = cj.value("d", c.d);
        c.d_t = cj.value("d_t", c.d_t);
        c.d_r = cj.value("d_r", c.d_r);
        c.nu = cj.value("nu", c.nu);
        s.channel.push_back(c);
      }
    }
  }
  if (j.contains("constraints")) {
    s.constraints.max_bs_power =
        j["constraints"].value("max_bs_power", s.constraints.max_bs_power);
    if (j["constraints"].contains("max_user_power"))
      s.constraints.max_user_power =
          j["constraints"]["max_user_power"].get<std::vector<double>>();
  }
  if (s.constraints.max_user_power.empty())
    s.constraints.max_user_power.assign(static_cast<std::size_t>(s.users),
                                        s.constraints.max_bs_power);
  if (j.contains("solver")) {
    s.solver.t_max = j["solver"].value("t_max", s.solver.t_max);
    s.solver.eps_sca = j["solver"].value("eps_sca", s.solver.eps_sca);
    s.solver.subproblem_tol =
        j["solver"].value("subproblem_tol", s.solver.subproblem_tol);
  }
  if (j.contains("sampler")) {
    s.sampler.sample_size = j["sampler"].value("sample_size", std::size_t{0});
    s.sampler.theta = j["sampler"].value("theta", s.sampler.theta);
    s.sampler.r_threshold = j["sampler"].value("r_threshold", s.sampler.r_threshold);
    s.sampler.max_rounds = j["sampler"].value("max_rounds", s.sampler.max_rounds);
  }
  if (j.contains("sweep")) {
    s.sweep.parameter = j["sweep"].value("parameter", s.sweep.parameter);
    s.sweep.from = j["sweep"].value("from", s.sweep.from);
    s.sweep.to = j["sweep"].value("to", s.sweep.to);
    s.sweep.points = j["sweep"].value("points", s.sweep.points);
  }
  if (j.contains("algorithms"))
    s.algorithms = j["algorithms"].get<std::vector<std::string>>();
  if (j.contains("variants"))
    s.variants = j["variants"].get<std::vector<std::string>>();
  if (j.contains("qam_orders"))
    s.qam_orders = j["qam_orders"].get<std::vector<int>>();
  s.seed = j.value("seed", s.seed);
  s.realizations = j.value("realizations", s.realizations);
  s.tail_eps = j.value("tail_eps", s.tail_eps);
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  nlohmann::json j;
  in >> j;
  return scenario_from_json(j);
}

/// Channel gains for the scenario: explicit list, or drawn once from the
/// channel model with per-user streams of the scenario seed.
/// Appends a warning per user whose path loss exceeds 1.
inline std::vector<double> resolve_channel_gains(const Scenario& s,
                                                 std::vector<std::string>* warnings,
                                                 int realization = 0) {
  if (!s.explicit_h.empty()) return s.explicit_h;
  std::vector<double> h(static_cast<std::size_t>(s.users), 1.0);
  if (s.channel.empty()) return h;
  for (int k = 0; k < s.users; ++k) {
    RngStream rng(s.seed,
                  0xC0FFEEULL + 1000003ULL * static_cast<std::uint64_t>(realization) +
                      static_cast<std::uint64_t>(k));
    const auto c = sample_channel(s.channel[static_cast<std::size_t>(k)], rng);
    h[static_cast<std::size_t>(k)] = c.h;
    if (warnings && c.h_l > 1.0) {
      std::ostringstream os;
      os << "path_loss>1 for user " << k << " (h_l=" << c.h_l << ")";
      warnings->push_back(os.str());
    }
  }
  return h;
}

}  // namespace oqc
