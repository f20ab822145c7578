#pragma once
#include <string>

#include "oqc/scenario.hpp"

namespace oqc {

/// Desk-scale experiment presets mirroring the reference studies: baseline
/// comparison (fig2), channel scenarios (fig3), user scaling (fig4),
/// convergence traces (fig5), two-user region (fig6), receiver variants
/// (fig7), capacity limits (fig8), and QAM orders (fig9).
inline Scenario preset_scenario(const std::string& name) {
  Scenario s;
  s.name = name;
  if (name == "fig2") {
    s.users = 4;
    s.det = {0.9, 1.7, ReceiverVariant::ideal_pnrd, 0};
    s.explicit_h = {1.0, 0.6, 0.35, 0.2};
    s.constraints.max_bs_power = 120.0;
    s.constraints.max_user_power = {30.0, 18.0, 10.0, 0.6};
    s.sweep = {"max_bs_power", 10.0, 120.0, 12};
    s.algorithms = {"sca", "oma", "enp", "ia"};
    s.seed = 20101;
  } else if (name == "fig3") {
    s.users = 8;
    s.det = {0.9, 1.7, ReceiverVariant::ideal_pnrd, 0};
    s.channel.clear();
    for (int k = 0; k < 8; ++k) {
      ChannelParams c;
      c.sigma_x = 0.3 + 0.2 * k / 7.0;
      c.d = 50.0 + 30.0 * k / 7.0;
      s.channel.push_back(c);
    }
    s.constraints.max_bs_power = 120.0;
    s.constraints.max_user_power.assign(8, 4.0);
    s.sweep = {"max_bs_power", 10.0, 120.0, 6};
    s.algorithms = {"sca", "enp"};
    s.seed = 20103;
  } else if (name == "fig4") {
    s.users = 8;
    s.det = {0.9, 1.7, ReceiverVariant::ideal_pnrd, 0};
    s.explicit_h = {1.0, 0.8, 0.65, 0.5, 0.4, 0.3, 0.25, 0.2};
    s.constraints.max_bs_power = 120.0;
    s.constraints.max_user_power.assign(8, 2.0);
    s.sweep = {"users", 2.0, 8.0, 7};
    s.algorithms = {"sca", "oma", "enp", "ia"};
    s.seed = 20104;
  } else if (name == "fig5") {
    s.users = 8;
    s.det = {0.9, 1.7, ReceiverVariant::ideal_pnrd, 0};
    s.explicit_h = {1.0, 0.85, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2};
    s.constraints.max_bs_power = 120.0;
    s.constraints.max_user_power.assign(8, 4.0);
    s.sampler.sample_size = 128;
    s.algorithms = {"sampled", "sca"};
    s.seed = 20105;
  } else if (name == "fig6") {
    s.users = 2;
    s.det = {0.9, 1.7, ReceiverVariant::ideal_pnrd, 0};
    s.explicit_h = {1.0, 0.7};
    s.constraints.max_bs_power = 16.0;
    s.constraints.max_user_power = {12.0, 12.0};
    s.seed = 20106;
  } else if (name == "fig7") {
    s.users = 4;
    s.det = {0.9, 1.7, ReceiverVariant::ideal_pnrd, 0};
    s.explicit_h = {1.0, 0.7, 0.5, 0.3};
    s.constraints.max_bs_power = 120.0;
    s.constraints.max_user_power.assign(4, 40.0);
    s.sweep = {"max_bs_power", 5.0, 120.0, 10};
    s.algorithms = {};
    s.variants = {"on_off_kennedy", "finite_pnrd_25", "finite_pnrd_40",
                  "ideal_pnrd"};
    s.seed = 20107;
  } else if (name == "fig8") {
    s.users = 1;
    s.det = {1.0, 1.7, ReceiverVariant::ideal_pnrd, 0};
    s.explicit_h = {1.0};
    s.constraints.max_bs_power = 120.0;
    s.constraints.max_user_power = {120.0};
    s.sweep = {"max_bs_power", 0.0, 120.0, 25};
    s.seed = 20108;
  } else if (name == "fig9") {
    s.users = 2;
    s.det = {0.9, 1.7, ReceiverVariant::ideal_pnrd, 0};
    s.explicit_h = {1.0, 0.8};
    s.constraints.max_bs_power = 60.0;
    s.constraints.max_user_power = {60.0, 60.0};
    s.sweep = {"max_bs_power", 0.0, 60.0, 13};
    s.qam_orders = {4, 16, 64};
    s.seed = 20109;
  } else {
    throw domain_error("unknown preset: " + name);
  }
  return s;
}

}  // namespace oqc
