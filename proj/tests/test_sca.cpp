#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "oqc/rates.hpp"
#include "oqc/sca.hpp"

using namespace oqc;
using Catch::Approx;

namespace {
const DetectionConfig kDet{0.9, 1.7, ReceiverVariant::ideal_pnrd, 0};

PowerConstraints caps2(double bs, double c1, double c2) {
  PowerConstraints c;
  c.max_bs_power = bs;
  c.max_user_power = {c1, c2};
  return c;
}
}  // namespace

TEST_CASE("surrogate_phi: anchor value, minorization, gradient") {
  const double hc = 2.0;  // 2^{K-1} for K = 2
  CHECK(surrogate_phi(3.0, 3.0, hc) == Approx(-0.5 * std::log(3.0) - hc));

  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.1, 50.0);
  for (int i = 0; i < 100; ++i) {
    const double mu = u(gen), mu_prev = u(gen);
    const double truth = -0.5 * std::log(mu) - hc;
    CHECK(surrogate_phi(mu, mu_prev, hc) <= truth + 1e-12);
  }

  // slope at the anchor is -1/(2 mu_prev), checked by central differences
  const double mu_prev = 7.0, h = 1e-5;
  const double fd = (surrogate_phi(mu_prev + h, mu_prev, hc) -
                     surrogate_phi(mu_prev - h, mu_prev, hc)) /
                    (2.0 * h);
  CHECK(fd == Approx(-1.0 / (2.0 * mu_prev)).epsilon(1e-6));

  CHECK_THROWS_AS(surrogate_phi(-1.0, 1.0, hc), domain_error);
}

TEST_CASE("surrogate_h: anchor value, slope, minorization on a grid") {
  const int K = 3;
  const double hc = 4.0;
  const double up = 25.0;
  CHECK(surrogate_h(up, up, K) == Approx(h_of_upsilon(up, hc)));

  const double h = 1e-5;
  const double fd = (surrogate_h(up + h, up, K) - surrogate_h(up - h, up, K)) / (2.0 * h);
  CHECK(fd == Approx(-hc / up).epsilon(1e-8));

  // h is convex in upsilon, so its tangent stays below: h >= h_SCA
  for (double anchor : {12.0, 40.0, 200.0})
    for (double v = 5.0; v < 1000.0; v *= 1.37)
      CHECK(h_of_upsilon(v, hc) >= surrogate_h(v, anchor, K) - 1e-12);

  CHECK_THROWS_AS(surrogate_h(1.0, 0.0, K), domain_error);
}

TEST_CASE("objective gradient matches finite differences") {
  const auto model = GaObjective::full(3, kDet);
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.05, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x = {u(gen), u(gen), u(gen)};
    std::vector<double> grad;
    model.value(x, &grad);
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double h = 1e-6 * (1.0 + x[k]);
      auto xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      const double fd = (model.value(xp) - model.value(xm)) / (2.0 * h);
      CHECK(grad[k] == Approx(fd).epsilon(2e-5).margin(1e-8));
    }
    // surrogate gradient at the anchor equals the true gradient
    const auto state = model.make_state(x, 1);
    std::vector<double> sgrad;
    model.surrogate(x, state, &sgrad);
    for (std::size_t k = 0; k < x.size(); ++k)
      CHECK(sgrad[k] == Approx(grad[k]).epsilon(1e-9).margin(1e-12));
  }
}

TEST_CASE("surrogate objective: anchor equality, minorization, zero point") {
  const auto model = GaObjective::full(2, kDet);
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> u(0.0, 3.0);

  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> anchor = {u(gen) + 1e-3, u(gen) + 1e-3};
    std::vector<double> probe = {u(gen) + 1e-3, u(gen) + 1e-3};
    const auto state = model.make_state(anchor, 1);
    // equality at the anchor: all Taylor terms vanish
    CHECK(model.surrogate(anchor, state) ==
          Approx(model.value(anchor)).margin(1e-10));
    // minorization everywhere feasible
    CHECK(model.surrogate(probe, state) <= model.value(probe) + 1e-9);
  }

  // anchor value equals the rate module's asymptotic approximation
  const std::vector<double> amps = {1.3, 0.6};
  const auto rb = bounds_and_asymptotic(amps, kDet);
  const auto state = model.make_state(amps, 1);
  CHECK(model.value(amps) == Approx(rb.asymptotic).margin(1e-10));
  CHECK(model.surrogate(amps, state) == Approx(rb.asymptotic).margin(1e-10));

  // zero allocation: direct formula with all configs at the noise floor
  const std::vector<double> zero = {0.0, 0.0};
  const std::size_t n = 4;
  const auto [xi, _] = calibrate_xi(n);
  const double phi_pot =
      -0.5 * (n * std::log(2.0 * std::numbers::pi) + std::log(kDet.n_b) +
              n * std::log(kDet.n_b)) -
      0.5 * n;
  const double f0 = f_bound(std::vector<double>(n, 0.0), xi,
                            tail_term_low(n, kDet.n_b));
  const double expected = 2.0 + (phi_pot - f0) / (n * kLn2);
  CHECK(model.value(zero) == Approx(expected).margin(1e-12));
}

TEST_CASE("subproblem: K=1 golden-section oracle, feasibility, ascent") {
  const auto model = GaObjective::full(1, kDet);
  PowerConstraints c;
  c.max_bs_power = 30.0;
  c.max_user_power = {20.0};

  PowerAllocation warm;
  warm.powers = {2.0};
  const auto state = model.make_state(warm.amplitudes(), 1);

  SolveDiagnostics diag;
  const auto sol = solve_subproblem_p2(model, state, c, SolverConfig{}, warm, &diag);

  // golden-section oracle on the same surrogate over the feasible segment
  auto f1 = [&](double a) {
    const std::vector<double> x = {a};
    return model.surrogate(x, state);
  };
  double lo = 0.0, hi = std::min(std::sqrt(20.0), std::sqrt(30.0));
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a1 = hi - gr * (hi - lo), a2 = lo + gr * (hi - lo);
  for (int i = 0; i < 200; ++i) {
    if (f1(a1) < f1(a2)) {
      lo = a1;
      a1 = a2;
      a2 = lo + gr * (hi - lo);
    } else {
      hi = a2;
      a2 = a1;
      a1 = hi - gr * (hi - lo);
    }
  }
  const double oracle = f1(0.5 * (lo + hi));
  const double solved = model.surrogate(sol.amplitudes(), state);
  CHECK(solved == Approx(oracle).margin(1e-6));

  // feasibility and ascent contracts
  CHECK(sol.feasible(c, 1e-9));
  CHECK(solved >= model.surrogate(warm.amplitudes(), state) - 1e-12);
}

TEST_CASE("allocate_sca: monotone trace, grid oracle, KKT residual") {
  const auto c = caps2(60.0, 40.0, 20.0);
  const std::vector<double> h = {1.0, 0.8};
  SolverConfig cfg;
  const auto res = allocate_sca(kDet, c, h, cfg);

  for (std::size_t i = 1; i < res.trace.size(); ++i)
    CHECK(res.trace[i] >= res.trace[i - 1] - 1e-12);
  const double terminal_gain =
      res.trace.size() > 1
          ? res.trace.back() - res.trace[res.trace.size() - 2]
          : 0.0;
  CHECK(terminal_gain <= cfg.eps_sca + 1e-12);
  CHECK(res.allocation.feasible(c, 1e-9));
  CHECK(res.diagnostics.kkt_residual <= 1e-6);

  // 200 x 200 exhaustive feasible grid on the asymptotic objective
  const auto model = GaObjective::full(2, kDet);
  double grid_best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 200; ++i)
    for (int j = 0; j < 200; ++j) {
      const double p1 = 40.0 * i / 199.0;
      const double p2 = 20.0 * j / 199.0;
      const std::vector<double> x = {std::sqrt(p1), std::sqrt(p2)};
      if ((x[0] + x[1]) * (x[0] + x[1]) > 60.0) continue;
      grid_best = std::max(grid_best, model.value(x));
    }
  const double achieved = res.trace.back();
  CHECK(achieved >= grid_best - 0.01 * std::abs(grid_best));
}

TEST_CASE("allocate_sca: symmetric instance and permutation equivariance") {
  // Equal gains and caps. The rank-attached combinatorial weights give the
  // objective a shallow crease at exact ties (the symmetric point loses by
  // ~3e-8 bits to a pair of mirror optima ~3e-3 apart), so equality holds at
  // that scale, not to machine precision. Swapping users must leave the
  // achieved value unchanged exactly.
  const auto c = caps2(60.0, 20.0, 20.0);
  const std::vector<double> h = {0.7, 0.7};
  const auto res = allocate_sca(kDet, c, h, SolverConfig{});
  CHECK(std::abs(res.allocation.powers[0] - res.allocation.powers[1]) < 1e-2);
  const auto model = GaObjective::full(2, kDet);
  const auto amps = res.allocation.amplitudes();
  const std::vector<double> swapped = {amps[1], amps[0]};
  CHECK(model.value(amps) == Approx(model.value(swapped)).margin(1e-14));

  // permuting (h, caps) permutes the allocation identically
  PowerConstraints ca;
  ca.max_bs_power = 50.0;
  ca.max_user_power = {5.0, 20.0};
  const std::vector<double> ha = {0.3, 1.0};
  const auto ra = allocate_sca(kDet, ca, ha, SolverConfig{});

  PowerConstraints cb;
  cb.max_bs_power = 50.0;
  cb.max_user_power = {20.0, 5.0};
  const std::vector<double> hb = {1.0, 0.3};
  const auto rb = allocate_sca(kDet, cb, hb, SolverConfig{});

  CHECK(ra.allocation.powers[0] == Approx(rb.allocation.powers[1]).margin(1e-9));
  CHECK(ra.allocation.powers[1] == Approx(rb.allocation.powers[0]).margin(1e-9));
}

TEST_CASE("baseline_enp: equal powers at the binding constraint") {
  PowerConstraints c;
  c.max_bs_power = 120.0;
  c.max_user_power = {30.0, 18.0, 10.0, 0.6};
  const auto a = baseline_enp(c);
  for (double p : a.powers) CHECK(p == Approx(a.powers[0]));
  CHECK(a.powers[0] == Approx(0.6));  // weakest user cap binds
  CHECK(a.feasible(c, 1e-12));

  // BS cap binding when user caps are generous
  PowerConstraints c2;
  c2.max_bs_power = 16.0;
  c2.max_user_power = {100.0, 100.0};
  const auto a2 = baseline_enp(c2);
  CHECK(a2.powers[0] == Approx(4.0));  // (2 sqrt(p))^2 = 16
}

TEST_CASE("baseline_oma: proportional split and two-user dominance") {
  PowerConstraints c;
  c.max_bs_power = 12.96;
  c.max_user_power = {20.0, 20.0};
  const std::vector<double> h_eq = {0.5, 0.5};
  auto [alloc_eq, bits_eq] = baseline_oma(h_eq, c, kDet);
  CHECK(alloc_eq.powers[0] == Approx(alloc_eq.powers[1]));

  const std::vector<double> h = {1.0, 0.7};
  auto [alloc, bits] = baseline_oma(h, c, kDet);
  CHECK(alloc.powers[0] + alloc.powers[1] == Approx(12.96).epsilon(1e-12));

  // NOMA exact sum-rate at the same proportional powers dominates OMA
  const auto amps = alloc.amplitudes();
  const double noma = exact_sum_rate(amps, kDet);
  CHECK(bits <= noma + 1e-9);
}

TEST_CASE("baseline_ia: single user reduces to sca; interference accounting") {
  PowerConstraints c;
  c.max_bs_power = 30.0;
  c.max_user_power = {25.0};
  const std::vector<double> h = {1.0};
  const auto sca = allocate_sca(kDet, c, h, SolverConfig{});
  auto [ia, ia_bits] = baseline_ia(kDet, c, SolverConfig{});
  // identical objective, identical solver: same optimum up to solver slack
  CHECK(ia.allocation.powers[0] ==
        Approx(sca.allocation.powers[0]).margin(1e-3));
  CHECK(ia_bits == Approx(sca.trace.back()).margin(1e-5));

  // with all other users at zero power the degraded noise equals n_b
  // (structural identity of the interference term)
  PowerConstraints c2;
  c2.max_bs_power = 30.0;
  c2.max_user_power = {10.0, 10.0};
  auto [ia2, bits2] = baseline_ia(kDet, c2, SolverConfig{});
  CHECK(ia2.allocation.feasible(c2, 1e-9));

  // IA cannot beat the SIC-based allocation in the common currency
  const std::vector<double> h2 = {1.0, 0.6};
  const auto sca2 = allocate_sca(kDet, c2, h2, SolverConfig{});
  const auto model = GaObjective::full(2, kDet);
  CHECK(model.value(ia2.allocation.amplitudes()) <=
        model.value(sca2.allocation.amplitudes()) + 1e-9);
}
