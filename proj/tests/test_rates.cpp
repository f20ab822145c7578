#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "oqc/quadrature.hpp"
#include "oqc/rates.hpp"

using namespace oqc;
using Catch::Approx;

namespace {
DetectionConfig det_of(double eta, double nb) {
  return {eta, nb, ReceiverVariant::ideal_pnrd, 0};
}
}  // namespace

TEST_CASE("exact sum-rate degenerate cases") {
  const DetectionConfig det = det_of(0.9, 1.7);
  const double zero[1] = {0.0};
  CHECK(exact_sum_rate(zero, det) == Approx(0.0).margin(1e-12));

  const double amps[2] = {2.0, 1.0};
  CHECK(exact_sum_rate(amps, det_of(0.0, 1.7)) == Approx(0.0).margin(1e-12));

  const std::vector<double> too_many(15, 1.0);
  CHECK_THROWS_AS(exact_sum_rate(too_many, det), capacity_error);
}

TEST_CASE("exact sum-rate agrees with the entropy-definition oracle") {
  std::mt19937_64 gen(321);
  std::uniform_real_distribution<double> amp(0.0, 5.0), eta(0.5, 1.0), nb(0.5, 5.0);
  std::uniform_int_distribution<int> ks(1, 3);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int K = ks(gen);
    std::vector<double> a(static_cast<std::size_t>(K));
    for (auto& v : a) v = amp(gen);
    const auto det = det_of(eta(gen), nb(gen));
    const double d = std::abs(exact_sum_rate(a, det) - entropy_oracle_sum_rate(a, det));
    worst = std::max(worst, d);
  }
  CHECK(worst < 1e-9);

  // K = 2 spot instance from the operation contract
  const double amps[2] = {3.0, 2.0};
  CHECK(exact_sum_rate(amps, det_of(0.9, 1.7)) ==
        Approx(entropy_oracle_sum_rate(amps, det_of(0.9, 1.7))).margin(1e-9));
}

TEST_CASE("entropy oracle limits") {
  // near-disjoint Poisson supports carry the full bit
  const double big[1] = {12.0};
  CHECK(entropy_oracle_sum_rate(big, det_of(1.0, 0.1)) == Approx(1.0).margin(1e-3));
  // degenerate distribution carries nothing
  const double none[1] = {0.0};
  CHECK(entropy_oracle_sum_rate(none, det_of(0.9, 0.0)) == Approx(0.0).margin(1e-12));
}

TEST_CASE("gaussian pmf: normalization, proximity to Poisson, mode") {
  const auto det = det_of(1.0, 0.0);
  const double phi2 = 200.0;
  // integrate over a wide window with the adaptive rule
  const double mass = integrate(
      [&](double y) { return gaussian_pmf(phi2, det, y); }, 200.0 - 300.0,
      200.0 + 300.0, 1e-12);
  CHECK(mass == Approx(1.0).margin(1e-10));

  // total-variation distance to Poisson(200) sampled on the integers
  double tv = 0.0;
  for (std::int64_t y = 0; y < 500; ++y)
    tv += 0.5 * std::abs(poisson_pmf(y, 200.0) - gaussian_pmf(phi2, det, y));
  CHECK(tv <= 0.05);

  CHECK(gaussian_pmf(phi2, det, 200.0) > gaussian_pmf(phi2, det, 199.0));
  CHECK(gaussian_pmf(phi2, det, 200.0) > gaussian_pmf(phi2, det, 201.0));
  CHECK_THROWS_AS(gaussian_pmf(0.0, det, 0.0), domain_error);
}

TEST_CASE("omega terms: zeros, noise scaling, K=1 symmetry, antisymmetry") {
  const double zero[2] = {0.0, 0.0};
  auto [wl0, wu0] = omega_terms(zero, det_of(0.9, 1.7));
  for (double w : wl0) CHECK(w == 0.0);
  for (double w : wu0) CHECK(w == 0.0);

  const double amps[2] = {2.0, 1.0};
  auto [wl_small, wu_small] = omega_terms(amps, det_of(0.9, 1.7));
  auto [wl_big, wu_big] = omega_terms(amps, det_of(0.9, 1e6));
  for (std::size_t i = 0; i < wl_big.size(); ++i)
    CHECK(std::abs(wl_big[i]) < std::abs(wl_small[i]) * 1e-2);

  const double one[1] = {1.5};
  auto [wl1, wu1] = omega_terms(one, det_of(0.9, 1.7));
  REQUIRE(wl1.size() == 2);
  CHECK(wl1[0] == Approx(-wl1[1]));

  // sum_j (T - 2|Phi_j|^2) = T (2^K - 2)
  const double a3[3] = {1.0, 2.0, 0.5};
  auto [wl3, wu3] = omega_terms(a3, det_of(0.8, 2.0));
  const auto all = enumerate_amplitudes(a3);
  double total = 0.0;
  for (double a : all) total += a * a;
  double sum_w = 0.0;
  for (double w : wl3) sum_w += w;
  const double c = 0.8 / (2.0 * std::sqrt(2.0 * 2.0));
  CHECK(sum_w == Approx(c * total * (8.0 - 2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(omega_terms(amps, det_of(0.9, 0.0)), domain_error);
}

TEST_CASE("f_bound: degenerate omegas, permutation symmetry, noise limit") {
  // omegas all zero: ln{sqrt(pi/2) (sum_i C(N,i))^2} + xi + tail, handled in
  // log domain: sum_{i=1..N} C(N,i) = 2^N - 1
  const std::size_t n = 4;
  const std::vector<double> zeros(n, 0.0);
  const double expected =
      0.5 * std::log(std::numbers::pi / 2.0) + 2.0 * std::log(std::pow(2.0, 4) - 1.0);
  CHECK(f_bound(zeros, 0.0, 0.0) == Approx(expected).epsilon(1e-12));

  std::vector<double> w = {0.3, -0.2, 0.7, 0.05};
  std::vector<double> wp = {0.7, 0.3, 0.05, -0.2};
  CHECK(f_bound(w, 1.0, 2.0) == Approx(f_bound(wp, 1.0, 2.0)).epsilon(1e-12));

  const std::vector<double> bad = {std::nan("")};
  CHECK_THROWS_AS(f_bound(bad, 0.0, 0.0), domain_error);

  // both bounds' f converge toward f(0) as noise grows (fixed amplitudes)
  const double amps[2] = {2.0, 1.0};
  auto distance_to_f0 = [&](double nb) {
    const auto det = det_of(0.9, nb);
    auto [wl, wu] = omega_terms(amps, det);
    const auto [xi, xi2] = calibrate_xi(4);
    const double tail = tail_term_low(4, nb);
    const double f0 = f_bound(std::vector<double>(4, 0.0), xi, tail);
    return std::abs(f_bound(wl, xi, tail) - f0);
  };
  CHECK(distance_to_f0(100.0) < distance_to_f0(10.0));
  CHECK(distance_to_f0(10.0) < distance_to_f0(1.7));
}

TEST_CASE("xi calibration: quadrature oracle and closed-form quality") {
  // g(0) has the closed form N sqrt(pi) (ln N - 1/2); quadrature must hit it
  for (std::size_t n : {2u, 4u, 8u, 16u}) {
    const std::vector<double> zeros(n, 0.0);
    const double analytic =
        n * std::sqrt(std::numbers::pi) * (std::log(double(n)) - 0.5);
    CHECK(g_quadrature(zeros) == Approx(analytic).epsilon(1e-10));
  }
  // frozen quadrature references (independent integrator)
  {
    const std::vector<double> w = {0.05, -0.03};
    CHECK(g_quadrature(w) == Approx(0.6790261313078617).epsilon(1e-9));
    const std::vector<double> w4 = {0.1, 0.0, -0.05, 0.02};
    CHECK(g_quadrature(w4) == Approx(6.263030197855407).epsilon(1e-9));
  }

  // calibrated closed form is exact at the probe point
  for (std::size_t n : {2u, 4u, 8u}) {
    const auto [xi, xi_up] = calibrate_xi(n);
    CHECK(xi == xi_up);
    const std::vector<double> zeros(n, 0.0);
    CHECK(f_bound(zeros, xi, 0.0) == Approx(g_quadrature(zeros)).epsilon(1e-10));
  }

  // within 1e-2 relative of quadrature for small omegas (K = 2 and 3)
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (std::size_t n : {4u, 8u}) {
    const auto [xi, _] = calibrate_xi(n);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> w(n);
      for (auto& v : w) v = u(gen);
      const double approx_g = f_bound(w, xi, 0.0);
      const double exact_g = g_quadrature(w);
      worst = std::max(worst, std::abs(approx_g - exact_g) / std::abs(exact_g));
    }
    CHECK(worst <= 1e-2);
  }
}

TEST_CASE("bounds: strict ordering, exact midpoint, noise-gap decay") {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> amp(0.0, 5.0), eta(0.5, 1.0), nb(0.5, 5.0);
  std::uniform_int_distribution<int> ks(1, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const int K = ks(gen);
    std::vector<double> a(static_cast<std::size_t>(K));
    for (auto& v : a) v = amp(gen);
    const auto rb = bounds_and_asymptotic(a, det_of(eta(gen), nb(gen)));
    CHECK(rb.lower_ga < rb.asymptotic);
    CHECK(rb.asymptotic < rb.upper_ga);
    CHECK(rb.asymptotic == Approx(0.5 * (rb.lower_ga + rb.upper_ga)).margin(0.0));
  }

  const double amps[2] = {2.0, 1.0};
  double prev_gap = std::numeric_limits<double>::infinity();
  for (double noise : {1.7, 10.0, 100.0, 1000.0}) {
    const auto rb = bounds_and_asymptotic(amps, det_of(0.9, noise));
    const double gap = rb.upper_ga - rb.lower_ga;
    CHECK(gap < prev_gap);
    prev_gap = gap;
    const double limit = asymptotic_limit_value(amps, det_of(0.9, noise));
    if (noise == 1000.0) {
      CHECK(std::abs(rb.lower_ga - limit) < 1e-2);
      CHECK(std::abs(rb.upper_ga - limit) < 1e-2);
    }
  }

  CHECK_THROWS_AS(bounds_and_asymptotic(amps, det_of(0.9, 0.0)), domain_error);
}

TEST_CASE("tightening the truncation never moves the exact rate materially") {
  const double amps[2] = {2.0, 1.5};
  const auto det = det_of(0.9, 1.7);
  const double loose = exact_sum_rate(amps, det, 1e-8);
  const double tight = exact_sum_rate(amps, det, 1e-13);
  const double lam_max = detection_rate(3.5 * 3.5, det);
  const double ymax = static_cast<double>(truncation_bound(lam_max, 1e-8));
  CHECK(std::abs(loose - tight) <= 10.0 * 1e-8 * ymax);
}

TEST_CASE("receiver coarsening cannot add information") {
  const double amps[2] = {2.5, 1.5};
  DetectionConfig ideal = det_of(0.9, 1.7);
  DetectionConfig f25 = ideal, f40 = ideal, kennedy = ideal;
  f25.variant = ReceiverVariant::finite_pnrd;
  f25.n_max = 25;
  f40.variant = ReceiverVariant::finite_pnrd;
  f40.n_max = 40;
  kennedy.variant = ReceiverVariant::on_off_kennedy;
  const double r_ideal = exact_sum_rate(amps, ideal);
  const double r_f40 = exact_sum_rate(amps, f40);
  const double r_f25 = exact_sum_rate(amps, f25);
  const double r_ken = exact_sum_rate(amps, kennedy);
  CHECK(r_ken <= r_f25 + 1e-12);
  CHECK(r_f25 <= r_f40 + 1e-12);
  CHECK(r_f40 <= r_ideal + 1e-12);
}

TEST_CASE("holevo information of the binary ensemble") {
  CHECK(holevo_binary(0.0) == 0.0);
  CHECK(holevo_binary(50.0) == Approx(1.0).margin(1e-10));
  CHECK(holevo_binary(0.25) == Approx(0.715).margin(5e-4));
  CHECK_THROWS_AS(holevo_binary(-1.0), domain_error);
}

TEST_CASE("reference capacities: zero power, ordering, one-nat gap") {
  const auto [sql0, sh0] = reference_capacities(0.0, 1.0);
  CHECK(sql0 == 0.0);
  CHECK(sh0 == 0.0);
  CHECK(holevo_gaussian(0.0) == 0.0);

  for (double p : {0.1, 1.0, 10.0, 100.0, 1000.0}) {
    const auto [sql, sh] = reference_capacities(p, 1.0);
    CHECK(holevo_gaussian(p) >= sql);
  }
  const double gap_nats =
      (holevo_gaussian(100.0) - reference_capacities(100.0, 1.0).first) * kLn2;
  CHECK(gap_nats == Approx(1.0).margin(0.05));
}
