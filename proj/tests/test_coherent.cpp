#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "oqc/coherent.hpp"
#include "oqc/poisson.hpp"
#include "oqc/rng.hpp"

using namespace oqc;
using Catch::Approx;

TEST_CASE("superposed amplitude sums the on-amplitudes of +1 users") {
  std::vector<UserSignal> sig = {{2.0}, {3.0}};
  SymbolConfig all_minus{{-1, -1}};
  SymbolConfig all_plus{{1, 1}};
  CHECK(superposed_amplitude(all_minus, sig) == 0.0);
  CHECK(superposed_amplitude(all_plus, sig) == Approx(5.0));

  std::vector<UserSignal> three = {{1.0}, {1.0}, {1.0}};
  SymbolConfig mixed{{1, -1, 1}};
  CHECK(superposed_amplitude(mixed, three) == Approx(2.0));

  SymbolConfig wrong{{1, -1}};
  CHECK_THROWS_AS(superposed_amplitude(wrong, three), dimension_error);
}

TEST_CASE("configuration enumeration is stable and complete") {
  const std::vector<double> amps = {2.0, 3.0, 7.0};
  const auto all = enumerate_amplitudes(amps);
  REQUIRE(all.size() == 8);
  // cross-check against the per-config operation
  for (std::uint64_t i = 0; i < all.size(); ++i) {
    const auto cfg = SymbolConfig::from_index(i, 3);
    std::vector<UserSignal> sig;
    for (double a : amps) sig.push_back({a});
    CHECK(all[i] == Approx(superposed_amplitude(cfg, sig)).margin(1e-12));
  }
  // distinct values for generic amplitudes
  auto sorted = all;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
}

TEST_CASE("detection pmf closed-form values and domain checks") {
  DetectionConfig det{0.9, 1.7, ReceiverVariant::ideal_pnrd, 0};
  CHECK(detection_pmf(0.0, det, 0) == Approx(std::exp(-1.7)).epsilon(1e-12));
  CHECK(detection_pmf(0.0, det, 0) == Approx(0.18268352405273466).epsilon(1e-12));
  CHECK_THROWS_AS(detection_pmf(-1.0, det, 0), domain_error);
  CHECK_THROWS_AS(detection_pmf(1.0, det, -1), domain_error);

  // eta = 0: pmf independent of |Phi|^2
  DetectionConfig blind{0.0, 1.7, ReceiverVariant::ideal_pnrd, 0};
  for (std::int64_t y = 0; y < 12; ++y)
    CHECK(detection_pmf(0.0, blind, y) == Approx(detection_pmf(100.0, blind, y)));

  // lambda = 0 at y = 0 has probability 1
  DetectionConfig silent{0.5, 0.0, ReceiverVariant::ideal_pnrd, 0};
  CHECK(detection_pmf(0.0, silent, 0) == 1.0);
}

TEST_CASE("detection pmf normalizes to 1 for every variant") {
  const double phi2 = 7.3;
  for (auto variant : {ReceiverVariant::ideal_pnrd, ReceiverVariant::finite_pnrd,
                       ReceiverVariant::on_off_kennedy}) {
    DetectionConfig det{0.9, 1.7, variant, 9};
    const double lambda = detection_rate(phi2, det);
    const std::int64_t ny = outcome_count(lambda, det, 1e-14);
    double mass = 0.0;
    for (std::int64_t y = 0; y < ny; ++y) mass += detection_pmf(phi2, det, y);
    if (variant == ReceiverVariant::ideal_pnrd)
      CHECK(mass == Approx(1.0).margin(1e-12));
    else
      CHECK(mass == Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("finite pnrd equals ideal below N_max and holds the tail at N_max") {
  DetectionConfig ideal{0.9, 1.7, ReceiverVariant::ideal_pnrd, 0};
  DetectionConfig finite{0.9, 1.7, ReceiverVariant::finite_pnrd, 6};
  const double phi2 = 4.0;
  for (std::int64_t y = 0; y < 6; ++y)
    CHECK(detection_pmf(phi2, finite, y) == Approx(detection_pmf(phi2, ideal, y)));
  double tail = 0.0;
  for (std::int64_t y = 6; y < 200; ++y) tail += detection_pmf(phi2, ideal, y);
  CHECK(detection_pmf(phi2, finite, 6) == Approx(tail).margin(1e-12));
  CHECK_THROWS_AS(detection_pmf(1.0, DetectionConfig{0.9, 1.7, ReceiverVariant::finite_pnrd, 0}, 0),
                  domain_error);
}

TEST_CASE("poisson log pmf matches high-precision references") {
  // reference values from a 50-digit evaluation of the pmf
  struct Ref { double lambda; std::int64_t y; double value; };
  const Ref refs[] = {
      {1e4, 10000, 0.0039893895589628256487},
      {1e4, 9900, 0.0024278067065407016904},
      {1e4, 10710, 7.7599959275866796122e-14},
      {0.5, 3, 0.012636055410679862992},
      {1.7, 0, 0.18268352405273465834},
      {123.456, 100, 0.0036724589515185455965},
      {123.456, 200, 6.1559080990250429359e-11},
  };
  for (const auto& r : refs)
    CHECK(poisson_pmf(r.y, r.lambda) == Approx(r.value).epsilon(1e-12));
}

TEST_CASE("truncation bound: edge cases, tail oracle, monotonicity") {
  CHECK(truncation_bound(0.0, 1e-9) == 0);
  CHECK_THROWS_AS(truncation_bound(1.0, 0.0), domain_error);
  CHECK_THROWS_AS(truncation_bound(1.0, 1.5), domain_error);

  // exhaustive tail-sum oracle at lambda = 10, eps = 1e-12
  const double lambda = 10.0;
  const double eps = 1e-12;
  const std::int64_t ymax = truncation_bound(lambda, eps);
  auto tail_beyond = [&](std::int64_t y0) {
    double t = 0.0;
    for (std::int64_t y = y0 + 1; y < 400; ++y) t += poisson_pmf(y, lambda);
    return t;
  };
  CHECK(tail_beyond(ymax) <= eps);
  CHECK(tail_beyond(ymax - 1) > eps);

  CHECK(truncation_bound(100.0, 1e-12) >= truncation_bound(10.0, 1e-12));
  CHECK(truncation_bound(10.0, 1e-14) >= truncation_bound(10.0, 1e-6));
}

TEST_CASE("path loss follows the aperture formula") {
  ChannelParams p;
  p.d_t = 0.1;
  p.d_r = 1.0;
  p.nu = 1550e-9;
  p.d = 50.0;
  const double g = std::numbers::pi * 0.1 * 1.0 / (2.0 * 1550e-9);
  CHECK(path_loss(p) == Approx(g * g / 2500.0).epsilon(1e-14));

  // inverse-square law
  ChannelParams p2 = p;
  p2.d = 100.0;
  CHECK(path_loss(p2) == Approx(path_loss(p) / 4.0).epsilon(1e-14));

  // aperture symmetry
  ChannelParams p3 = p;
  std::swap(p3.d_t, p3.d_r);
  CHECK(path_loss(p3) == Approx(path_loss(p)).epsilon(1e-14));

  ChannelParams bad = p;
  bad.d = 0.0;
  CHECK_THROWS_AS(path_loss(bad), domain_error);
}

TEST_CASE("turbulence samples are positive with unit mean") {
  ChannelParams p;
  p.sigma_x = 0.3;
  RngStream rng(12345, 7);
  const int n = 1'000'000;
  double sum = 0.0, sum_log = 0.0, sum_log_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double h = sample_turbulence(p, rng);
    REQUIRE(h > 0.0);
    sum += h;
    const double l = std::log(h);
    sum_log += l;
    sum_log_sq += l * l;
  }
  const double mean = sum / n;
  CHECK(mean > 0.99);
  CHECK(mean < 1.01);
  const double var_log = sum_log_sq / n - (sum_log / n) * (sum_log / n);
  CHECK(var_log > 0.98 * 0.09);
  CHECK(var_log < 1.02 * 0.09);
}

TEST_CASE("rng streams are deterministic and independent of construction order") {
  RngStream a(42, 1), b(42, 2), a2(42, 1);
  std::vector<std::uint64_t> va, vb, va2;
  for (int i = 0; i < 16; ++i) {
    va.push_back(a.next_u64());
    vb.push_back(b.next_u64());
  }
  for (int i = 0; i < 16; ++i) va2.push_back(a2.next_u64());
  CHECK(va == va2);
  CHECK(va != vb);
}
