#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "laacoex/laa_chain.hpp"
#include "laacoex/rng.hpp"
#include "oracles.hpp"

using namespace laacoex;

namespace {

SystemConfig small_config(int w0, int m, int big_m) {
  SystemConfig cfg;
  cfg.cw_min = w0;
  cfg.m = m;
  cfg.n_sf = 1;
  cfg.sf_slot = big_m;
  cfg.mcot_slots = big_m;
  cfg.rsf = 1;
  cfg.t_wifi = 4;
  return cfg;
}

double normalization_residual(const SystemConfig& cfg, const LaaChainSolution& sol) {
  double total = 0.0;
  for (int i = 0; i < sol.num_stages(); ++i) {
    total += cfg.mcot_slots * sol.b_tx[i];
    for (double b : sol.b_backoff[i]) total += b;
  }
  return std::abs(total - 1.0);
}

}  // namespace

TEST_CASE("anchor mass and transmit probability, no doubling, idle channel") {
  const auto cfg = small_config(16, 6, 4);
  const auto sol = solve_closed_form(cfg, 0.0, 0.0);
  CHECK(sol.b00_1 == doctest::Approx(2.0 / 23).epsilon(1e-14));
  CHECK(sol.tau_l == doctest::Approx(8.0 / 23).epsilon(1e-14));
  // No doubling: all mass stays in stage 0.
  for (int i = 1; i < sol.num_stages(); ++i) CHECK(sol.b_tx[i] == 0.0);
}

TEST_CASE("rejects busy probability of one") {
  const auto cfg = small_config(4, 1, 10);
  CHECK_THROWS_AS(solve_closed_form(cfg, 1.0, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(solve_closed_form(cfg, -0.1, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(solve_closed_form(cfg, 0.2, 1.5), std::invalid_argument);
}

TEST_CASE("closed form matches the dense stationary solve") {
  const auto cfg = small_config(4, 1, 10);
  const auto sol = solve_closed_form(cfg, 0.2, 0.3);
  const auto oracle = testing::DenseLaaChain::solve(cfg, 0.2, 0.3);
  CHECK(std::abs(sol.tau_l - oracle.tau_l) < 1e-10);
  for (int i = 0; i < sol.num_stages(); ++i) {
    for (int j = 1; j <= cfg.mcot_slots; ++j) {
      CHECK(std::abs(sol.b_tx[i] - oracle.transmit.at({i, j})) < 1e-10);
    }
    for (int k = 1; k < cfg.window(i); ++k) {
      CHECK(std::abs(sol.b_backoff[i][k - 1] - oracle.backoff.at({i, k})) < 1e-10);
    }
  }
}

TEST_CASE("closed form matches dense solve over random parameters") {
  SplitMix64 rng(404);
  const auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng.next() >> 11) * 0x1.0p-53);
  };
  for (int trial = 0; trial < 25; ++trial) {
    const int w0 = 1 << (1 + rng.next() % 3);         // 2, 4, 8
    const int m = static_cast<int>(rng.next() % 3);   // 0..2
    const int big_m = 4 + static_cast<int>(rng.next() % 17);
    const double p_b = uniform(0.0, 0.9);
    const double p_d = uniform(0.0, 0.9);
    const auto cfg = small_config(w0, m, big_m);
    const auto sol = solve_closed_form(cfg, p_b, p_d);
    const auto oracle = testing::DenseLaaChain::solve(cfg, p_b, p_d);
    REQUIRE(std::abs(sol.tau_l - oracle.tau_l) < 1e-10);
    REQUIRE(normalization_residual(cfg, sol) < 1e-12);
  }
}

TEST_CASE("singular points of the geometric sums are exact") {
  const auto cfg = small_config(8, 2, 12);
  for (const double p_d : {0.5, 1.0}) {
    const auto sol = solve_closed_form(cfg, 0.1, p_d);
    const auto oracle = testing::DenseLaaChain::solve(cfg, 0.1, p_d);
    CHECK(std::abs(sol.tau_l - oracle.tau_l) < 1e-12);
    CHECK(normalization_residual(cfg, sol) < 1e-12);
  }
}

TEST_CASE("stage occupancy at the MCOT end") {
  const auto cfg = small_config(4, 1, 10);

  auto sol = solve_closed_form(cfg, 0.0, 0.0);
  auto ps = stage_occupancy_at_mcot_end(sol);
  CHECK(ps[0] == 1.0);
  CHECK(ps[1] == 0.0);
  CHECK(ps[2] == 0.0);

  sol = solve_closed_form(cfg, 0.0, 1.0);
  ps = stage_occupancy_at_mcot_end(sol);
  for (double p : ps) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-14));

  sol = solve_closed_form(cfg, 0.0, 0.5);
  ps = stage_occupancy_at_mcot_end(sol);
  CHECK(ps[0] == doctest::Approx(4.0 / 7).epsilon(1e-14));
  CHECK(ps[1] == doctest::Approx(2.0 / 7).epsilon(1e-14));
  CHECK(ps[2] == doctest::Approx(1.0 / 7).epsilon(1e-14));
}

TEST_CASE("probability the aggregated counter is at its last decrement") {
  auto cfg = small_config(16, 1, 10);
  auto sol = solve_closed_form(cfg, 0.4, 0.2);
  CHECK(bc_one_ratio(sol, 0) == doctest::Approx(1.0 / 8).epsilon(1e-14));

  cfg = small_config(2, 1, 10);
  sol = solve_closed_form(cfg, 0.4, 0.2);
  CHECK(bc_one_ratio(sol, 0) == doctest::Approx(1.0).epsilon(1e-14));

  cfg = small_config(4, 1, 10);
  sol = solve_closed_form(cfg, 0.4, 0.2);
  CHECK(bc_one_ratio(sol, 0) == doctest::Approx(0.5).epsilon(1e-14));

  cfg = small_config(1, 1, 10);
  sol = solve_closed_form(cfg, 0.4, 0.2);
  CHECK_THROWS_AS(bc_one_ratio(sol, 0), std::invalid_argument);
  CHECK_THROWS_AS(bc_one_ratio(sol, 5), std::invalid_argument);
}

TEST_CASE("transmit probability decreases in both drivers") {
  const auto cfg = small_config(8, 2, 16);
  double prev = 1.0;
  for (const double p_d : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    const double tau = solve_closed_form(cfg, 0.3, p_d).tau_l;
    CHECK(tau < prev);
    prev = tau;
  }
  prev = 1.0;
  for (const double p_b : {0.0, 0.2, 0.4, 0.6, 0.8}) {
    const double tau = solve_closed_form(cfg, p_b, 0.3).tau_l;
    CHECK(tau < prev);
    prev = tau;
  }
}
