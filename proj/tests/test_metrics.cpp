#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "laacoex/metrics.hpp"

using namespace laacoex;

namespace {

SystemConfig desk_config() {
  SystemConfig cfg;
  cfg.cw_min = 4;
  cfg.m = 1;
  cfg.n_sf = 4;
  cfg.sf_slot = 5;
  cfg.mcot_slots = 20;
  cfg.rsf = 2;
  cfg.t_wifi = 3;
  return cfg;
}

JointDistribution desk_distribution(const SystemConfig& cfg, double p_b, double p_d) {
  const auto sol = solve_closed_form(cfg, p_b, p_d);
  const auto transitions = build_outer_transitions(cfg, sol);
  const InnerMatrices inner(cfg);
  SolverOptions opts;
  opts.method = SolverOptions::Method::kCycle;
  opts.tol = 1e-13;
  return stationary(cfg, sol, transitions, inner, opts);
}

}  // namespace

TEST_CASE("transmit probabilities from a synthetic distribution") {
  const auto cfg = desk_config();
  const WifiStateSpace space(cfg);
  JointDistribution dist;
  dist.num_l = cfg.mcot_slots + cfg.num_stages();
  dist.num_h = space.size();
  dist.mcot_slots = cfg.mcot_slots;
  dist.pi.assign(static_cast<std::size_t>(dist.num_l) * dist.num_h, 0.0);

  // All mass on counting-down backoff states: nothing transmits.
  dist.pi[(0) * dist.num_h + space.backoff_index(0, 2)] = 0.5;
  dist.pi[static_cast<std::size_t>(dist.num_l - 1) * dist.num_h + space.backoff_index(1, 3)] = 0.5;
  const auto tp = transmit_probabilities(dist, cfg);
  CHECK(tp.tau_h == 0.0);
  CHECK(tp.tau_l == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(tp.tau_h_mc_abs == 0.0);
  CHECK(*tp.tau_h_mc == 0.0);
}

TEST_CASE("conditional split is consistent on a solved distribution") {
  const auto cfg = desk_config();
  const auto dist = desk_distribution(cfg, 0.3, 0.2);
  const auto tp = transmit_probabilities(dist, cfg);
  CHECK(tp.tau_h == doctest::Approx(tp.tau_h_mc_abs + tp.tau_h_ow_abs).epsilon(1e-12));
  CHECK(tp.tau_h_mc_abs == doctest::Approx(*tp.tau_h_mc * tp.tau_l).epsilon(1e-12));
  CHECK(tp.tau_h_ow_abs == doctest::Approx(*tp.tau_h_ow * (1.0 - tp.tau_l)).epsilon(1e-12));
  CHECK(tp.tau_l > 0.0);
  CHECK(tp.tau_l < 1.0);
}

TEST_CASE("collision probability edge cases") {
  auto cfg = desk_config();
  cfg.t_wifi = 1.0;
  auto c = collision_probability(0.5, 0.4, 0.6, cfg);
  CHECK(*c.p_overlap == 0.0);
  CHECK(*c.p_c_h == doctest::Approx(0.75).epsilon(1e-14));

  cfg.t_wifi = 3.0;
  c = collision_probability(0.5, 0.4, 0.0, cfg);
  CHECK(*c.p_c_h == 0.0);
  CHECK(*c.p_overlap == 0.0);

  c = collision_probability(0.5, 0.0, std::nullopt, cfg);
  CHECK_FALSE(c.p_c_h.has_value());
  CHECK_FALSE(c.p_overlap.has_value());
}

TEST_CASE("collision probability clamps and flags") {
  auto cfg = desk_config();
  cfg.t_wifi = 19.0;  // comparable to the MCOT: the overlap share is large
  const auto c = collision_probability(0.9, 0.3, 1.0, cfg);
  CHECK(c.clamped);
  CHECK(*c.p_c_h == 1.0);
  CHECK(*c.p_overlap == 1.0);
}

TEST_CASE("single-slot subframes leave no room for pending arrivals") {
  SystemConfig cfg;
  cfg.cw_min = 4;
  cfg.m = 1;
  cfg.n_sf = 6;
  cfg.sf_slot = 1;
  cfg.mcot_slots = 6;
  cfg.rsf = 1;
  cfg.t_wifi = 3;
  const auto dist = desk_distribution(cfg, 0.2, 0.2);
  const auto sfc = subframe_collision(dist, cfg);
  // The counter window [1, sf_slot) is empty, so only in-flight packets can
  // overlap a one-slot subframe.
  for (const double c : sfc.c_sf_pending) CHECK(c == 0.0);
  double total = 0.0;
  for (const double c : sfc.c_sf) total += c;
  CHECK(total > 0.0);
  for (int r = 0; r < cfg.n_sf; ++r) CHECK(sfc.c_sf_pending[r] <= sfc.c_sf[r]);
}

TEST_CASE("subframe collision requires an aligned MCOT") {
  auto cfg = desk_config();
  const auto dist = desk_distribution(cfg, 0.2, 0.2);
  cfg.mcot_slots = 21;
  CHECK_THROWS_AS(subframe_collision(dist, cfg), std::invalid_argument);
}

TEST_CASE("throughput and delay formulas") {
  const auto cfg = desk_config();
  MetricsReport r;
  r.tau_l = 0.5;
  r.tau_h = 0.3;
  r.p_c_h = 0.0;
  r.c_sf.assign(cfg.n_sf, 0.0);
  throughput_delay(r, cfg);
  CHECK(r.alpha == 1.0);
  CHECK(r.s_l == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(*r.s_h == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(*r.e_d_l == doctest::Approx(cfg.mcot_slots).epsilon(1e-14));

  r.tau_l = 0.0;
  r.tau_h = 0.0;
  throughput_delay(r, cfg);
  CHECK(std::isinf(*r.e_d_l));
  CHECK(std::isinf(*r.e_d_h));
}

TEST_CASE("overlap share estimator") {
  CHECK_FALSE(measure_z2_assumption({0.0, 0}).has_value());
  // Every overlap splits a 4-slot packet 2/2.
  OverlapSamples samples;
  for (int i = 0; i < 200; ++i) {
    samples.ow_share_sum += 2.0 / 4.0;
    samples.count += 1;
  }
  CHECK(*measure_z2_assumption(samples) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("fixed point reaches self-consistency onto the desk config") {
  const auto cfg = desk_config();
  FixedPointOptions opts;
  opts.tol = 1e-10;
  const auto result = fixed_point(cfg, opts);
  const auto& r = result.report;

  CHECK(std::abs(*r.p_b_l - *r.tau_h_ow) < 1e-12);  // definitional
  const auto& last = result.trace.back();
  CHECK(std::abs(last.target_p_b_l - last.p_b_l) <= opts.tol);
  CHECK(std::abs(last.target_p_d - last.p_d) <= opts.tol);

  // Identity guard: the reported Wi-Fi throughput is exactly (1-p_c_h)*tau_h.
  CHECK(*r.s_h == (1.0 - *r.p_c_h) * r.tau_h);

  // The scalar chain and the joint chain agree on node L's airtime share.
  CHECK(std::abs(*r.diag.tau_l_closed_form - r.tau_l) < 1e-8);

  // Law of total probability across the two period types.
  CHECK(r.tau_h ==
        doctest::Approx(*r.tau_h_mc * r.tau_l + *r.tau_h_ow * (1.0 - r.tau_l)).epsilon(1e-12));
}

TEST_CASE("fixed point is seed-independent on the desk config") {
  const auto cfg = desk_config();
  FixedPointOptions a;
  a.tol = 1e-10;
  FixedPointOptions b = a;
  b.seed_p_b_l = 0.5;
  b.seed_p_d = 0.5;
  const auto ra = fixed_point(cfg, a);
  const auto rb = fixed_point(cfg, b);
  CHECK(std::abs(*ra.report.p_b_l - *rb.report.p_b_l) < 1e-6);
  CHECK(std::abs(ra.report.p_d - rb.report.p_d) < 1e-6);
  CHECK(std::abs(ra.report.tau_l - rb.report.tau_l) < 1e-6);
}

TEST_CASE("fixed point rejects bad arguments and reports traces") {
  const auto cfg = desk_config();
  FixedPointOptions opts;
  opts.damping = 0.0;
  CHECK_THROWS_AS(fixed_point(cfg, opts), std::invalid_argument);
  opts = {};
  opts.seed_p_b_l = 1.0;
  CHECK_THROWS_AS(fixed_point(cfg, opts), std::invalid_argument);
  opts = {};
  opts.max_rounds = 1;
  opts.tol = 1e-14;
  try {
    fixed_point(cfg, opts);
    FAIL("expected FixedPointError");
  } catch (const FixedPointError& e) {
    CHECK(e.trace().size() == 1);
    CHECK(e.trace().back().residual > 1e-14);
  }
}

TEST_CASE("report JSON round-trips") {
  const auto cfg = desk_config();
  FixedPointOptions opts;
  const auto result = fixed_point(cfg, opts);
  const auto text = result.report.to_json();
  const auto back = MetricsReport::from_json(text);
  CHECK(back.tau_l == result.report.tau_l);
  CHECK(back.c_sf == result.report.c_sf);
  CHECK(*back.p_c_h == *result.report.p_c_h);
  CHECK(back.items().size() == result.report.items().size());
}
