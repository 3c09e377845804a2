#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "laacoex/jmc.hpp"
#include "laacoex/rng.hpp"

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

double l1(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

}  // namespace

TEST_CASE("outer transition structure") {
  const auto cfg = desk_config();
  const auto sol = solve_closed_form(cfg, 0.2, 0.0);
  const auto transitions = build_outer_transitions(cfg, sol);

  const int big_m = cfg.mcot_slots;
  int case1 = 0;
  double case2 = -1.0;
  std::map<int, double> case3;
  for (const auto& tr : transitions) {
    if (tr.from_l < big_m) {
      CHECK(tr.to_l == tr.from_l + 1);
      CHECK(tr.scalar == 1.0);
      CHECK(tr.regime == Regime::MC);
      ++case1;
    } else if (tr.from_l == big_m && tr.to_l == 1) {
      case2 = tr.scalar;
    } else if (tr.from_l == big_m) {
      CHECK(tr.regime == Regime::OL);
      case3[tr.to_l - big_m - 1] = tr.scalar;
    }
  }
  CHECK(case1 == big_m - 1);
  // Without doubling, the MCOT always ends in a stage-0 redraw.
  CHECK(case2 == doctest::Approx(1.0 / 4).epsilon(1e-14));
  CHECK(case3.at(0) == doctest::Approx(3.0 / 4).epsilon(1e-14));
  CHECK(case3.at(1) == doctest::Approx(0.0));
  CHECK(case3.at(2) == doctest::Approx(0.0));
}

TEST_CASE("stage-exit diagonal uses the aggregated counter ratio") {
  auto cfg = desk_config();
  cfg.cw_min = 16;
  cfg.m = 6;
  const WifiStateSpace space(cfg);
  const auto sol = solve_closed_form(cfg, 0.1, 0.2);
  const auto transitions = build_outer_transitions(cfg, sol);
  for (const auto& tr : transitions) {
    if (tr.from_l == cfg.mcot_slots + 1 && tr.to_l == 1) {
      for (int h = 0; h < space.size(); ++h) {
        if (space.is_transmitting(h)) {
          CHECK(tr.diag[h] == 0.0);
        } else {
          CHECK(tr.diag[h] == doctest::Approx(1.0 / 8).epsilon(1e-14));
        }
      }
    }
  }
}

TEST_CASE("outer transitions are exhaustive per node-H state") {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    SystemConfig cfg;
    cfg.cw_min = 2 << (rng.next() % 3);
    cfg.m = static_cast<int>(rng.next() % 3);
    cfg.n_sf = 2;
    cfg.sf_slot = 3 + static_cast<int>(rng.next() % 4);
    cfg.mcot_slots = cfg.n_sf * cfg.sf_slot;
    cfg.rsf = 1;
    cfg.t_wifi = 1.0 + static_cast<double>(rng.next() % 20);
    const WifiStateSpace space(cfg);
    const double p_d = static_cast<double>(rng.next() % 1000) / 1000.0;
    const auto sol = solve_closed_form(cfg, 0.2, p_d);
    const auto transitions = build_outer_transitions(cfg, sol);

    std::vector<double> outflow(static_cast<std::size_t>(cfg.mcot_slots + cfg.num_stages()) *
                                    space.size(),
                                0.0);
    for (const auto& tr : transitions) {
      for (int h = 0; h < space.size(); ++h) {
        outflow[static_cast<std::size_t>(tr.from_l - 1) * space.size() + h] += tr.weight(h);
      }
    }
    for (const double total : outflow) REQUIRE(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("joint kernel preserves probability mass") {
  const auto cfg = desk_config();
  const auto sol = solve_closed_form(cfg, 0.3, 0.4);
  const auto transitions = build_outer_transitions(cfg, sol);
  const InnerMatrices inner(cfg);
  const std::size_t n = static_cast<std::size_t>(cfg.mcot_slots + cfg.num_stages()) *
                        inner.space.size();
  Xoshiro256 rng(3);
  std::vector<double> pi(n), out(n);
  for (auto& v : pi) v = rng.uniform01();
  const double sum = std::accumulate(pi.begin(), pi.end(), 0.0);
  for (auto& v : pi) v /= sum;
  apply_joint_kernel(transitions, inner, cfg.mcot_slots + cfg.num_stages(), pi, out);
  CHECK(std::accumulate(out.begin(), out.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("overlap states gain mass only from the boundary step") {
  const auto cfg = desk_config();
  const InnerMatrices inner(cfg);
  const auto& space = inner.space;
  for (const auto* m : {&inner.mc, &inner.ow}) {
    for (const auto& e : m->P.entries()) {
      if (e.value == 0.0) continue;
      CHECK_FALSE((space.decode(e.col).overlap && !space.decode(e.row).overlap));
    }
  }
}

TEST_CASE("power, dense, and cycle solvers agree on the desk config") {
  const auto cfg = desk_config();
  const auto sol = solve_closed_form(cfg, 0.3, 0.25);
  const auto transitions = build_outer_transitions(cfg, sol);
  const InnerMatrices inner(cfg);

  SolverOptions power;
  power.method = SolverOptions::Method::kPower;
  power.tol = 1e-13;
  const auto via_power = stationary(cfg, sol, transitions, inner, power);

  SolverOptions dense;
  dense.method = SolverOptions::Method::kDense;
  const auto via_dense = stationary(cfg, sol, transitions, inner, dense);

  SolverOptions cycle;
  cycle.method = SolverOptions::Method::kCycle;
  cycle.tol = 1e-13;
  const auto via_cycle = stationary(cfg, sol, transitions, inner, cycle);

  CHECK(l1(via_power.pi, via_dense.pi) < 1e-8);
  CHECK(l1(via_cycle.pi, via_dense.pi) < 1e-9);
  CHECK(via_power.residual < 1e-9);
  CHECK(via_cycle.residual < 1e-11);
  CHECK(via_dense.residual < 1e-11);

  double total = 0.0;
  for (int l = 1; l <= via_cycle.num_l; ++l) total += via_cycle.block_mass(l);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dense solver refuses oversized systems") {
  const auto cfg = desk_config();
  const auto sol = solve_closed_form(cfg, 0.3, 0.25);
  const auto transitions = build_outer_transitions(cfg, sol);
  const InnerMatrices inner(cfg);
  SolverOptions dense;
  dense.method = SolverOptions::Method::kDense;
  dense.dense_cap = 10;
  CHECK_THROWS_AS(stationary(cfg, sol, transitions, inner, dense), std::invalid_argument);
}

TEST_CASE("marginals sum to one across l") {
  const auto cfg = desk_config();
  const auto sol = solve_closed_form(cfg, 0.2, 0.3);
  const auto transitions = build_outer_transitions(cfg, sol);
  const InnerMatrices inner(cfg);
  SolverOptions cycle;
  cycle.method = SolverOptions::Method::kCycle;
  const auto dist = stationary(cfg, sol, transitions, inner, cycle);
  double total = 0.0;
  for (int l = 1; l <= dist.num_l; ++l) {
    const auto block = marginal(dist, l);
    total += std::accumulate(block.begin(), block.end(), 0.0);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(marginal(dist, 0), std::out_of_range);
  CHECK_THROWS_AS(marginal(dist, dist.num_l + 1), std::out_of_range);

  // New MCOTs cannot start with the AP in an overlap state.
  const auto first = marginal(dist, 1);
  for (int h = inner.space.backoff_count(); h < inner.space.size(); ++h) {
    CHECK(first[h] == 0.0);
  }
}

TEST_CASE("distribution dump restores bit-exactly under the right key") {
  const auto cfg = desk_config();
  const auto sol = solve_closed_form(cfg, 0.2, 0.3);
  const auto transitions = build_outer_transitions(cfg, sol);
  const InnerMatrices inner(cfg);
  SolverOptions cycle;
  cycle.method = SolverOptions::Method::kCycle;
  const auto dist = stationary(cfg, sol, transitions, inner, cycle);

  const auto path = std::filesystem::temp_directory_path() / "laacoex_pi_test.bin";
  save_distribution(path.string(), dist, cfg.hash());
  const auto loaded = load_distribution(path.string(), cfg.hash());
  REQUIRE(loaded.has_value());
  CHECK(loaded->pi == dist.pi);
  CHECK(loaded->num_l == dist.num_l);
  CHECK_FALSE(load_distribution(path.string(), cfg.hash() + 1).has_value());
  std::filesystem::remove(path);
}
