#include "laacoex/laa_chain.hpp"

#include <cmath>
#include <stdexcept>

namespace laacoex {

LaaChainSolution solve_closed_form(const SystemConfig& cfg, double p_b_l, double p_d) {
  cfg.validate();
  if (!(p_b_l >= 0.0 && p_b_l < 1.0)) {
    throw std::invalid_argument("p_b_l must lie in [0,1): the chain has no stationary flow out of backoff at 1");
  }
  if (!(p_d >= 0.0 && p_d <= 1.0)) {
    throw std::invalid_argument("p_d must lie in [0,1]");
  }

  const int stages = cfg.num_stages();
  const double big_m = static_cast<double>(cfg.mcot_slots);

  // Backoff mass per unit anchor: sum_i p_d^i (W_i - 1) / (2 (1 - p_b_l)).
  // Transmit mass per unit anchor: M * sum_i p_d^i.
  // Explicit summation keeps the p_d = 1/2 and p_d = 1 points exact.
  double backoff_weight = 0.0;
  double geo_sum = 0.0;  // sum_{i=0}^{m+1} p_d^i
  double pdi = 1.0;
  for (int i = 0; i < stages; ++i) {
    backoff_weight += pdi * (cfg.window(i) - 1);
    geo_sum += pdi;
    pdi *= p_d;
  }
  backoff_weight /= 2.0 * (1.0 - p_b_l);

  LaaChainSolution sol;
  sol.p_b_l = p_b_l;
  sol.p_d = p_d;
  sol.b00_1 = 1.0 / (backoff_weight + big_m * geo_sum);
  sol.tau_l = big_m * geo_sum * sol.b00_1;

  sol.b_tx.resize(stages);
  sol.b_backoff.resize(stages);
  sol.p_stage_at_end.resize(stages);
  sol.bc_one_ratio.resize(stages);
  pdi = 1.0;
  for (int i = 0; i < stages; ++i) {
    const int w = cfg.window(i);
    sol.b_tx[i] = pdi * sol.b00_1;
    sol.p_stage_at_end[i] = pdi / geo_sum;
    sol.bc_one_ratio[i] = w >= 2 ? 2.0 / w : 0.0;
    auto& row = sol.b_backoff[i];
    row.resize(w - 1);
    for (int k = 1; k < w; ++k) {
      row[k - 1] = sol.b_tx[i] * (w - k) / (w * (1.0 - p_b_l));
    }
    pdi *= p_d;
  }
  return sol;
}

std::vector<double> stage_occupancy_at_mcot_end(const LaaChainSolution& sol) {
  return sol.p_stage_at_end;
}

double bc_one_ratio(const LaaChainSolution& sol, int stage) {
  if (stage < 0 || stage >= sol.num_stages()) {
    throw std::invalid_argument("stage out of range");
  }
  if (sol.b_backoff[stage].empty()) {
    throw std::invalid_argument("stage window of 1 has no backoff states");
  }
  return sol.bc_one_ratio[stage];
}

}  // namespace laacoex
