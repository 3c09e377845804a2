// Closed-form stationary analysis of node L's contention chain.
//
// Given the per-slot busy probability p_b_l and the per-MCOT doubling
// probability p_d, every stationary mass of the eNB's chain (backoff states
// (i,k), transmit slots (i,0^j)) reduces to the anchor mass b_{0,0^1} via
// geometric recursions; the normalization condition then pins the anchor.

#pragma once

#include <vector>

#include "laacoex/config.hpp"

namespace laacoex {

struct LaaChainSolution {
  double p_b_l = 0.0;
  double p_d = 0.0;
  double b00_1 = 0.0;                ///< anchor mass b_{0,0^1}
  std::vector<double> b_tx;          ///< b_{i,0^j}, identical across j, per stage
  std::vector<std::vector<double>> b_backoff;  ///< [stage][k-1] = b_{i,k}, k = 1..W_i-1
  double tau_l = 0.0;                ///< per-slot transmit probability of node L
  std::vector<double> p_stage_at_end;  ///< stage occupancy at the last MCOT slot
  std::vector<double> bc_one_ratio;  ///< b_{i,1} / sum_k b_{i,k} = 2 / W_i

  int num_stages() const { return static_cast<int>(b_tx.size()); }
};

/// Solves the chain in closed form.  Requires 0 <= p_b_l < 1 and
/// 0 <= p_d <= 1; the geometric sums are evaluated as explicit polynomials,
/// which also covers the p_d = 1/2 and p_d = 1 limit points exactly.
LaaChainSolution solve_closed_form(const SystemConfig& cfg, double p_b_l, double p_d);

/// p_i^s: probability of being in stage i at the final MCOT slot,
/// p_d^i normalized over stages.
std::vector<double> stage_occupancy_at_mcot_end(const LaaChainSolution& sol);

/// b_{stage,1} / sum_{k>=1} b_{stage,k}.  The busy-probability factors cancel,
/// leaving 2 / W_stage.  Throws for W_stage < 2 (no backoff states).
double bc_one_ratio(const LaaChainSolution& sol, int stage);

}  // namespace laacoex
