// Performance metrics derived from the joint stationary distribution, and
// the self-consistent evaluation loop: the distribution depends on the busy
// and doubling probabilities, which in turn are read back off the
// distribution, so the pair is iterated to a fixed point.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "laacoex/jmc.hpp"

namespace laacoex {

struct MetricsDiagnostics {
  std::optional<double> tau_l_closed_form;   ///< node L transmit probability via the scalar chain
  std::vector<double> c_sf_pending;          ///< subframe collision ignoring in-flight packets
  bool p_c_h_clamped = false;
  std::optional<double> x_per_cycle;         ///< simulator only: packets fully inside an MCOT
  std::optional<double> y_per_cycle;         ///< simulator only: packets fully inside an OW period
  std::optional<double> z_per_cycle;         ///< simulator only: boundary-straddling packets
  double pi_residual = 0.0;
  long pi_iterations = 0;
  int fixed_point_rounds = 0;
};

struct MetricsReport {
  std::string engine;  ///< "analytic" or "simulation"

  double tau_l = 0.0;
  double tau_h = 0.0;
  std::optional<double> tau_h_mc;   ///< conditional on MCOT slots
  std::optional<double> tau_h_ow;   ///< conditional on OW slots
  double tau_h_mc_abs = 0.0;        ///< tau_h_mc * tau_l
  double tau_h_ow_abs = 0.0;        ///< tau_h_ow * (1 - tau_l)

  std::optional<double> p_b_l;      ///< busy probability of node L (= tau_h_ow)
  std::optional<double> p_overlap;  ///< packet straddles an MCOT -> OW boundary
  std::optional<double> p_c_h;      ///< per-packet collision probability of node H

  std::vector<double> c_sf;         ///< per-subframe collision probability, index r-1
  double p_d = 0.0;                 ///< doubling probability = c_sf[rsf-1]
  double avg_collided_sf = 0.0;     ///< sum of c_sf
  double alpha = 0.0;               ///< ratio of successful subframes

  double s_l = 0.0;
  std::optional<double> s_h;
  std::optional<double> e_d_l;      ///< mean channel-access delay of node L, slots
  std::optional<double> e_d_h;

  std::optional<double> z2;         ///< OW-side share of overlap packets

  MetricsDiagnostics diag;

  /// (name, value) pairs in the documented stable order; c_sf columns last.
  std::vector<std::pair<std::string, std::optional<double>>> items() const;

  std::string to_json(int indent = 2) const;
  static MetricsReport from_json(const std::string& text);
};

struct TransmitProbabilities {
  double tau_l = 0.0;
  double tau_h = 0.0;
  std::optional<double> tau_h_mc;
  std::optional<double> tau_h_ow;
  double tau_h_mc_abs = 0.0;
  double tau_h_ow_abs = 0.0;
};

TransmitProbabilities transmit_probabilities(const JointDistribution& dist,
                                             const SystemConfig& cfg);

struct CollisionProbabilities {
  std::optional<double> p_c_h;
  std::optional<double> p_overlap;
  bool clamped = false;
};

/// Per-packet collision probability of node H: every transmission inside an
/// MCOT collides, plus the z2 share of boundary-straddling packets.
CollisionProbabilities collision_probability(double tau_l, double tau_h,
                                             std::optional<double> tau_h_mc,
                                             const SystemConfig& cfg);

struct SubframeCollision {
  std::vector<double> c_sf;          ///< any node-H transmission overlaps subframe r
  std::vector<double> c_sf_pending;  ///< only packets starting inside the subframe
  double p_d = 0.0;                  ///< c_sf at the reference subframe
};

/// C_sf(r): conditional on the first slot of subframe r, the probability that
/// a node-H transmission overlaps the subframe -- the packet is either
/// already in flight at that slot or the backoff counter sits in
/// [1, sf_slot) so it starts inside.  The pending variant drops the in-flight
/// term and visibly undercounts once packets outlast a subframe; it is kept
/// for comparison.  Requires mcot_slots == n_sf * sf_slot.
SubframeCollision subframe_collision(const JointDistribution& dist, const SystemConfig& cfg);

/// alpha, S_L, S_H, E[D_L], E[D_H] filled into the report in place.
void throughput_delay(MetricsReport& report, const SystemConfig& cfg);

struct OverlapSamples {
  double ow_side_slots = 0.0;
  double total_slots = 0.0;
  long count = 0;
};

/// Airtime-weighted OW-side share of overlap packets (total OW-side slots
/// over total straddling airtime); absent without any events.  The weighting
/// matters: the per-event ratio is pinned near one half by the memoryless
/// tail, while long packets carry disproportionate MCOT-side airtime once
/// mean packets approach the MCOT length.
std::optional<double> measure_z2_assumption(const OverlapSamples& samples);

struct FixedPointRound {
  int round = 0;
  double p_b_l = 0.0;
  double p_d = 0.0;
  double target_p_b_l = 0.0;
  double target_p_d = 0.0;
  double residual = 0.0;
  double pi_residual = 0.0;
  long pi_iterations = 0;
};

struct FixedPointOptions {
  double seed_p_b_l = 0.0;
  double seed_p_d = 0.0;
  double damping = 0.5;    ///< in (0, 1]
  double tol = 1e-9;       ///< on max(|dp_b_l|, |dp_d|)
  int max_rounds = 400;
  SolverOptions solver{SolverOptions::Method::kCycle, 1e-11, 2'000'000, false, 50'000, nullptr};
};

class FixedPointError : public std::runtime_error {
 public:
  FixedPointError(const std::string& what, std::vector<FixedPointRound> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<FixedPointRound>& trace() const { return trace_; }

 private:
  std::vector<FixedPointRound> trace_;
};

struct FixedPointResult {
  MetricsReport report;
  JointDistribution dist;
  std::vector<FixedPointRound> trace;
};

/// Alternates the stationary solve with the read-back of (p_b_l, p_d) until
/// both are self-consistent, then derives the full report.
FixedPointResult fixed_point(const SystemConfig& cfg, const FixedPointOptions& opts = {});

}  // namespace laacoex
