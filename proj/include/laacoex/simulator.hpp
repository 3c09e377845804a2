// Slot-level simulation of the two-node system.  Node H never senses node L;
// node L freezes its backoff while node H transmits and occupies the channel
// for exactly one MCOT per access.  The slot loop reproduces the chain
// semantics event for event, so long runs are usable as an oracle for the
// analytic engine.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "laacoex/config.hpp"
#include "laacoex/metrics.hpp"

namespace laacoex {

enum class DoublingRule {
  kRsfOverlap,  ///< double iff any node-H transmission overlaps the reference subframe
};

struct SimConfig {
  SystemConfig system;
  std::uint64_t seed = 1;
  std::uint64_t total_slots = 10'000'000;
  std::uint64_t warmup_slots = 100'000;
  DoublingRule doubling_rule = DoublingRule::kRsfOverlap;
  int batches = 20;           ///< batch-means groups for confidence intervals
  bool disable_node_h = false;
  bool joint_tally = false;   ///< per-slot (L,H) state histogram (costly at full scale)
  std::ostream* trace = nullptr;  ///< optional line-per-event debug log

  void validate() const;
};

/// Per-batch raw counters; ratios are formed per batch for the CI estimate.
struct SimBatch {
  std::uint64_t slots = 0;
  std::uint64_t mcot_slots = 0;
  std::uint64_t h_tx_slots = 0;
  std::uint64_t h_tx_mc = 0;
  std::uint64_t h_tx_ow = 0;
  std::uint64_t mcot_count = 0;
  std::uint64_t doubling_count = 0;
  std::uint64_t packet_count = 0;
  std::uint64_t collided_packets = 0;
  std::uint64_t x_packets = 0;
  std::uint64_t y_packets = 0;
  std::uint64_t z_packets = 0;
  std::uint64_t z_ow_slots = 0;   ///< OW-side airtime of straddling packets
  std::uint64_t z_len_slots = 0;  ///< total airtime of straddling packets
  std::uint64_t success_airtime = 0;
  std::vector<std::uint64_t> csf_count;  ///< per subframe, size n_sf
};

struct SimStats {
  SimConfig config;

  std::uint64_t slots = 0;  ///< measured (post-warmup) slots
  std::uint64_t mcot_slots = 0;
  std::uint64_t ow_slots = 0;
  std::uint64_t h_tx_slots = 0;
  std::uint64_t h_tx_mc = 0;
  std::uint64_t h_tx_ow = 0;

  std::uint64_t mcot_count = 0;
  std::uint64_t doubling_count = 0;
  std::vector<std::uint64_t> csf_count;  ///< MCOTs whose subframe r was overlapped

  std::uint64_t packet_count = 0;
  std::uint64_t collided_packets = 0;
  std::uint64_t x_packets = 0;  ///< completed without leaving MCOT periods
  std::uint64_t y_packets = 0;  ///< completed entirely inside OW periods
  std::uint64_t z_packets = 0;  ///< straddled an MCOT -> OW boundary
  std::uint64_t z_ow_slots = 0;
  std::uint64_t z_len_slots = 0;
  double z2_ratio_sum = 0.0;  ///< per-event OW-share sum, diagnostic only
  std::uint64_t success_airtime = 0;

  std::vector<SimBatch> batches;
  std::vector<std::uint64_t> joint_tally;  ///< optional per-(l,h) slot counts

  OverlapSamples overlap_samples() const {
    return {static_cast<double>(z_ow_slots), static_cast<double>(z_len_slots),
            static_cast<long>(z_packets)};
  }

  void merge(const SimStats& other);  ///< same-config seed aggregation
  std::string to_json(int indent = 2) const;
};

/// Runs the simulation; deterministic for a given config (seed included).
SimStats run(const SimConfig& cfg);

struct SimMeasurement {
  MetricsReport report;
  std::map<std::string, double> ci_halfwidth;  ///< keyed like MetricsReport::items()
  double e_d_l_direct = 0.0;  ///< mean inter-MCOT gap, measured directly
  double e_d_h_direct = 0.0;  ///< mean idle gap between node-H packets
};

/// Maps raw counters onto the shared report schema, with batch-means
/// confidence half-widths.
SimMeasurement measure(const SimStats& stats);

}  // namespace laacoex
