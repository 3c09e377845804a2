// Per-regime transition matrices of node H's chain.
//
// The AP cannot sense the eNB, so its backoff counter decrements every slot.
// What differs between an MCOT period and an OW period is only what a packet
// completion means (collision vs success) and whether a still-running packet
// is rerouted into an overlap state at the MCOT -> OW boundary.

#pragma once

#include <iosfwd>

#include "laacoex/sparse.hpp"
#include "laacoex/wifi_state.hpp"

namespace laacoex {

/// Channel regime the inner step runs under, named by (L_t, L_t+1):
///   MC - node L transmitting (completions collide),
///   OW - node L backing off (completions succeed),
///   OL - the MCOT ends this step (running packets become overlap packets).
enum class Regime { MC, OW, OL };

const char* regime_name(Regime r);

struct InnerMatrix {
  Regime regime = Regime::MC;
  double p_c = 1.0;          ///< per-packet collision probability in this regime
  double p_b = 0.0;          ///< per-slot busy probability seen by node H (always 0)
  bool overlap_flag = false; ///< reroute continuing packets into overlap states
  double p_o = 0.0;          ///< per-slot completion probability
  SparseRowMatrix P;         ///< row-stochastic over WifiStateSpace indices
};

/// Builds the regime matrix over cfg's state space:
///  - (i,k), k >= 1 decrements to (i,k-1) with probability 1;
///  - (i,0) continues with 1-p_o (to OverlapTx(i) when the overlap flag is
///    set, else in place) and completes with p_o, fanning out uniformly over
///    the next stage on collision or stage 0 on success;
///  - OverlapTx(i) continues in place and always completes as a collision.
/// A collision at the top stage resets to stage 0 unless
/// cfg.wifi_saturate_at_max keeps it saturated.
InnerMatrix build_inner_matrix(const SystemConfig& cfg, Regime regime);

/// Debug dump, one "row col value" triplet per line.
void dump_triplets(const InnerMatrix& m, std::ostream& os);

}  // namespace laacoex
