// Dense enumeration of node H's Markov-chain state space.
//
// Node H occupies either a backoff state (stage i, counter k) or an overlap
// state reached when a packet launched inside an MCOT stretches into the
// following OW period.  Backoff counter 0 is the transmitting state of a
// stage.  Order: stage-major, counter ascending, then all overlap states.

#pragma once

#include <vector>

#include "laacoex/config.hpp"

namespace laacoex {

struct WifiState {
  bool overlap = false;  ///< true for the OverlapTx(stage) states
  int stage = 0;
  int counter = 0;       ///< 0 for transmit and overlap states

  bool operator==(const WifiState&) const = default;
};

class WifiStateSpace {
 public:
  explicit WifiStateSpace(const SystemConfig& cfg);

  int size() const { return size_; }
  int num_stages() const { return static_cast<int>(windows_.size()); }
  int window(int stage) const { return windows_[stage]; }
  int backoff_count() const { return backoff_count_; }

  int index_of(const WifiState& s) const;
  int backoff_index(int stage, int counter) const;
  int overlap_index(int stage) const { return backoff_count_ + stage; }

  WifiState decode(int index) const;

  /// Remaining backoff slots before node H transmits; 0 while transmitting.
  int backoff_counter(int index) const;
  bool is_transmitting(int index) const;

  /// 1.0 on transmit and overlap states, 0.0 elsewhere (the m_H selector).
  std::vector<double> transmit_mask() const;

 private:
  std::vector<int> windows_;
  std::vector<int> stage_offset_;
  int backoff_count_ = 0;
  int size_ = 0;
};

}  // namespace laacoex
