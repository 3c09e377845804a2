#include "laacoex/wifi_state.hpp"

#include <stdexcept>

namespace laacoex {

WifiStateSpace::WifiStateSpace(const SystemConfig& cfg) {
  cfg.validate();
  const int stages = cfg.num_stages();
  windows_.resize(stages);
  stage_offset_.resize(stages);
  int offset = 0;
  for (int i = 0; i < stages; ++i) {
    windows_[i] = cfg.window(i);
    stage_offset_[i] = offset;
    offset += windows_[i];
  }
  backoff_count_ = offset;
  size_ = backoff_count_ + stages;
}

int WifiStateSpace::backoff_index(int stage, int counter) const {
  return stage_offset_[stage] + counter;
}

int WifiStateSpace::index_of(const WifiState& s) const {
  if (s.stage < 0 || s.stage >= num_stages()) {
    throw std::invalid_argument("wifi state stage out of range");
  }
  if (s.overlap) {
    if (s.counter != 0) throw std::invalid_argument("overlap state has no counter");
    return overlap_index(s.stage);
  }
  if (s.counter < 0 || s.counter >= windows_[s.stage]) {
    throw std::invalid_argument("wifi state counter out of range");
  }
  return backoff_index(s.stage, s.counter);
}

WifiState WifiStateSpace::decode(int index) const {
  if (index < 0 || index >= size_) throw std::invalid_argument("wifi state index out of range");
  if (index >= backoff_count_) {
    return WifiState{true, index - backoff_count_, 0};
  }
  int stage = num_stages() - 1;
  while (stage_offset_[stage] > index) --stage;
  return WifiState{false, stage, index - stage_offset_[stage]};
}

int WifiStateSpace::backoff_counter(int index) const {
  if (index >= backoff_count_) return 0;
  int stage = num_stages() - 1;
  while (stage_offset_[stage] > index) --stage;
  return index - stage_offset_[stage];
}

bool WifiStateSpace::is_transmitting(int index) const {
  return index >= backoff_count_ || backoff_counter(index) == 0;
}

std::vector<double> WifiStateSpace::transmit_mask() const {
  std::vector<double> mask(size_, 0.0);
  for (int i = 0; i < size_; ++i) {
    if (is_transmitting(i)) mask[i] = 1.0;
  }
  return mask;
}

}  // namespace laacoex
