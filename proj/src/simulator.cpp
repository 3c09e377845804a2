#include "laacoex/simulator.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>

#include "laacoex/rng.hpp"
#include "laacoex/wifi_state.hpp"

namespace laacoex {

using nlohmann::json;

void SimConfig::validate() const {
  system.validate();
  if (total_slots <= warmup_slots) {
    throw std::invalid_argument("total_slots must exceed warmup_slots");
  }
  if (batches < 1) throw std::invalid_argument("batches must be >= 1");
}

namespace {

struct Engine {
  const SimConfig& cfg;
  const SystemConfig& sys;
  Xoshiro256 rng;
  std::vector<int> windows;
  int top_stage;

  // Node L.
  bool l_tx = false;
  int l_slot = 0;       // 1..M while transmitting
  int sf_idx = 0;       // 1..n_sf
  int sf_left = 0;      // slots remaining in the current subframe, incl. current
  int l_stage = 0;
  std::uint64_t l_bc = 0;
  std::vector<std::uint8_t> sf_hit;  // subframe overlapped by node H, 1-based

  // Node H.
  bool h_tx = false;
  std::uint64_t h_left = 0;  // remaining packet slots, incl. current
  std::uint64_t h_len = 0;
  std::uint64_t h_ow_side = 0;
  bool h_touched_mcot = false;
  int h_stage = 0;
  std::uint64_t h_bc = 0;

  std::uint64_t slot_now = 0;

  explicit Engine(const SimConfig& c)
      : cfg(c), sys(c.system), rng(c.seed), top_stage(c.system.m + 1) {
    windows.resize(sys.num_stages());
    for (int i = 0; i < sys.num_stages(); ++i) windows[i] = sys.window(i);
    sf_hit.assign(sys.n_sf + 1, 0);

    // Both nodes begin a fresh contention round at stage 0.
    l_stage = 0;
    l_bc = 1 + rng.uniform_below(static_cast<std::uint64_t>(windows[0]));
    h_stage = 0;
    h_bc = 1 + rng.uniform_below(static_cast<std::uint64_t>(windows[0]));
    if (cfg.disable_node_h) h_bc = 0;  // node H never reaches a transmit slot
  }

  void trace_event(const char* ev, std::uint64_t a = 0, std::uint64_t b = 0) {
    if (cfg.trace) {
      *cfg.trace << "slot=" << slot_now << " ev=" << ev << " a=" << a << " b=" << b << '\n';
    }
  }

  void start_mcot() {
    l_tx = true;
    l_slot = 1;
    sf_idx = 1;
    sf_left = sys.sf_slot;
    std::fill(sf_hit.begin(), sf_hit.end(), 0);
    trace_event("mcot_start");
  }

  void start_packet() {
    h_tx = true;
    h_left = rng.geometric_slots(sys.p_complete());
    h_len = h_left;
    h_ow_side = 0;
    h_touched_mcot = false;
    trace_event("pkt_start", h_len);
  }

  void draw_l_bc() {
    l_bc = rng.uniform_below(static_cast<std::uint64_t>(windows[l_stage]));
    if (l_bc == 0) start_mcot();
  }

  void draw_h_bc() {
    h_bc = rng.uniform_below(static_cast<std::uint64_t>(windows[h_stage]));
    if (h_bc == 0) start_packet();
  }

  template <bool kCollect>
  void step(SimStats& stats, SimBatch* batch, const WifiStateSpace* space) {
    const bool h_on = h_tx;
    const bool l_on = l_tx;

    if constexpr (kCollect) {
      ++stats.slots;
      ++batch->slots;
      if (l_on) {
        ++stats.mcot_slots;
        ++batch->mcot_slots;
      }
      if (h_on) {
        ++stats.h_tx_slots;
        ++batch->h_tx_slots;
        if (l_on) {
          ++stats.h_tx_mc;
          ++batch->h_tx_mc;
        } else {
          ++stats.h_tx_ow;
          ++batch->h_tx_ow;
        }
      }
      if (space) {
        const int l_state = l_on ? l_slot : sys.mcot_slots + 1 + l_stage;
        int h_state;
        if (!h_on) {
          h_state = space->backoff_index(h_stage, static_cast<int>(h_bc));
        } else if (!l_on && h_touched_mcot) {
          h_state = space->overlap_index(h_stage);
        } else {
          h_state = space->backoff_index(h_stage, 0);
        }
        ++stats.joint_tally[static_cast<std::size_t>(l_state - 1) * space->size() + h_state];
      }
    }

    // Node H's view of this slot.
    if (h_on) {
      if (l_on) {
        h_touched_mcot = true;
        if (!sf_hit[sf_idx]) sf_hit[sf_idx] = 1;
      } else {
        ++h_ow_side;
      }
      if (--h_left == 0) {
        const bool collided = h_touched_mcot;
        if constexpr (kCollect) {
          ++stats.packet_count;
          ++batch->packet_count;
          if (collided) {
            ++stats.collided_packets;
            ++batch->collided_packets;
          } else {
            stats.success_airtime += h_len;
            batch->success_airtime += h_len;
          }
          if (!h_touched_mcot) {
            ++stats.y_packets;
            ++batch->y_packets;
          } else if (h_ow_side > 0) {
            ++stats.z_packets;
            ++batch->z_packets;
            const double share = static_cast<double>(h_ow_side) / static_cast<double>(h_len);
            stats.z2_sum += share;
            batch->z2_sum += share;
          } else {
            ++stats.x_packets;
            ++batch->x_packets;
          }
        }
        trace_event(collided ? "pkt_end_collision" : "pkt_end_success", h_len);
        h_stage = collided ? (h_stage <= sys.m ? h_stage + 1
                                               : (sys.wifi_saturate_at_max ? top_stage : 0))
                           : 0;
        h_tx = false;
        draw_h_bc();
      }
    } else if (!cfg.disable_node_h) {
      if (--h_bc == 0) start_packet();
    }

    // Node L's end-of-slot update; the freeze rule reads node H's state of
    // this slot, captured above.
    if (l_on) {
      if (l_slot == sys.mcot_slots) {
        const bool doubled = sf_hit[sys.rsf] != 0;
        if constexpr (kCollect) {
          ++stats.mcot_count;
          ++batch->mcot_count;
          if (doubled) {
            ++stats.doubling_count;
            ++batch->doubling_count;
          }
          for (int r = 1; r <= sys.n_sf; ++r) {
            if (sf_hit[r]) {
              ++stats.csf_count[r - 1];
              ++batch->csf_count[r - 1];
            }
          }
        }
        trace_event("mcot_end", doubled);
        l_stage = doubled ? (l_stage <= sys.m ? l_stage + 1 : 0) : 0;
        l_tx = false;
        draw_l_bc();
      } else {
        ++l_slot;
        if (--sf_left == 0) {
          ++sf_idx;
          sf_left = sys.sf_slot;
        }
      }
    } else {
      if (!h_on) {
        if (--l_bc == 0) start_mcot();
      }
    }
    ++slot_now;
  }
};

constexpr double kStudentT975[] = {
    // df = 1..30
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
    2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
    2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};

double t_quantile(int df) {
  if (df < 1) return 0.0;
  if (df <= 30) return kStudentT975[df - 1];
  return 1.96;
}

/// Batch-means half-width of a per-batch statistic; absent batches (no
/// denominator events) are skipped.
std::optional<double> batch_halfwidth(const std::vector<SimBatch>& batches,
                                      const std::function<std::optional<double>(const SimBatch&)>& f) {
  std::vector<double> vals;
  vals.reserve(batches.size());
  for (const auto& b : batches) {
    if (auto v = f(b)) vals.push_back(*v);
  }
  const int n = static_cast<int>(vals.size());
  if (n < 2) return std::nullopt;
  double mean = 0.0;
  for (double v : vals) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : vals) var += (v - mean) * (v - mean);
  var /= (n - 1);
  return t_quantile(n - 1) * std::sqrt(var / n);
}

}  // namespace

SimStats run(const SimConfig& cfg) {
  cfg.validate();
  SimStats stats;
  stats.config = cfg;
  stats.csf_count.assign(cfg.system.n_sf, 0);
  stats.batches.resize(cfg.batches);
  for (auto& b : stats.batches) b.csf_count.assign(cfg.system.n_sf, 0);

  std::unique_ptr<WifiStateSpace> space;
  if (cfg.joint_tally) {
    space = std::make_unique<WifiStateSpace>(cfg.system);
    stats.joint_tally.assign(
        static_cast<std::size_t>(cfg.system.mcot_slots + cfg.system.num_stages()) * space->size(),
        0);
  }

  Engine eng(cfg);
  for (std::uint64_t s = 0; s < cfg.warmup_slots; ++s) {
    eng.step<false>(stats, nullptr, nullptr);
  }

  const std::uint64_t measured = cfg.total_slots - cfg.warmup_slots;
  const std::uint64_t per_batch = measured / cfg.batches;
  std::uint64_t done = 0;
  for (int b = 0; b < cfg.batches; ++b) {
    const std::uint64_t end = (b == cfg.batches - 1) ? measured : done + per_batch;
    for (; done < end; ++done) {
      eng.step<true>(stats, &stats.batches[b], space.get());
    }
  }
  stats.ow_slots = stats.slots - stats.mcot_slots;
  return stats;
}

void SimStats::merge(const SimStats& other) {
  if (other.config.system != config.system) {
    throw std::invalid_argument("cannot merge stats from different system configs");
  }
  slots += other.slots;
  mcot_slots += other.mcot_slots;
  ow_slots += other.ow_slots;
  h_tx_slots += other.h_tx_slots;
  h_tx_mc += other.h_tx_mc;
  h_tx_ow += other.h_tx_ow;
  mcot_count += other.mcot_count;
  doubling_count += other.doubling_count;
  for (std::size_t i = 0; i < csf_count.size(); ++i) csf_count[i] += other.csf_count[i];
  packet_count += other.packet_count;
  collided_packets += other.collided_packets;
  x_packets += other.x_packets;
  y_packets += other.y_packets;
  z_packets += other.z_packets;
  z2_sum += other.z2_sum;
  success_airtime += other.success_airtime;
  batches.insert(batches.end(), other.batches.begin(), other.batches.end());
  if (joint_tally.size() == other.joint_tally.size()) {
    for (std::size_t i = 0; i < joint_tally.size(); ++i) joint_tally[i] += other.joint_tally[i];
  }
}

SimMeasurement measure(const SimStats& stats) {
  const SystemConfig& sys = stats.config.system;
  SimMeasurement out;
  MetricsReport& r = out.report;
  r.engine = "simulation";

  const double slots = static_cast<double>(stats.slots);
  if (stats.slots == 0) throw std::invalid_argument("empty simulation");
  const double mcot_slots = static_cast<double>(stats.mcot_slots);
  const double ow_slots = static_cast<double>(stats.ow_slots);

  r.tau_l = mcot_slots / slots;
  r.tau_h = static_cast<double>(stats.h_tx_slots) / slots;
  r.tau_h_mc_abs = static_cast<double>(stats.h_tx_mc) / slots;
  r.tau_h_ow_abs = static_cast<double>(stats.h_tx_ow) / slots;
  if (stats.mcot_slots > 0) r.tau_h_mc = static_cast<double>(stats.h_tx_mc) / mcot_slots;
  if (stats.ow_slots > 0) r.tau_h_ow = static_cast<double>(stats.h_tx_ow) / ow_slots;
  r.p_b_l = r.tau_h_ow;

  if (stats.packet_count > 0) {
    r.p_c_h = static_cast<double>(stats.collided_packets) / stats.packet_count;
    r.p_overlap = static_cast<double>(stats.z_packets) / stats.packet_count;
  }

  r.c_sf.assign(sys.n_sf, 0.0);
  if (stats.mcot_count > 0) {
    for (int i = 0; i < sys.n_sf; ++i) {
      r.c_sf[i] = static_cast<double>(stats.csf_count[i]) / stats.mcot_count;
    }
    r.p_d = static_cast<double>(stats.doubling_count) / stats.mcot_count;
  }
  throughput_delay(r, sys);

  r.z2 = measure_z2_assumption(stats.overlap_samples());
  if (stats.mcot_count > 0) {
    r.diag.x_per_cycle = static_cast<double>(stats.x_packets) / stats.mcot_count;
    r.diag.y_per_cycle = static_cast<double>(stats.y_packets) / stats.mcot_count;
    r.diag.z_per_cycle = static_cast<double>(stats.z_packets) / stats.mcot_count;
  }

  if (stats.mcot_count > 0) out.e_d_l_direct = ow_slots / stats.mcot_count;
  if (stats.packet_count > 0) {
    out.e_d_h_direct = (slots - static_cast<double>(stats.h_tx_slots)) / stats.packet_count;
  }

  // Confidence half-widths from batch means.
  const auto& bs = stats.batches;
  const auto put = [&](const std::string& key,
                       const std::function<std::optional<double>(const SimBatch&)>& f) {
    if (auto hw = batch_halfwidth(bs, f)) out.ci_halfwidth[key] = *hw;
  };
  const auto ratio = [](double num, double den) -> std::optional<double> {
    if (den <= 0.0) return std::nullopt;
    return num / den;
  };
  put("tau_l", [&](const SimBatch& b) { return ratio(b.mcot_slots, b.slots); });
  put("tau_h", [&](const SimBatch& b) { return ratio(b.h_tx_slots, b.slots); });
  put("tau_h_mc", [&](const SimBatch& b) { return ratio(b.h_tx_mc, b.mcot_slots); });
  put("tau_h_ow", [&](const SimBatch& b) { return ratio(b.h_tx_ow, b.slots - b.mcot_slots); });
  put("tau_h_mc_abs", [&](const SimBatch& b) { return ratio(b.h_tx_mc, b.slots); });
  put("tau_h_ow_abs", [&](const SimBatch& b) { return ratio(b.h_tx_ow, b.slots); });
  put("p_b_l", [&](const SimBatch& b) { return ratio(b.h_tx_ow, b.slots - b.mcot_slots); });
  put("p_overlap", [&](const SimBatch& b) { return ratio(b.z_packets, b.packet_count); });
  put("p_c_h", [&](const SimBatch& b) { return ratio(b.collided_packets, b.packet_count); });
  put("p_d", [&](const SimBatch& b) { return ratio(b.doubling_count, b.mcot_count); });
  for (int i = 0; i < sys.n_sf; ++i) {
    put("c_sf_" + std::to_string(i + 1),
        [&, i](const SimBatch& b) { return ratio(b.csf_count[i], b.mcot_count); });
  }
  const auto collided_sum = [](const SimBatch& b) -> std::optional<double> {
    if (b.mcot_count == 0) return std::nullopt;
    std::uint64_t s = 0;
    for (auto c : b.csf_count) s += c;
    return static_cast<double>(s) / b.mcot_count;
  };
  put("avg_collided_sf", collided_sum);
  put("alpha", [&](const SimBatch& b) -> std::optional<double> {
    const auto s = collided_sum(b);
    if (!s) return std::nullopt;
    return 1.0 - *s / sys.n_sf;
  });
  put("s_l", [&](const SimBatch& b) -> std::optional<double> {
    const auto s = collided_sum(b);
    if (!s || b.slots == 0) return std::nullopt;
    return (1.0 - *s / sys.n_sf) * (static_cast<double>(b.mcot_slots) / b.slots);
  });
  put("s_h", [&](const SimBatch& b) -> std::optional<double> {
    if (b.packet_count == 0 || b.slots == 0) return std::nullopt;
    const double pch = static_cast<double>(b.collided_packets) / b.packet_count;
    return (1.0 - pch) * (static_cast<double>(b.h_tx_slots) / b.slots);
  });
  put("e_d_l", [&](const SimBatch& b) -> std::optional<double> {
    if (b.mcot_slots == 0 || b.slots == b.mcot_slots) return std::nullopt;
    const double tl = static_cast<double>(b.mcot_slots) / b.slots;
    return sys.mcot_slots * (1.0 - tl) / tl;
  });
  put("e_d_h", [&](const SimBatch& b) -> std::optional<double> {
    if (b.h_tx_slots == 0) return std::nullopt;
    const double th = static_cast<double>(b.h_tx_slots) / b.slots;
    return sys.t_wifi * (1.0 - th) / th;
  });
  put("z2", [&](const SimBatch& b) { return ratio(b.z2_sum, b.z_packets); });

  return out;
}

std::string SimStats::to_json(int indent) const {
  json j;
  j["seed"] = config.seed;
  j["total_slots"] = config.total_slots;
  j["warmup_slots"] = config.warmup_slots;
  j["slots"] = slots;
  j["mcot_slots"] = mcot_slots;
  j["ow_slots"] = ow_slots;
  j["h_tx_slots"] = h_tx_slots;
  j["h_tx_mc"] = h_tx_mc;
  j["h_tx_ow"] = h_tx_ow;
  j["mcot_count"] = mcot_count;
  j["doubling_count"] = doubling_count;
  j["csf_count"] = csf_count;
  j["packet_count"] = packet_count;
  j["collided_packets"] = collided_packets;
  j["x_packets"] = x_packets;
  j["y_packets"] = y_packets;
  j["z_packets"] = z_packets;
  j["z2_sum"] = z2_sum;
  j["success_airtime"] = success_airtime;
  return j.dump(indent);
}

}  // namespace laacoex
