// System-level parameters of the LAA eNB / Wi-Fi AP coexistence model.
//
// Node L is the LTE-LAA eNB: it contends with a binary-exponential-backoff
// ladder and, once it wins the channel, transmits a fixed-length MCOT of
// `mcot_slots` slots (n_sf subframes of sf_slot slots each).  Node H is the
// Wi-Fi AP: it cannot sense node L (asymmetric hidden terminal) and sends
// geometrically distributed packets with mean `t_wifi` slots.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

namespace laacoex {

/// Which subframe of an MCOT drives the contention-window doubling decision.
enum class RsfChoice {
  kFirst,         ///< subframe 1
  kLastEligible,  ///< last subframe whose HARQ feedback arrives in time
};

struct SystemConfig {
  int cw_min = 16;       ///< W0, contention window at backoff stage 0 (slots)
  int m = 6;             ///< max doubling exponent; stages run 0..m+1
  double t_slot_us = 9.0;
  int n_sf = 8;          ///< subframes per MCOT
  int sf_slot = 111;     ///< slots per subframe (floor(1000us / 9us))
  int mcot_slots = 888;  ///< M, MCOT length in slots (defaults to n_sf * sf_slot)
  int rsf = 1;           ///< reference subframe index, 1-based
  double t_wifi = 54.0;  ///< mean Wi-Fi packet length in slots
  double z2 = 0.5;       ///< OW-side share assumed for an overlapping packet

  /// Node H's reaction to a collision at the top backoff stage: reset to
  /// stage 0 (default, mirrors node L's retry limit) or stay saturated.
  bool wifi_saturate_at_max = false;

  int num_stages() const { return m + 2; }

  /// W_i = min(2^i, 2^m) * W0, so the top two stages share one window.
  int window(int stage) const;
  int cw_max() const;

  /// Per-slot probability that node H's in-flight packet ends this slot.
  double p_complete() const { return 1.0 / t_wifi; }

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;

  /// Canonical key=value form; stable field order, also used for hashing.
  std::string to_kv_string() const;

  /// FNV-1a hash of the canonical form, for cache keys and dump headers.
  std::uint64_t hash() const;

  bool operator==(const SystemConfig&) const = default;
};

/// Paper-scale preset: priority-class-4 contention parameters (W0=16, m=6),
/// 9 us slots, and the RSF matching the MCOT duration.
SystemConfig paper_preset(int t_mcot_ms, RsfChoice rsf_choice, double t_wifi);

/// Reads `key = value` lines ('#' comments, blank lines allowed).
std::map<std::string, std::string> parse_kv_file(const std::string& path);
std::map<std::string, std::string> parse_kv_text(const std::string& text);

/// Applies one key to a config; returns false for unknown keys.
bool apply_config_key(SystemConfig& cfg, const std::string& key, const std::string& value);

std::ostream& operator<<(std::ostream& os, const SystemConfig& cfg);

}  // namespace laacoex
