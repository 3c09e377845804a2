// Seeded pseudo-random generator for the simulator: xoshiro256** with a
// splitmix64-expanded seed.  Both algorithms are public-domain and fully
// specified, so traces can be reproduced by other implementations from the
// seed alone.

#pragma once

#include <cmath>
#include <cstdint>

namespace laacoex {

struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
};

class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& word : s_) word = sm.next();
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform integer in [0, bound); bound >= 1.  Fixed-point multiply keeps
  /// the draw deterministic across platforms.
  std::uint64_t uniform_below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Geometric duration on {1, 2, ...} with P(end per slot) = p.
  std::uint64_t geometric_slots(double p) {
    if (p >= 1.0) return 1;
    const double u = uniform01();
    // Inverse CDF; log1p(-u) is exact near u = 0.
    const double v = std::floor(std::log1p(-u) / std::log1p(-p));
    return 1 + static_cast<std::uint64_t>(v);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
};

}  // namespace laacoex
