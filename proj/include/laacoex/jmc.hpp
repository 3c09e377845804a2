// The joint chain of (node L, node H), with node L collapsed to M MCOT slots
// plus one aggregate state per backoff stage.
//
// A joint step factorizes into an outer transition of node L (a scalar, or a
// per-h diagonal where node L's move depends on node H) followed by the inner
// matrix of node H under the matching regime.  The full kernel is never
// materialized except by the dense reference solver.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "laacoex/laa_chain.hpp"
#include "laacoex/wifi_chain.hpp"

namespace laacoex {

/// One outer transition l -> l' of node L's simplified chain.
struct OuterTransition {
  int from_l = 0;  ///< 1-based; 1..M are MCOT slots, M+1+i is backoff stage i
  int to_l = 0;
  Regime regime = Regime::MC;
  double scalar = 0.0;        ///< used when diag is empty
  std::vector<double> diag;   ///< per-h transition probability, else empty

  bool is_vector() const { return !diag.empty(); }
  double weight(int h) const { return diag.empty() ? scalar : diag[h]; }
};

/// Bundle of the three inner matrices plus the state space they index.
struct InnerMatrices {
  WifiStateSpace space;
  InnerMatrix mc;
  InnerMatrix ow;
  InnerMatrix ol;

  explicit InnerMatrices(const SystemConfig& cfg)
      : space(cfg),
        mc(build_inner_matrix(cfg, Regime::MC)),
        ow(build_inner_matrix(cfg, Regime::OW)),
        ol(build_inner_matrix(cfg, Regime::OL)) {}

  const InnerMatrix& of(Regime r) const {
    switch (r) {
      case Regime::MC: return mc;
      case Regime::OW: return ow;
      case Regime::OL: return ol;
    }
    throw std::logic_error("bad regime");
  }
};

/// Builds the complete outer transition list:
///  1. l -> l+1 inside the MCOT (scalar 1, regime MC);
///  2. M -> 1, immediate next MCOT (scalar, regime MC);
///  3. M -> backoff stage j (scalar, regime OL: running packets overlap);
///  4. backoff stage -> 1 (diagonal: 0 while node H transmits, else the
///     probability the aggregated backoff counter is at its last decrement);
///  5. backoff stage -> itself (diagonal, complement of case 4; regime OW).
/// Throws if any contention window is below 2 (the stage aggregate needs at
/// least one backoff counter value).
std::vector<OuterTransition> build_outer_transitions(const SystemConfig& cfg,
                                                     const LaaChainSolution& sol);

struct JointDistribution {
  int num_l = 0;   ///< M + m + 2
  int num_h = 0;   ///< |S_H|
  int mcot_slots = 0;
  std::vector<double> pi;  ///< block-major by l, pi[(l-1)*num_h + h]
  double residual = 0.0;   ///< ||pi P - pi||_1 of the returned vector
  long iterations = 0;
  std::string solver;

  std::span<const double> block(int l) const {
    if (l < 1 || l > num_l) throw std::out_of_range("l out of range");
    return {pi.data() + static_cast<std::size_t>(l - 1) * num_h,
            static_cast<std::size_t>(num_h)};
  }
  double block_mass(int l) const;
};

struct SolverOptions {
  enum class Method { kPower, kDense, kCycle };
  Method method = Method::kPower;
  double tol = 1e-10;          ///< L1 change between iterates
  long max_iters = 2'000'000;
  bool cesaro = false;         ///< iterate (I+P)/2 instead of P
  int dense_cap = 50'000;      ///< refuse dense solves above this state count
  const JointDistribution* warm_start = nullptr;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Stationary distribution of the joint chain.
///  - kPower: block-structured power iteration from the uniform vector.
///  - kDense: materialized kernel, direct null-space solve (small configs).
///  - kCycle: exact block elimination around the MCOT cycle; equivalent to
///    the power fixed point but converges in the return map of the first
///    MCOT slot, which is orders of magnitude faster at full scale.
JointDistribution stationary(const SystemConfig& cfg, const LaaChainSolution& sol,
                             const std::vector<OuterTransition>& transitions,
                             const InnerMatrices& inner, const SolverOptions& opts = {});

/// The l-block of pi (copy).
std::vector<double> marginal(const JointDistribution& dist, int l);

/// One application of the joint kernel: out = in * P.  Both vectors are laid
/// out like JointDistribution::pi.
void apply_joint_kernel(const std::vector<OuterTransition>& transitions,
                        const InnerMatrices& inner, int num_l,
                        std::span<const double> in, std::span<double> out);

/// Binary dump of a converged distribution, keyed by the config hash.
void save_distribution(const std::string& path, const JointDistribution& dist,
                       std::uint64_t config_hash);
std::optional<JointDistribution> load_distribution(const std::string& path,
                                                   std::uint64_t config_hash);

}  // namespace laacoex
