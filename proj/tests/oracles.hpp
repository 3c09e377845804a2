// Test-only reference solvers, kept independent of the library's closed-form
// and block-structured code paths: the chains are materialized state by state
// and solved densely.

#pragma once

#include <Eigen/Dense>

#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "laacoex/config.hpp"

namespace laacoex::testing {

/// Explicit eNB chain: backoff states (stage, counter >= 1) and transmit
/// states (stage, mcot slot 1..M), solved as a dense stationary system.
struct DenseLaaChain {
  struct Result {
    std::map<std::pair<int, int>, double> backoff;   ///< (stage, k) -> mass
    std::map<std::pair<int, int>, double> transmit;  ///< (stage, j) -> mass
    double tau_l = 0.0;
  };

  static Result solve(const SystemConfig& cfg, double p_b_l, double p_d) {
    const int stages = cfg.num_stages();
    const int big_m = cfg.mcot_slots;

    std::vector<std::pair<int, int>> backoff_states;  // (stage, k)
    std::vector<std::pair<int, int>> transmit_states; // (stage, j)
    std::map<std::pair<int, int>, int> backoff_id, transmit_id;
    int n = 0;
    for (int i = 0; i < stages; ++i) {
      for (int k = 1; k < cfg.window(i); ++k) {
        backoff_id[{i, k}] = n++;
        backoff_states.push_back({i, k});
      }
    }
    for (int i = 0; i < stages; ++i) {
      for (int j = 1; j <= big_m; ++j) {
        transmit_id[{i, j}] = n++;
        transmit_states.push_back({i, j});
      }
    }

    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < stages; ++i) {
      for (int k = 1; k < cfg.window(i); ++k) {
        const int from = backoff_id[{i, k}];
        P(from, from) += p_b_l;
        if (k >= 2) {
          P(from, backoff_id[{i, k - 1}]) += 1.0 - p_b_l;
        } else {
          P(from, transmit_id[{i, 1}]) += 1.0 - p_b_l;
        }
      }
      for (int j = 1; j < big_m; ++j) {
        P(transmit_id[{i, j}], transmit_id[{i, j + 1}]) = 1.0;
      }
      const int from = transmit_id[{i, big_m}];
      const auto fan_out = [&](int stage, double mass) {
        const int w = cfg.window(stage);
        P(from, transmit_id[{stage, 1}]) += mass / w;
        for (int k = 1; k < w; ++k) P(from, backoff_id[{stage, k}]) += mass / w;
      };
      if (i <= cfg.m) {
        fan_out(i + 1, p_d);
        fan_out(0, 1.0 - p_d);
      } else {
        fan_out(0, 1.0);
      }
    }

    const Eigen::VectorXd pi = stationary_of(P);
    Result r;
    for (const auto& [key, id] : backoff_id) r.backoff[key] = pi[id];
    for (const auto& [key, id] : transmit_id) {
      r.transmit[key] = pi[id];
      r.tau_l += pi[id];
    }
    return r;
  }

  /// pi = pi P, sum pi = 1, via LU with one balance row replaced.
  static Eigen::VectorXd stationary_of(const Eigen::MatrixXd& P) {
    const int n = static_cast<int>(P.rows());
    for (int r = 0; r < n; ++r) {
      if (std::abs(P.row(r).sum() - 1.0) > 1e-12) {
        throw std::runtime_error("oracle chain is not row-stochastic");
      }
    }
    Eigen::MatrixXd a = P.transpose() - Eigen::MatrixXd::Identity(n, n);
    a.row(n - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b[n - 1] = 1.0;
    return Eigen::PartialPivLU<Eigen::MatrixXd>(a).solve(b);
  }
};

}  // namespace laacoex::testing
