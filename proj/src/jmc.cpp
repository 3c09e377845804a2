#include "laacoex/jmc.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>

namespace laacoex {

namespace {

double l1_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

void normalize(std::span<double> v) {
  const double sum = std::accumulate(v.begin(), v.end(), 0.0);
  if (sum > 0.0) {
    for (double& x : v) x /= sum;
  }
}

}  // namespace

double JointDistribution::block_mass(int l) const {
  const auto b = block(l);
  return std::accumulate(b.begin(), b.end(), 0.0);
}

std::vector<OuterTransition> build_outer_transitions(const SystemConfig& cfg,
                                                     const LaaChainSolution& sol) {
  cfg.validate();
  const int stages = cfg.num_stages();
  if (sol.num_stages() != stages) {
    throw std::invalid_argument("chain solution does not match the configuration");
  }
  for (int i = 0; i < stages; ++i) {
    if (cfg.window(i) < 2) {
      throw std::invalid_argument("every contention window must be >= 2 to aggregate backoff stages");
    }
  }

  const int big_m = cfg.mcot_slots;
  const WifiStateSpace space(cfg);
  const auto& ps = sol.p_stage_at_end;
  const double p_d = sol.p_d;

  // Mass leaving the MCOT without a doubling decision pending: stages that
  // complete successfully plus the top stage's retry-limit reset.
  double reset_mass = ps[stages - 1];
  for (int i = 0; i < stages - 1; ++i) reset_mass += ps[i] * (1.0 - p_d);

  std::vector<OuterTransition> out;
  out.reserve(static_cast<std::size_t>(big_m) + 3 * stages + 1);

  for (int l = 1; l < big_m; ++l) {
    out.push_back({l, l + 1, Regime::MC, 1.0, {}});
  }

  // MCOT end, new backoff counter drawn: counter 0 rolls straight into the
  // next MCOT, counter >= 1 lands in the matching aggregate backoff state.
  const int w0 = cfg.window(0);
  double to_next_mcot = reset_mass / w0;
  for (int i = 0; i < stages - 1; ++i) {
    to_next_mcot += ps[i] * p_d / cfg.window(i + 1);
  }
  out.push_back({big_m, 1, Regime::MC, to_next_mcot, {}});

  for (int j = 0; j < stages; ++j) {
    double scalar;
    if (j == 0) {
      scalar = reset_mass * (w0 - 1) / w0;
    } else {
      const int wj = cfg.window(j);
      scalar = ps[j - 1] * p_d * (wj - 1) / static_cast<double>(wj);
    }
    out.push_back({big_m, big_m + 1 + j, Regime::OL, scalar, {}});
  }

  for (int j = 0; j < stages; ++j) {
    const double exit_p = sol.bc_one_ratio[j];
    std::vector<double> leave(space.size());
    std::vector<double> stay(space.size());
    for (int h = 0; h < space.size(); ++h) {
      if (space.is_transmitting(h)) {
        leave[h] = 0.0;  // node L freezes while node H transmits
        stay[h] = 1.0;
      } else {
        leave[h] = exit_p;
        stay[h] = 1.0 - exit_p;
      }
    }
    // The step that lands in MCOT slot 1 runs under the MC regime; node H is
    // not transmitting on these rows, so MC and OW agree entry-wise there.
    out.push_back({big_m + 1 + j, 1, Regime::MC, 0.0, std::move(leave)});
    out.push_back({big_m + 1 + j, big_m + 1 + j, Regime::OW, 0.0, std::move(stay)});
  }
  return out;
}

void apply_joint_kernel(const std::vector<OuterTransition>& transitions,
                        const InnerMatrices& inner, int num_l,
                        std::span<const double> in, std::span<double> out) {
  const int num_h = inner.space.size();
  std::fill(out.begin(), out.end(), 0.0);
  std::vector<double> tmp(num_h);
  for (const auto& tr : transitions) {
    const auto src = in.subspan(static_cast<std::size_t>(tr.from_l - 1) * num_h, num_h);
    auto dst = out.subspan(static_cast<std::size_t>(tr.to_l - 1) * num_h, num_h);
    const auto& P = inner.of(tr.regime).P;
    if (!tr.is_vector() && tr.scalar == 1.0) {
      P.accumulate_left_product(src, dst);
      continue;
    }
    if (tr.is_vector()) {
      for (int h = 0; h < num_h; ++h) tmp[h] = src[h] * tr.diag[h];
    } else {
      if (tr.scalar == 0.0) continue;
      for (int h = 0; h < num_h; ++h) tmp[h] = src[h] * tr.scalar;
    }
    P.accumulate_left_product(tmp, dst);
  }
  (void)num_l;
}

namespace {

struct CycleStructure {
  double to_next_mcot = 0.0;               // M -> 1 scalar
  std::vector<double> to_stage;            // M -> backoff stage j scalars
  std::vector<const OuterTransition*> leave;  // stage j -> 1 diagonals
  std::vector<const OuterTransition*> stay;   // stage j -> j diagonals
};

CycleStructure extract_cycle_structure(const SystemConfig& cfg,
                                       const std::vector<OuterTransition>& transitions) {
  const int big_m = cfg.mcot_slots;
  const int stages = cfg.num_stages();
  CycleStructure cs;
  cs.to_stage.assign(stages, 0.0);
  cs.leave.assign(stages, nullptr);
  cs.stay.assign(stages, nullptr);
  int chain_links = 0;
  for (const auto& tr : transitions) {
    if (tr.from_l < big_m && tr.to_l == tr.from_l + 1 && !tr.is_vector() && tr.scalar == 1.0) {
      ++chain_links;
    } else if (tr.from_l == big_m && tr.to_l == 1 && !tr.is_vector()) {
      cs.to_next_mcot = tr.scalar;
    } else if (tr.from_l == big_m && tr.to_l > big_m && !tr.is_vector() && tr.regime == Regime::OL) {
      cs.to_stage[tr.to_l - big_m - 1] = tr.scalar;
    } else if (tr.from_l > big_m && tr.to_l == 1 && tr.is_vector()) {
      cs.leave[tr.from_l - big_m - 1] = &tr;
    } else if (tr.from_l > big_m && tr.to_l == tr.from_l && tr.is_vector() && tr.regime == Regime::OW) {
      cs.stay[tr.from_l - big_m - 1] = &tr;
    } else {
      throw std::invalid_argument("cycle solver: unrecognized outer transition shape");
    }
  }
  if (chain_links != big_m - 1) {
    throw std::invalid_argument("cycle solver: MCOT chain is incomplete");
  }
  for (int j = 0; j < stages; ++j) {
    if (!cs.leave[j] || !cs.stay[j]) {
      throw std::invalid_argument("cycle solver: missing backoff-stage transitions");
    }
  }
  return cs;
}

using SpMat = Eigen::SparseMatrix<double>;

/// I - P_OW^T * diag(stay_j), the per-stage balance operator of the backoff
/// sojourn, factorized once per configuration.
std::vector<std::unique_ptr<Eigen::SparseLU<SpMat>>> factorize_stages(
    const InnerMatrices& inner, const CycleStructure& cs) {
  const int n = inner.space.size();
  std::vector<std::unique_ptr<Eigen::SparseLU<SpMat>>> lus;
  for (std::size_t j = 0; j < cs.stay.size(); ++j) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(inner.ow.P.nonzeros() + n);
    for (int h = 0; h < n; ++h) trips.emplace_back(h, h, 1.0);
    const auto& diag = cs.stay[j]->diag;
    for (const auto& e : inner.ow.P.entries()) {
      if (diag[e.row] != 0.0) trips.emplace_back(e.col, e.row, -e.value * diag[e.row]);
    }
    SpMat a(n, n);
    a.setFromTriplets(trips.begin(), trips.end());
    auto lu = std::make_unique<Eigen::SparseLU<SpMat>>();
    lu->compute(a);
    if (lu->info() != Eigen::Success) {
      throw ConvergenceError("cycle solver: stage balance factorization failed", 0.0);
    }
    lus.push_back(std::move(lu));
  }
  return lus;
}

JointDistribution solve_cycle(const SystemConfig& cfg,
                              const std::vector<OuterTransition>& transitions,
                              const InnerMatrices& inner, const SolverOptions& opts) {
  const int num_h = inner.space.size();
  const int big_m = cfg.mcot_slots;
  const int stages = cfg.num_stages();
  const int num_l = big_m + stages;
  const auto cs = extract_cycle_structure(cfg, transitions);
  const auto stage_lu = factorize_stages(inner, cs);

  // The first MCOT slot can never hold an overlap state (those only exist
  // while node L is backing off), so the return-map iterate lives on the
  // backoff portion of the state space.
  std::vector<double> x(num_h, 0.0);
  std::fill(x.begin(), x.begin() + inner.space.backoff_count(), 1.0 / inner.space.backoff_count());
  if (opts.warm_start && opts.warm_start->num_h == num_h && opts.warm_start->num_l == num_l) {
    const auto b = opts.warm_start->block(1);
    std::copy(b.begin(), b.end(), x.begin());
    std::fill(x.begin() + inner.space.backoff_count(), x.end(), 0.0);
    normalize(x);
  }

  std::vector<double> cur(num_h), nxt(num_h), entry(num_h), tmp(num_h), newx(num_h);
  Eigen::VectorXd rhs(num_h);
  std::vector<Eigen::VectorXd> stage_pi(stages, Eigen::VectorXd::Zero(num_h));

  const auto run_cycle = [&](const std::vector<double>& from, std::vector<double>& to) {
    // March the distribution through the M MCOT slots.
    cur = from;
    for (int l = 1; l < big_m; ++l) {
      std::fill(nxt.begin(), nxt.end(), 0.0);
      inner.mc.P.accumulate_left_product(cur, nxt);
      cur.swap(nxt);
    }
    // Overlap step into the backoff stages, then each stage's stationary
    // balance given its inflow.
    std::fill(entry.begin(), entry.end(), 0.0);
    inner.ol.P.accumulate_left_product(cur, entry);
    for (int j = 0; j < stages; ++j) {
      if (cs.to_stage[j] == 0.0) {
        stage_pi[j].setZero();
        continue;
      }
      for (int h = 0; h < num_h; ++h) rhs[h] = cs.to_stage[j] * entry[h];
      stage_pi[j] = stage_lu[j]->solve(rhs);
    }
    // Flow back into MCOT slot 1.
    std::fill(to.begin(), to.end(), 0.0);
    if (cs.to_next_mcot != 0.0) {
      for (int h = 0; h < num_h; ++h) tmp[h] = cur[h] * cs.to_next_mcot;
      inner.mc.P.accumulate_left_product(tmp, to);
    }
    for (int j = 0; j < stages; ++j) {
      const auto& leave = cs.leave[j]->diag;
      const auto& P = inner.of(cs.leave[j]->regime).P;
      for (int h = 0; h < num_h; ++h) tmp[h] = stage_pi[j][h] * leave[h];
      P.accumulate_left_product(tmp, to);
    }
  };

  long iters = 0;
  const long max_iters = std::min<long>(opts.max_iters, 200000);
  double delta = std::numeric_limits<double>::infinity();
  while (iters < max_iters) {
    run_cycle(x, newx);
    normalize(newx);
    delta = l1_diff(x, newx);
    x.swap(newx);
    ++iters;
    if (delta <= opts.tol) break;
  }
  if (delta > opts.tol) {
    throw ConvergenceError("cycle solver did not converge: L1 delta " + std::to_string(delta), delta);
  }

  // Assemble the full joint vector from the converged return-map fixed point.
  JointDistribution dist;
  dist.num_l = num_l;
  dist.num_h = num_h;
  dist.mcot_slots = big_m;
  dist.solver = "cycle";
  dist.iterations = iters;
  dist.pi.assign(static_cast<std::size_t>(num_l) * num_h, 0.0);
  const auto write_block = [&](int l, const auto& v) {
    double* dst = dist.pi.data() + static_cast<std::size_t>(l - 1) * num_h;
    for (int h = 0; h < num_h; ++h) dst[h] = v[h];
  };
  cur = x;
  write_block(1, cur);
  for (int l = 2; l <= big_m; ++l) {
    std::fill(nxt.begin(), nxt.end(), 0.0);
    inner.mc.P.accumulate_left_product(cur, nxt);
    cur.swap(nxt);
    write_block(l, cur);
  }
  std::fill(entry.begin(), entry.end(), 0.0);
  inner.ol.P.accumulate_left_product(cur, entry);
  for (int j = 0; j < stages; ++j) {
    if (cs.to_stage[j] == 0.0) {
      stage_pi[j].setZero();
    } else {
      for (int h = 0; h < num_h; ++h) rhs[h] = cs.to_stage[j] * entry[h];
      stage_pi[j] = stage_lu[j]->solve(rhs);
    }
    write_block(big_m + 1 + j, stage_pi[j]);
  }
  normalize(dist.pi);

  std::vector<double> probe(dist.pi.size());
  apply_joint_kernel(transitions, inner, num_l, dist.pi, probe);
  dist.residual = l1_diff(dist.pi, probe);
  return dist;
}

JointDistribution solve_power(const SystemConfig& cfg,
                              const std::vector<OuterTransition>& transitions,
                              const InnerMatrices& inner, const SolverOptions& opts) {
  const int num_h = inner.space.size();
  const int num_l = cfg.mcot_slots + cfg.num_stages();
  const std::size_t n = static_cast<std::size_t>(num_l) * num_h;

  std::vector<double> pi(n, 1.0 / static_cast<double>(n));
  if (opts.warm_start && opts.warm_start->pi.size() == n) {
    pi = opts.warm_start->pi;
    normalize(pi);
  }
  std::vector<double> next(n);

  long iters = 0;
  double delta = std::numeric_limits<double>::infinity();
  while (iters < opts.max_iters) {
    apply_joint_kernel(transitions, inner, num_l, pi, next);
    if (opts.cesaro) {
      for (std::size_t i = 0; i < n; ++i) next[i] = 0.5 * (next[i] + pi[i]);
    }
    normalize(next);
    delta = l1_diff(pi, next);
    pi.swap(next);
    ++iters;
    if (delta <= opts.tol) break;
  }
  if (delta > opts.tol) {
    throw ConvergenceError("power iteration did not converge: L1 delta " + std::to_string(delta),
                           delta);
  }

  JointDistribution dist;
  dist.num_l = num_l;
  dist.num_h = num_h;
  dist.mcot_slots = cfg.mcot_slots;
  dist.solver = "power";
  dist.iterations = iters;
  dist.pi = std::move(pi);
  apply_joint_kernel(transitions, inner, num_l, dist.pi, next);
  dist.residual = l1_diff(dist.pi, next);
  return dist;
}

JointDistribution solve_dense(const SystemConfig& cfg,
                              const std::vector<OuterTransition>& transitions,
                              const InnerMatrices& inner, const SolverOptions& opts) {
  const int num_h = inner.space.size();
  const int num_l = cfg.mcot_slots + cfg.num_stages();
  const long n = static_cast<long>(num_l) * num_h;
  if (n > opts.dense_cap) {
    throw std::invalid_argument("dense solver refused: " + std::to_string(n) +
                                " joint states exceed the cap of " + std::to_string(opts.dense_cap));
  }

  // A = P^T - I with one balance equation swapped for normalization.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const auto& tr : transitions) {
    const auto& P = inner.of(tr.regime).P;
    const long row0 = static_cast<long>(tr.from_l - 1) * num_h;
    const long col0 = static_cast<long>(tr.to_l - 1) * num_h;
    for (int h = 0; h < num_h; ++h) {
      const double w = tr.weight(h);
      if (w == 0.0) continue;
      const auto cols = P.row_cols(h);
      const auto vals = P.row_values(h);
      for (std::size_t e = 0; e < cols.size(); ++e) {
        a(col0 + cols[e], row0 + h) += w * vals[e];
      }
    }
  }
  for (long i = 0; i < n; ++i) a(i, i) -= 1.0;
  a.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b[n - 1] = 1.0;

  const Eigen::VectorXd sol = Eigen::PartialPivLU<Eigen::MatrixXd>(a).solve(b);

  JointDistribution dist;
  dist.num_l = num_l;
  dist.num_h = num_h;
  dist.mcot_slots = cfg.mcot_slots;
  dist.solver = "dense";
  dist.iterations = 1;
  dist.pi.assign(sol.data(), sol.data() + n);
  for (double& v : dist.pi) {
    if (v < 0.0 && v > -1e-12) v = 0.0;  // round-off from the LU solve
  }
  normalize(dist.pi);
  std::vector<double> probe(dist.pi.size());
  apply_joint_kernel(transitions, inner, num_l, dist.pi, probe);
  dist.residual = l1_diff(dist.pi, probe);
  return dist;
}

}  // namespace

JointDistribution stationary(const SystemConfig& cfg, const LaaChainSolution& sol,
                             const std::vector<OuterTransition>& transitions,
                             const InnerMatrices& inner, const SolverOptions& opts) {
  (void)sol;
  switch (opts.method) {
    case SolverOptions::Method::kPower: return solve_power(cfg, transitions, inner, opts);
    case SolverOptions::Method::kDense: return solve_dense(cfg, transitions, inner, opts);
    case SolverOptions::Method::kCycle: return solve_cycle(cfg, transitions, inner, opts);
  }
  throw std::logic_error("bad solver method");
}

std::vector<double> marginal(const JointDistribution& dist, int l) {
  const auto b = dist.block(l);
  return {b.begin(), b.end()};
}

namespace {
constexpr char kPiMagic[8] = {'L', 'C', 'X', 'P', 'I', '1', '\n', '\0'};
}

void save_distribution(const std::string& path, const JointDistribution& dist,
                       std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kPiMagic, sizeof(kPiMagic));
  const auto put = [&](const void* p, std::size_t bytes) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(bytes));
  };
  const std::uint64_t dims[3] = {static_cast<std::uint64_t>(dist.num_l),
                                 static_cast<std::uint64_t>(dist.num_h),
                                 static_cast<std::uint64_t>(dist.mcot_slots)};
  put(&config_hash, sizeof(config_hash));
  put(dims, sizeof(dims));
  put(&dist.residual, sizeof(dist.residual));
  const std::uint64_t iters = static_cast<std::uint64_t>(dist.iterations);
  put(&iters, sizeof(iters));
  put(dist.pi.data(), dist.pi.size() * sizeof(double));
  if (!out) throw std::runtime_error("short write to " + path);
}

std::optional<JointDistribution> load_distribution(const std::string& path,
                                                   std::uint64_t config_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kPiMagic, sizeof(magic)) != 0) return std::nullopt;
  std::uint64_t hash = 0, dims[3] = {0, 0, 0}, iters = 0;
  double residual = 0.0;
  in.read(reinterpret_cast<char*>(&hash), sizeof(hash));
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  in.read(reinterpret_cast<char*>(&residual), sizeof(residual));
  in.read(reinterpret_cast<char*>(&iters), sizeof(iters));
  if (!in || hash != config_hash) return std::nullopt;
  JointDistribution dist;
  dist.num_l = static_cast<int>(dims[0]);
  dist.num_h = static_cast<int>(dims[1]);
  dist.mcot_slots = static_cast<int>(dims[2]);
  dist.residual = residual;
  dist.iterations = static_cast<long>(iters);
  dist.solver = "restored";
  dist.pi.resize(static_cast<std::size_t>(dist.num_l) * dist.num_h);
  in.read(reinterpret_cast<char*>(dist.pi.data()),
          static_cast<std::streamsize>(dist.pi.size() * sizeof(double)));
  if (!in) return std::nullopt;
  return dist;
}

}  // namespace laacoex
