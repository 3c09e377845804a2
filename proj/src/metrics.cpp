#include "laacoex/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace laacoex {

using nlohmann::json;

TransmitProbabilities transmit_probabilities(const JointDistribution& dist,
                                             const SystemConfig& cfg) {
  const WifiStateSpace space(cfg);
  if (space.size() != dist.num_h) {
    throw std::invalid_argument("distribution does not match the configuration");
  }
  const auto mask = space.transmit_mask();

  double tau_l = 0.0, tx_mc = 0.0, tx_ow = 0.0;
  for (int l = 1; l <= dist.num_l; ++l) {
    const auto block = dist.block(l);
    double mass = 0.0, tx = 0.0;
    for (int h = 0; h < dist.num_h; ++h) {
      mass += block[h];
      tx += block[h] * mask[h];
    }
    if (l <= dist.mcot_slots) {
      tau_l += mass;
      tx_mc += tx;
    } else {
      tx_ow += tx;
    }
  }

  TransmitProbabilities tp;
  tp.tau_l = tau_l;
  tp.tau_h = tx_mc + tx_ow;
  tp.tau_h_mc_abs = tx_mc;
  tp.tau_h_ow_abs = tx_ow;
  if (tau_l > 0.0) tp.tau_h_mc = tx_mc / tau_l;
  if (tau_l < 1.0) tp.tau_h_ow = tx_ow / (1.0 - tau_l);
  return tp;
}

CollisionProbabilities collision_probability(double tau_l, double tau_h,
                                             std::optional<double> tau_h_mc,
                                             const SystemConfig& cfg) {
  CollisionProbabilities out;
  if (tau_h <= 0.0 || !tau_h_mc.has_value()) return out;
  const double mc = *tau_h_mc;
  double overlap =
      tau_l * mc * (cfg.t_wifi - 1.0) / (static_cast<double>(cfg.mcot_slots) * tau_h);
  double pch = mc * tau_l / tau_h + cfg.z2 * overlap;
  const auto clamp01 = [&](double v) {
    if (v > 1.0) {
      out.clamped = true;
      return 1.0;
    }
    if (v < 0.0) {
      out.clamped = true;
      return 0.0;
    }
    return v;
  };
  out.p_overlap = clamp01(overlap);
  out.p_c_h = clamp01(pch);
  return out;
}

SubframeCollision subframe_collision(const JointDistribution& dist, const SystemConfig& cfg) {
  if (cfg.mcot_slots != cfg.n_sf * cfg.sf_slot) {
    throw std::invalid_argument("subframe collision requires mcot_slots == n_sf * sf_slot");
  }
  const WifiStateSpace space(cfg);
  if (space.size() != dist.num_h) {
    throw std::invalid_argument("distribution does not match the configuration");
  }

  SubframeCollision out;
  out.c_sf.resize(cfg.n_sf);
  out.c_sf_pending.resize(cfg.n_sf);
  for (int r = 1; r <= cfg.n_sf; ++r) {
    const int l = (r - 1) * cfg.sf_slot + 1;
    const auto block = dist.block(l);
    double mass = 0.0, pending = 0.0, in_flight = 0.0;
    for (int h = 0; h < dist.num_h; ++h) {
      mass += block[h];
      if (space.is_transmitting(h)) {
        in_flight += block[h];
      } else if (space.backoff_counter(h) < cfg.sf_slot) {
        pending += block[h];
      }
    }
    if (mass <= 0.0) {
      throw std::runtime_error("no stationary mass at the start of subframe " + std::to_string(r));
    }
    out.c_sf[r - 1] = (pending + in_flight) / mass;
    out.c_sf_pending[r - 1] = pending / mass;
  }
  out.p_d = out.c_sf[cfg.rsf - 1];
  return out;
}

void throughput_delay(MetricsReport& report, const SystemConfig& cfg) {
  report.avg_collided_sf = 0.0;
  for (double c : report.c_sf) report.avg_collided_sf += c;
  report.alpha = 1.0 - report.avg_collided_sf / cfg.n_sf;
  report.s_l = report.alpha * report.tau_l;
  if (report.p_c_h.has_value()) {
    report.s_h = (1.0 - *report.p_c_h) * report.tau_h;
  }
  const double inf = std::numeric_limits<double>::infinity();
  report.e_d_l = report.tau_l > 0.0
                     ? cfg.mcot_slots * (1.0 - report.tau_l) / report.tau_l
                     : inf;
  report.e_d_h = report.tau_h > 0.0 ? cfg.t_wifi * (1.0 - report.tau_h) / report.tau_h : inf;
}

std::optional<double> measure_z2_assumption(const OverlapSamples& samples) {
  if (samples.count <= 0 || samples.total_slots <= 0.0) return std::nullopt;
  return samples.ow_side_slots / samples.total_slots;
}

FixedPointResult fixed_point(const SystemConfig& cfg, const FixedPointOptions& opts) {
  cfg.validate();
  if (!(opts.damping > 0.0 && opts.damping <= 1.0)) {
    throw std::invalid_argument("damping must lie in (0,1]");
  }
  if (!(opts.seed_p_b_l >= 0.0 && opts.seed_p_b_l < 1.0) ||
      !(opts.seed_p_d >= 0.0 && opts.seed_p_d < 1.0)) {
    throw std::invalid_argument("seeds must lie in [0,1)");
  }

  const InnerMatrices inner(cfg);
  double p_b_l = opts.seed_p_b_l;
  double p_d = opts.seed_p_d;

  std::vector<FixedPointRound> trace;
  JointDistribution dist;
  TransmitProbabilities tp;
  SubframeCollision sfc;
  bool converged = false;

  for (int round = 1; round <= opts.max_rounds; ++round) {
    const LaaChainSolution sol = solve_closed_form(cfg, p_b_l, p_d);
    const auto transitions = build_outer_transitions(cfg, sol);
    SolverOptions solver = opts.solver;
    if (round > 1) solver.warm_start = &dist;
    dist = stationary(cfg, sol, transitions, inner, solver);

    tp = transmit_probabilities(dist, cfg);
    sfc = subframe_collision(dist, cfg);
    const double target_pb = std::min(tp.tau_h_ow.value_or(0.0), 1.0 - 1e-12);
    const double target_pd = sfc.p_d;
    const double residual = std::max(std::abs(target_pb - p_b_l), std::abs(target_pd - p_d));
    trace.push_back({round, p_b_l, p_d, target_pb, target_pd, residual, dist.residual,
                     dist.iterations});
    if (residual <= opts.tol) {
      converged = true;
      break;
    }
    p_b_l += opts.damping * (target_pb - p_b_l);
    p_d += opts.damping * (target_pd - p_d);
  }

  if (!converged) {
    const std::string what = "fixed point did not converge after " +
                             std::to_string(opts.max_rounds) + " rounds (residual " +
                             std::to_string(trace.back().residual) + ")";
    throw FixedPointError(what, std::move(trace));
  }

  MetricsReport report;
  report.engine = "analytic";
  report.tau_l = tp.tau_l;
  report.tau_h = tp.tau_h;
  report.tau_h_mc = tp.tau_h_mc;
  report.tau_h_ow = tp.tau_h_ow;
  report.tau_h_mc_abs = tp.tau_h_mc_abs;
  report.tau_h_ow_abs = tp.tau_h_ow_abs;
  report.p_b_l = tp.tau_h_ow;
  const auto coll = collision_probability(tp.tau_l, tp.tau_h, tp.tau_h_mc, cfg);
  report.p_overlap = coll.p_overlap;
  report.p_c_h = coll.p_c_h;
  report.diag.p_c_h_clamped = coll.clamped;
  report.c_sf = sfc.c_sf;
  report.diag.c_sf_pending = sfc.c_sf_pending;
  report.p_d = sfc.p_d;
  throughput_delay(report, cfg);
  report.z2 = cfg.z2;
  // Scalar-chain transmit probability at the read-back pair; at the fixed
  // point it coincides with the mass of the MCOT blocks.
  report.diag.tau_l_closed_form =
      solve_closed_form(cfg, tp.tau_h_ow.value_or(p_b_l), p_d).tau_l;
  report.diag.pi_residual = dist.residual;
  report.diag.pi_iterations = dist.iterations;
  report.diag.fixed_point_rounds = static_cast<int>(trace.size());

  return FixedPointResult{std::move(report), std::move(dist), std::move(trace)};
}

namespace {

json opt_to_json(const std::optional<double>& v) {
  if (!v.has_value() || !std::isfinite(*v)) return nullptr;
  return *v;
}

std::optional<double> opt_from_json(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

std::vector<std::pair<std::string, std::optional<double>>> MetricsReport::items() const {
  std::vector<std::pair<std::string, std::optional<double>>> out = {
      {"tau_l", tau_l},
      {"tau_h", tau_h},
      {"tau_h_mc", tau_h_mc},
      {"tau_h_ow", tau_h_ow},
      {"tau_h_mc_abs", tau_h_mc_abs},
      {"tau_h_ow_abs", tau_h_ow_abs},
      {"p_b_l", p_b_l},
      {"p_overlap", p_overlap},
      {"p_c_h", p_c_h},
      {"p_d", p_d},
      {"alpha", alpha},
      {"avg_collided_sf", avg_collided_sf},
      {"s_l", s_l},
      {"s_h", s_h},
      {"e_d_l", e_d_l},
      {"e_d_h", e_d_h},
      {"z2", z2},
  };
  for (std::size_t r = 0; r < c_sf.size(); ++r) {
    out.emplace_back("c_sf_" + std::to_string(r + 1), c_sf[r]);
  }
  return out;
}

std::string MetricsReport::to_json(int indent) const {
  json j;
  j["engine"] = engine;
  j["tau_l"] = tau_l;
  j["tau_h"] = tau_h;
  j["tau_h_mc"] = opt_to_json(tau_h_mc);
  j["tau_h_ow"] = opt_to_json(tau_h_ow);
  j["tau_h_mc_abs"] = tau_h_mc_abs;
  j["tau_h_ow_abs"] = tau_h_ow_abs;
  j["p_b_l"] = opt_to_json(p_b_l);
  j["p_overlap"] = opt_to_json(p_overlap);
  j["p_c_h"] = opt_to_json(p_c_h);
  j["c_sf"] = c_sf;
  j["p_d"] = p_d;
  j["avg_collided_sf"] = avg_collided_sf;
  j["alpha"] = alpha;
  j["s_l"] = s_l;
  j["s_h"] = opt_to_json(s_h);
  j["e_d_l"] = opt_to_json(e_d_l);
  j["e_d_h"] = opt_to_json(e_d_h);
  j["z2"] = opt_to_json(z2);
  json d;
  d["tau_l_closed_form"] = opt_to_json(diag.tau_l_closed_form);
  d["c_sf_pending"] = diag.c_sf_pending;
  d["p_c_h_clamped"] = diag.p_c_h_clamped;
  d["x_per_cycle"] = opt_to_json(diag.x_per_cycle);
  d["y_per_cycle"] = opt_to_json(diag.y_per_cycle);
  d["z_per_cycle"] = opt_to_json(diag.z_per_cycle);
  d["pi_residual"] = diag.pi_residual;
  d["pi_iterations"] = diag.pi_iterations;
  d["fixed_point_rounds"] = diag.fixed_point_rounds;
  j["diag"] = d;
  return j.dump(indent);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  const json j = json::parse(text);
  MetricsReport r;
  r.engine = j.value("engine", "");
  r.tau_l = j.at("tau_l").get<double>();
  r.tau_h = j.at("tau_h").get<double>();
  r.tau_h_mc = opt_from_json(j, "tau_h_mc");
  r.tau_h_ow = opt_from_json(j, "tau_h_ow");
  r.tau_h_mc_abs = j.at("tau_h_mc_abs").get<double>();
  r.tau_h_ow_abs = j.at("tau_h_ow_abs").get<double>();
  r.p_b_l = opt_from_json(j, "p_b_l");
  r.p_overlap = opt_from_json(j, "p_overlap");
  r.p_c_h = opt_from_json(j, "p_c_h");
  r.c_sf = j.at("c_sf").get<std::vector<double>>();
  r.p_d = j.at("p_d").get<double>();
  r.avg_collided_sf = j.at("avg_collided_sf").get<double>();
  r.alpha = j.at("alpha").get<double>();
  r.s_l = j.at("s_l").get<double>();
  r.s_h = opt_from_json(j, "s_h");
  r.e_d_l = opt_from_json(j, "e_d_l");
  r.e_d_h = opt_from_json(j, "e_d_h");
  r.z2 = opt_from_json(j, "z2");
  if (j.contains("diag")) {
    const json& d = j.at("diag");
    r.diag.tau_l_closed_form = opt_from_json(d, "tau_l_closed_form");
    if (d.contains("c_sf_pending")) {
      r.diag.c_sf_pending = d.at("c_sf_pending").get<std::vector<double>>();
    }
    r.diag.p_c_h_clamped = d.value("p_c_h_clamped", false);
    r.diag.x_per_cycle = opt_from_json(d, "x_per_cycle");
    r.diag.y_per_cycle = opt_from_json(d, "y_per_cycle");
    r.diag.z_per_cycle = opt_from_json(d, "z_per_cycle");
    r.diag.pi_residual = d.value("pi_residual", 0.0);
    r.diag.pi_iterations = d.value("pi_iterations", 0L);
    r.diag.fixed_point_rounds = d.value("fixed_point_rounds", 0);
  }
  return r;
}

}  // namespace laacoex
