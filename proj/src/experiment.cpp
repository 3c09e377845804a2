#include "laacoex/experiment.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace laacoex {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ',')) {
    const auto b = cur.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = cur.find_last_not_of(" \t");
    out.push_back(cur.substr(b, e - b + 1));
  }
  return out;
}

const std::vector<std::pair<std::string, std::vector<std::string>>>& metric_families() {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> families = {
      {"transmit_probabilities",
       {"tau_l", "tau_h", "tau_h_mc", "tau_h_ow", "tau_h_mc_abs", "tau_h_ow_abs"}},
      {"collision_doubling", {"p_b_l", "p_overlap", "p_c_h", "p_d", "avg_collided_sf"}},
      {"subframe_collisions", {}},  // c_sf_* columns, matched by prefix
      {"throughput_delay", {"alpha", "s_l", "s_h", "e_d_l", "e_d_h"}},
      {"z2", {"z2"}},
  };
  return families;
}

}  // namespace

ToleranceProfile tolerance_profile(const std::string& name) {
  if (name == "strict") return {"strict", 0.005, 0.01, 1.0};
  if (name == "paper") return {"paper", 0.02, 0.05, 3.0};
  throw std::invalid_argument("unknown tolerance profile: " + name);
}

bool ExperimentSpec::apply_key(const std::string& key, const std::string& value) {
  if (key == "mode") {
    if (value == "analyze") mode = ExperimentMode::kAnalyze;
    else if (value == "simulate") mode = ExperimentMode::kSimulate;
    else if (value == "compare") mode = ExperimentMode::kCompare;
    else if (value == "sweep") mode = ExperimentMode::kSweep;
    else if (value == "table4") mode = ExperimentMode::kTable4;
    else if (value == "table5") mode = ExperimentMode::kTable5;
    else if (value == "figure") mode = ExperimentMode::kFigure;
    else throw std::invalid_argument("unknown mode: " + value);
  } else if (key == "preset_mcot_ms") {
    const int ms = std::stoi(value);
    const RsfChoice choice = base.rsf == 1 ? RsfChoice::kFirst : RsfChoice::kLastEligible;
    base = paper_preset(ms, choice, base.t_wifi);
  } else if (key == "preset_rsf") {
    const RsfChoice choice = value == "first" ? RsfChoice::kFirst : RsfChoice::kLastEligible;
    base = paper_preset(base.n_sf, choice, base.t_wifi);
  } else if (key == "sweep_t_wifi") {
    sweep_t_wifi.clear();
    for (const auto& v : split_list(value)) sweep_t_wifi.push_back(std::stod(v));
  } else if (key == "sweep_rsf") {
    sweep_rsf.clear();
    for (const auto& v : split_list(value)) sweep_rsf.push_back(std::stoi(v));
  } else if (key == "sweep_n_sf") {
    sweep_n_sf.clear();
    for (const auto& v : split_list(value)) sweep_n_sf.push_back(std::stoi(v));
  } else if (key == "engines") {
    run_analytic = run_simulation = false;
    for (const auto& v : split_list(value)) {
      if (v == "analytic" || v == "analyze") run_analytic = true;
      else if (v == "simulation" || v == "simulate") run_simulation = true;
      else throw std::invalid_argument("unknown engine: " + v);
    }
  } else if (key == "seeds") {
    const int n = std::stoi(value);
    if (n < 1) throw std::invalid_argument("seeds must be >= 1");
    seeds.clear();
    for (int i = 1; i <= n; ++i) seeds.push_back(static_cast<std::uint64_t>(i));
  } else if (key == "seed_list") {
    seeds.clear();
    for (const auto& v : split_list(value)) seeds.push_back(std::stoull(v));
  } else if (key == "slots") {
    total_slots = std::stoull(value);
  } else if (key == "warmup") {
    warmup_slots = std::stoull(value);
  } else if (key == "out") {
    out_dir = value;
  } else if (key == "cache") {
    cache_dir = value;
  } else if (key == "jobs") {
    jobs = std::stoi(value);
  } else if (key == "tol_profile") {
    tolerance = tolerance_profile(value);
  } else if (key == "figure") {
    figure = value;
  } else if (key == "solver") {
    if (value == "power") fp.solver.method = SolverOptions::Method::kPower;
    else if (value == "dense") fp.solver.method = SolverOptions::Method::kDense;
    else if (value == "cycle") fp.solver.method = SolverOptions::Method::kCycle;
    else throw std::invalid_argument("unknown solver: " + value);
  } else if (key == "pi_tol") {
    fp.solver.tol = std::stod(value);
  } else if (key == "fp_tol") {
    fp.tol = std::stod(value);
  } else if (key == "fp_damping") {
    fp.damping = std::stod(value);
  } else if (key == "fp_max_rounds") {
    fp.max_rounds = std::stoi(value);
  } else {
    return false;
  }
  return true;
}

ExperimentSpec spec_from_kv(const std::map<std::string, std::string>& kv) {
  ExperimentSpec spec;
  // Presets first so explicit config keys override them.
  for (const char* key : {"preset_mcot_ms", "preset_rsf"}) {
    if (auto it = kv.find(key); it != kv.end()) spec.apply_key(key, it->second);
  }
  for (const auto& [key, value] : kv) {
    if (key == std::string("preset_mcot_ms") || key == std::string("preset_rsf")) continue;
    if (spec.apply_key(key, value)) continue;
    if (!apply_config_key(spec.base, key, value)) {
      throw std::invalid_argument("unknown config key: " + key);
    }
  }
  spec.base.validate();
  return spec;
}

ExperimentSpec load_spec(const std::string& path) { return spec_from_kv(parse_kv_file(path)); }

namespace {

SystemConfig config_for(const SystemConfig& base, const CellCoord& coord) {
  SystemConfig cfg = base;
  const bool consistent_mcot = base.mcot_slots == base.n_sf * base.sf_slot;
  cfg.n_sf = coord.n_sf;
  cfg.rsf = coord.rsf;
  cfg.t_wifi = coord.t_wifi;
  if (consistent_mcot) cfg.mcot_slots = cfg.n_sf * cfg.sf_slot;
  cfg.validate();
  return cfg;
}

std::optional<std::string> cache_lookup(const std::string& cache_dir, const std::string& key) {
  if (cache_dir.empty()) return std::nullopt;
  const fs::path p = fs::path(cache_dir) / (key + ".json");
  std::ifstream in(p);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void cache_store(const std::string& cache_dir, const std::string& key, const std::string& text) {
  if (cache_dir.empty()) return;
  fs::create_directories(cache_dir);
  std::ofstream out(fs::path(cache_dir) / (key + ".json"));
  out << text;
}

}  // namespace

CellResult analytic_cell(const SystemConfig& cfg, const FixedPointOptions& fp,
                         const std::string& cache_dir) {
  CellResult cell;
  cell.coord = {cfg.n_sf, cfg.rsf, cfg.t_wifi};
  cell.engine = "analytic";
  std::ostringstream keysrc;
  keysrc << "analytic\n" << cfg.to_kv_string() << "fp " << fp.seed_p_b_l << ' ' << fp.seed_p_d
         << ' ' << fp.damping << ' ' << fp.tol << ' ' << fp.max_rounds << ' '
         << static_cast<int>(fp.solver.method) << ' ' << fp.solver.tol << '\n';
  const std::string key = hex64(fnv1a(keysrc.str()));
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (auto hit = cache_lookup(cache_dir, key)) {
      cell.report = MetricsReport::from_json(json::parse(*hit).at("report").dump());
      cell.ok = true;
    } else {
      auto result = fixed_point(cfg, fp);
      cell.report = std::move(result.report);
      cell.ok = true;
      json j;
      j["report"] = json::parse(cell.report.to_json());
      cache_store(cache_dir, key, j.dump(2));
    }
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  cell.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return cell;
}

CellResult simulation_cell(const SystemConfig& cfg, const std::vector<std::uint64_t>& seeds,
                           std::uint64_t total_slots, std::uint64_t warmup_slots,
                           const std::string& cache_dir) {
  CellResult cell;
  cell.coord = {cfg.n_sf, cfg.rsf, cfg.t_wifi};
  cell.engine = "simulation";
  std::ostringstream keysrc;
  keysrc << "simulation\n" << cfg.to_kv_string() << "slots " << total_slots << " warmup "
         << warmup_slots << " seeds";
  for (auto s : seeds) keysrc << ' ' << s;
  keysrc << '\n';
  const std::string key = hex64(fnv1a(keysrc.str()));
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (auto hit = cache_lookup(cache_dir, key)) {
      const json j = json::parse(*hit);
      cell.report = MetricsReport::from_json(j.at("report").dump());
      for (const auto& [k, v] : j.at("ci").items()) cell.ci_halfwidth[k] = v.get<double>();
      cell.ok = true;
    } else {
      if (seeds.empty()) throw std::invalid_argument("no seeds");
      SimStats merged;
      bool first = true;
      for (const auto seed : seeds) {
        SimConfig sim;
        sim.system = cfg;
        sim.seed = seed;
        sim.total_slots = total_slots;
        sim.warmup_slots = warmup_slots;
        SimStats stats = run(sim);
        if (first) {
          merged = std::move(stats);
          first = false;
        } else {
          merged.merge(stats);
        }
      }
      auto meas = measure(merged);
      cell.report = std::move(meas.report);
      cell.ci_halfwidth = std::move(meas.ci_halfwidth);
      cell.ok = true;
      json j;
      j["report"] = json::parse(cell.report.to_json());
      j["ci"] = cell.ci_halfwidth;
      cache_store(cache_dir, key, j.dump(2));
    }
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  cell.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return cell;
}

std::vector<ComparisonRow> compare_reports(const CellCoord& coord, const MetricsReport& analytic,
                                           const MetricsReport& simulated,
                                           const std::map<std::string, double>& ci,
                                           const ToleranceProfile& tol) {
  std::vector<ComparisonRow> rows;
  const auto a_items = analytic.items();
  std::map<std::string, std::optional<double>> s_items;
  for (const auto& [k, v] : simulated.items()) s_items[k] = v;

  for (const auto& [name, a_val] : a_items) {
    if (name == "z2") continue;  // an assumption on the analytic side, not a prediction
    ComparisonRow row;
    row.coord = coord;
    row.metric = name;
    row.analytic = a_val;
    const auto s_it = s_items.find(name);
    if (s_it != s_items.end()) row.simulated = s_it->second;
    if (auto c = ci.find(name); c != ci.end()) row.ci_halfwidth = c->second;
    if (row.analytic && row.simulated && std::isfinite(*row.analytic) &&
        std::isfinite(*row.simulated)) {
      const double diff = std::abs(*row.analytic - *row.simulated);
      row.abs_err = diff;
      if (*row.simulated != 0.0) row.rel_err = diff / std::abs(*row.simulated);
      double allowed = std::max(tol.abs_tol, tol.rel_tol * std::abs(*row.simulated));
      if (row.ci_halfwidth) allowed = std::max(allowed, tol.ci_mult * *row.ci_halfwidth);
      row.pass = diff <= allowed;
    } else {
      // No silent blanks: a row with only one side present is a failure.
      row.pass = !row.analytic.has_value() && !row.simulated.has_value();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

struct CellTask {
  CellCoord coord;
  bool analytic = false;
};

void write_file(const std::string& path, const std::string& body,
                std::vector<std::string>& written) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << body;
  written.push_back(path);
}

std::string csv_header() { return "n_sf,rsf,t_wifi,engine,metric,value,ci_halfwidth\n"; }

std::string cell_rows_for_metrics(const std::vector<CellResult>& cells,
                                  const std::vector<std::string>& metrics,
                                  const std::string& prefix) {
  struct Row {
    CellCoord c;
    std::string engine, metric, value, ci;
  };
  std::vector<Row> rows;
  for (const auto& cell : cells) {
    if (!cell.ok) continue;
    for (const auto& [name, value] : cell.report.items()) {
      const bool listed = std::find(metrics.begin(), metrics.end(), name) != metrics.end();
      const bool prefixed = !prefix.empty() && name.rfind(prefix, 0) == 0;
      if (!listed && !prefixed) continue;
      std::string ci;
      if (auto it = cell.ci_halfwidth.find(name); it != cell.ci_halfwidth.end()) {
        ci = fmt(it->second);
      }
      rows.push_back({cell.coord, cell.engine, name, fmt_opt(value), ci});
    }
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.c, a.engine, a.metric) < std::tie(b.c, b.engine, b.metric);
  });
  std::string body = csv_header();
  for (const auto& r : rows) {
    body += std::to_string(r.c.n_sf) + ',' + std::to_string(r.c.rsf) + ',' + fmt(r.c.t_wifi) +
            ',' + r.engine + ',' + r.metric + ',' + r.value + ',' + r.ci + '\n';
  }
  return body;
}

const CellResult* find_cell(const std::vector<CellResult>& cells, const CellCoord& coord,
                            const std::string& engine) {
  for (const auto& c : cells) {
    if (c.coord == coord && c.engine == engine && c.ok) return &c;
  }
  return nullptr;
}

std::vector<CellCoord> paper_grid(const std::vector<double>& t_wifi_axis) {
  std::vector<CellCoord> coords;
  for (const int n_sf : {8, 10}) {
    for (const int rsf : {1, n_sf - 4}) {
      for (const double tw : t_wifi_axis) coords.push_back({n_sf, rsf, tw});
    }
  }
  return coords;
}

const std::vector<double> kDefaultTWifiAxis = {4, 54, 104, 154, 204};

}  // namespace

std::vector<std::string> emit_figure_data(const std::vector<CellResult>& results,
                                          const std::string& figure, const std::string& out_dir) {
  struct SubFigure {
    std::string file;
    std::vector<CellCoord> coords;
    std::vector<std::string> metrics;
  };
  std::vector<SubFigure> subs;
  std::vector<double> axis;
  for (const auto& c : results) {
    if (std::find(axis.begin(), axis.end(), c.coord.t_wifi) == axis.end()) {
      axis.push_back(c.coord.t_wifi);
    }
  }
  std::sort(axis.begin(), axis.end());
  if (axis.empty()) axis = kDefaultTWifiAxis;

  const auto combo_coords = [&](int n_sf, int rsf) {
    std::vector<CellCoord> out;
    for (double tw : axis) out.push_back({n_sf, rsf, tw});
    return out;
  };
  const auto per_combo = [&](const std::vector<std::string>& metrics) {
    for (const int n_sf : {8, 10}) {
      for (const int rsf : {1, n_sf - 4}) {
        subs.push_back({figure + "_" + std::to_string(n_sf) + "ms_rsf" + std::to_string(rsf) +
                            ".csv",
                        combo_coords(n_sf, rsf), metrics});
      }
    }
  };
  const auto per_mcot = [&](const std::vector<std::string>& metrics) {
    for (const int n_sf : {8, 10}) {
      auto coords = combo_coords(n_sf, 1);
      const auto more = combo_coords(n_sf, n_sf - 4);
      coords.insert(coords.end(), more.begin(), more.end());
      subs.push_back({figure + "_" + std::to_string(n_sf) + "ms.csv", coords, metrics});
    }
  };

  if (figure == "fig7") per_combo({"tau_l", "tau_h", "tau_h_ow_abs", "tau_h_mc_abs"});
  else if (figure == "fig8") per_mcot({"p_c_h"});
  else if (figure == "fig9") per_mcot({"p_d"});
  else if (figure == "fig12") per_combo({"s_l", "s_h"});
  else if (figure == "fig13") per_combo({"e_d_l", "e_d_h"});
  else if (figure == "fig14") {
    std::vector<CellCoord> coords;
    for (const int n_sf : {8, 10}) {
      for (const int rsf : {1, n_sf - 4}) {
        const auto more = combo_coords(n_sf, rsf);
        coords.insert(coords.end(), more.begin(), more.end());
      }
    }
    subs.push_back({"fig14.csv", coords, {"s_l_plus_s_h"}});
  } else {
    throw std::invalid_argument("unknown figure: " + figure);
  }

  fs::create_directories(out_dir);
  std::vector<std::string> written;
  std::vector<std::string> missing;
  for (const auto& sub : subs) {
    std::string body = csv_header();
    std::vector<std::string> lines;
    for (const auto& coord : sub.coords) {
      for (const char* engine : {"analytic", "simulation"}) {
        const CellResult* cell = find_cell(results, coord, engine);
        if (!cell) {
          missing.push_back(sub.file + ": " + std::to_string(coord.n_sf) + "ms rsf" +
                            std::to_string(coord.rsf) + " t_wifi " + fmt(coord.t_wifi) + " " +
                            engine);
          continue;
        }
        for (const auto& metric : sub.metrics) {
          std::optional<double> value;
          if (metric == "s_l_plus_s_h") {
            if (cell->report.s_h) value = cell->report.s_l + *cell->report.s_h;
          } else {
            for (const auto& [name, v] : cell->report.items()) {
              if (name == metric) value = v;
            }
          }
          std::string ci;
          if (auto it = cell->ci_halfwidth.find(metric); it != cell->ci_halfwidth.end()) {
            ci = fmt(it->second);
          }
          lines.push_back(std::to_string(coord.n_sf) + ',' + std::to_string(coord.rsf) + ',' +
                          fmt(coord.t_wifi) + ',' + engine + ',' + metric + ',' + fmt_opt(value) +
                          ',' + ci + '\n');
        }
      }
    }
    std::sort(lines.begin(), lines.end());
    for (const auto& l : lines) body += l;
    write_file((fs::path(out_dir) / sub.file).string(), body, written);
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    std::string body;
    for (const auto& m : missing) body += m + '\n';
    write_file((fs::path(out_dir) / (figure + "_missing.txt")).string(), body, written);
  }
  return written;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  ExperimentResult result;
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(spec.out_dir);

  // Assemble the cell grid for the requested mode.
  std::vector<CellCoord> coords;
  bool analytic = spec.run_analytic;
  bool simulation = spec.run_simulation;
  std::vector<double> axis = spec.sweep_t_wifi.empty() ? kDefaultTWifiAxis : spec.sweep_t_wifi;
  switch (spec.mode) {
    case ExperimentMode::kAnalyze:
      coords.push_back({spec.base.n_sf, spec.base.rsf, spec.base.t_wifi});
      analytic = true;
      simulation = false;
      break;
    case ExperimentMode::kSimulate:
      coords.push_back({spec.base.n_sf, spec.base.rsf, spec.base.t_wifi});
      analytic = false;
      simulation = true;
      break;
    case ExperimentMode::kCompare:
      coords.push_back({spec.base.n_sf, spec.base.rsf, spec.base.t_wifi});
      analytic = true;
      simulation = true;
      break;
    case ExperimentMode::kSweep: {
      if (spec.sweep_t_wifi.empty() && spec.sweep_rsf.empty() && spec.sweep_n_sf.empty()) {
        throw std::invalid_argument("sweep mode requires at least one non-empty sweep axis");
      }
      const auto n_sfs = spec.sweep_n_sf.empty() ? std::vector<int>{spec.base.n_sf} : spec.sweep_n_sf;
      const auto rsfs = spec.sweep_rsf.empty() ? std::vector<int>{spec.base.rsf} : spec.sweep_rsf;
      const auto tws =
          spec.sweep_t_wifi.empty() ? std::vector<double>{spec.base.t_wifi} : spec.sweep_t_wifi;
      for (int n : n_sfs)
        for (int r : rsfs)
          for (double t : tws) coords.push_back({n, r, t});
      break;
    }
    case ExperimentMode::kTable4:
      for (const int rsf : {1, 4})
        for (const double tw : axis) coords.push_back({8, rsf, tw});
      analytic = true;
      simulation = true;
      break;
    case ExperimentMode::kTable5:
      coords = paper_grid(axis);
      analytic = false;
      simulation = true;
      break;
    case ExperimentMode::kFigure:
      if (spec.figure.empty()) throw std::invalid_argument("figure mode requires figure=figN");
      coords = paper_grid(axis);
      break;
  }

  // Flatten into independent engine tasks and execute (optionally in a pool).
  std::vector<CellTask> tasks;
  for (const auto& coord : coords) {
    if (analytic) tasks.push_back({coord, true});
    if (simulation) tasks.push_back({coord, false});
  }
  result.cells.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) break;
      const auto& task = tasks[i];
      CellResult cell;
      try {
        const SystemConfig cfg = config_for(spec.base, task.coord);
        cell = task.analytic
                   ? analytic_cell(cfg, spec.fp, spec.cache_dir)
                   : simulation_cell(cfg, spec.seeds, spec.total_slots, spec.warmup_slots,
                                     spec.cache_dir);
      } catch (const std::exception& e) {
        cell.coord = task.coord;
        cell.engine = task.analytic ? "analytic" : "simulation";
        cell.error = e.what();
      }
      result.cells[i] = std::move(cell);
    }
  };
  if (spec.jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < spec.jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Family CSVs.
  for (const auto& [family, metrics] : metric_families()) {
    const std::string prefix = family == "subframe_collisions" ? "c_sf_" : "";
    write_file((fs::path(spec.out_dir) / (family + ".csv")).string(),
               cell_rows_for_metrics(result.cells, metrics, prefix), result.written_files);
  }

  // Mode-specific artifacts.
  if (spec.mode == ExperimentMode::kCompare || spec.mode == ExperimentMode::kTable4) {
    for (const auto& coord : coords) {
      const CellResult* a = find_cell(result.cells, coord, "analytic");
      const CellResult* s = find_cell(result.cells, coord, "simulation");
      if (!a || !s) continue;
      auto rows = compare_reports(coord, a->report, s->report, s->ci_halfwidth, spec.tolerance);
      result.comparisons.insert(result.comparisons.end(), rows.begin(), rows.end());
    }
    std::sort(result.comparisons.begin(), result.comparisons.end(),
              [](const ComparisonRow& a, const ComparisonRow& b) {
                return std::tie(a.coord, a.metric) < std::tie(b.coord, b.metric);
              });
    std::string body = "n_sf,rsf,t_wifi,metric,analytic,simulated,ci_halfwidth,abs_err,rel_err,pass\n";
    for (const auto& r : result.comparisons) {
      body += std::to_string(r.coord.n_sf) + ',' + std::to_string(r.coord.rsf) + ',' +
              fmt(r.coord.t_wifi) + ',' + r.metric + ',' + fmt_opt(r.analytic) + ',' +
              fmt_opt(r.simulated) + ',' + fmt_opt(r.ci_halfwidth) + ',' + fmt_opt(r.abs_err) +
              ',' + fmt_opt(r.rel_err) + ',' + (r.pass ? "1" : "0") + '\n';
    }
    write_file((fs::path(spec.out_dir) / "comparison.csv").string(), body, result.written_files);
    if (spec.mode == ExperimentMode::kCompare) {
      for (const auto& r : result.comparisons) {
        if (!r.pass) result.exit_code = 2;
      }
    }
  }

  if (spec.mode == ExperimentMode::kTable4) {
    std::string body = "t_wifi,rsf,engine,avg_collided_sf\n";
    std::vector<std::string> lines;
    for (const auto& cell : result.cells) {
      if (!cell.ok) continue;
      lines.push_back(fmt(cell.coord.t_wifi) + ',' + std::to_string(cell.coord.rsf) + ',' +
                      cell.engine + ',' + fmt(cell.report.avg_collided_sf) + '\n');
    }
    std::sort(lines.begin(), lines.end());
    for (const auto& l : lines) body += l;
    write_file((fs::path(spec.out_dir) / "table4.csv").string(), body, result.written_files);
  }
  if (spec.mode == ExperimentMode::kTable5) {
    std::string body = "t_wifi,n_sf,rsf,z2,ci_halfwidth,overlap_events\n";
    std::vector<std::string> lines;
    for (const auto& cell : result.cells) {
      if (!cell.ok) continue;
      std::string ci;
      if (auto it = cell.ci_halfwidth.find("z2"); it != cell.ci_halfwidth.end()) {
        ci = fmt(it->second);
      }
      lines.push_back(fmt(cell.coord.t_wifi) + ',' + std::to_string(cell.coord.n_sf) + ',' +
                      std::to_string(cell.coord.rsf) + ',' + fmt_opt(cell.report.z2) + ',' + ci +
                      ',' + '\n');
    }
    std::sort(lines.begin(), lines.end());
    for (const auto& l : lines) body += l;
    write_file((fs::path(spec.out_dir) / "table5.csv").string(), body, result.written_files);
  }
  if (spec.mode == ExperimentMode::kFigure) {
    auto files = emit_figure_data(result.cells, spec.figure, spec.out_dir);
    result.written_files.insert(result.written_files.end(), files.begin(), files.end());
  }

  // Manifest (the only artifact carrying timestamps and runtimes).
  json manifest;
  manifest["version"] = "0.1.0";
  manifest["mode"] = static_cast<int>(spec.mode);
  manifest["base_config"] = spec.base.to_kv_string();
  manifest["base_config_hash"] = hex64(spec.base.hash());
  manifest["seeds"] = spec.seeds;
  manifest["total_slots"] = spec.total_slots;
  manifest["warmup_slots"] = spec.warmup_slots;
  manifest["tolerance_profile"] = spec.tolerance.name;
  manifest["timestamp_unix"] =
      std::chrono::duration_cast<std::chrono::seconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count();
  manifest["runtime_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json cells = json::array();
  for (const auto& c : result.cells) {
    json jc;
    jc["n_sf"] = c.coord.n_sf;
    jc["rsf"] = c.coord.rsf;
    jc["t_wifi"] = c.coord.t_wifi;
    jc["engine"] = c.engine;
    jc["ok"] = c.ok;
    if (!c.ok) jc["error"] = c.error;
    jc["runtime_seconds"] = c.runtime_seconds;
    cells.push_back(jc);
  }
  manifest["cells"] = cells;
  write_file((fs::path(spec.out_dir) / "manifest.json").string(), manifest.dump(2),
             result.written_files);

  return result;
}

}  // namespace laacoex
