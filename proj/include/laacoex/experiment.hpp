// Batch experiment front-end: run analytic fixed points and/or simulations
// over config grids, emit long-format CSV families plus a JSON manifest, and
// compare the two engines against a tolerance profile.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "laacoex/metrics.hpp"
#include "laacoex/simulator.hpp"

namespace laacoex {

enum class ExperimentMode { kAnalyze, kSimulate, kCompare, kSweep, kTable4, kTable5, kFigure };

struct ToleranceProfile {
  std::string name = "paper";
  double abs_tol = 0.02;
  double rel_tol = 0.05;
  double ci_mult = 3.0;
};

ToleranceProfile tolerance_profile(const std::string& name);

struct ExperimentSpec {
  ExperimentMode mode = ExperimentMode::kAnalyze;
  SystemConfig base;

  std::vector<double> sweep_t_wifi;
  std::vector<int> sweep_rsf;
  std::vector<int> sweep_n_sf;
  bool run_analytic = true;
  bool run_simulation = false;

  std::vector<std::uint64_t> seeds = {1};
  std::uint64_t total_slots = 10'000'000;
  std::uint64_t warmup_slots = 100'000;

  std::string out_dir = "out";
  std::string cache_dir;  ///< empty disables caching
  int jobs = 1;
  ToleranceProfile tolerance;
  FixedPointOptions fp;
  std::string figure;  ///< fig7|fig8|fig9|fig12|fig13|fig14

  /// Applies one spec-level key; returns false for unknown keys (which are
  /// then tried as SystemConfig keys).
  bool apply_key(const std::string& key, const std::string& value);
};

ExperimentSpec load_spec(const std::string& path);
ExperimentSpec spec_from_kv(const std::map<std::string, std::string>& kv);

/// One grid point of a sweep.
struct CellCoord {
  int n_sf = 8;
  int rsf = 1;
  double t_wifi = 54.0;

  auto operator<=>(const CellCoord&) const = default;
};

struct CellResult {
  CellCoord coord;
  std::string engine;  ///< "analytic" or "simulation"
  bool ok = false;
  std::string error;
  MetricsReport report;
  std::map<std::string, double> ci_halfwidth;
  double runtime_seconds = 0.0;
};

struct ComparisonRow {
  CellCoord coord;
  std::string metric;
  std::optional<double> analytic;
  std::optional<double> simulated;
  std::optional<double> ci_halfwidth;
  std::optional<double> abs_err;
  std::optional<double> rel_err;
  bool pass = false;
};

/// pass <=> |analytic - simulated| <= max(abs_tol, rel_tol*|simulated|,
/// ci_mult * ci_halfwidth); rows with either side absent fail unless both are
/// absent.
std::vector<ComparisonRow> compare_reports(const CellCoord& coord, const MetricsReport& analytic,
                                           const MetricsReport& simulated,
                                           const std::map<std::string, double>& ci,
                                           const ToleranceProfile& tol);

struct ExperimentResult {
  std::vector<CellResult> cells;
  std::vector<ComparisonRow> comparisons;
  std::vector<std::string> written_files;
  int exit_code = 0;
};

/// Runs the experiment and writes all artifacts under spec.out_dir.
/// Returns exit code 0 (success), 2 (a comparison cell failed); throws on
/// execution errors (the CLI maps those to exit code 1).
ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Long-format figure data, one CSV per sub-figure, written under out_dir.
/// Unknown figure names throw; cells missing from `results` are listed in a
/// sidecar file.
std::vector<std::string> emit_figure_data(const std::vector<CellResult>& results,
                                          const std::string& figure, const std::string& out_dir);

/// Analytic fixed point for one cell, going through the cache when enabled.
CellResult analytic_cell(const SystemConfig& cfg, const FixedPointOptions& fp,
                         const std::string& cache_dir);

/// Simulation for one cell: one run per seed, merged.
CellResult simulation_cell(const SystemConfig& cfg, const std::vector<std::uint64_t>& seeds,
                           std::uint64_t total_slots, std::uint64_t warmup_slots,
                           const std::string& cache_dir);

}  // namespace laacoex
