// Command-line front-end: analyze / simulate / compare / sweep / table4 /
// table5 / figure, driven by a flat key=value config file with CLI overrides.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "laacoex/experiment.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::string cache_dir;
  std::string tol_profile;
  std::string solver;
  std::string figure;
  int seeds = 0;
  std::string seed_list;
  std::uint64_t slots = 0;
  int jobs = 0;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key=value experiment/config file");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--cache", args.cache_dir, "cache directory for solved cells");
  cmd->add_option("--seeds", args.seeds, "number of simulation seeds (1..N)");
  cmd->add_option("--seed-list", args.seed_list, "comma-separated seed values");
  cmd->add_option("--slots", args.slots, "total simulated slots per seed");
  cmd->add_option("--jobs", args.jobs, "parallel cells");
  cmd->add_option("--tol-profile", args.tol_profile, "strict|paper");
  cmd->add_option("--solver", args.solver, "cycle|power|dense");
  cmd->add_option("--set", args.sets, "extra key=value overrides")->take_all();
}

laacoex::ExperimentSpec build_spec(const CommonArgs& args, const std::string& mode) {
  std::map<std::string, std::string> kv;
  if (!args.config_path.empty()) kv = laacoex::parse_kv_file(args.config_path);
  kv["mode"] = mode;
  if (!args.out_dir.empty()) kv["out"] = args.out_dir;
  if (!args.cache_dir.empty()) kv["cache"] = args.cache_dir;
  if (args.seeds > 0) kv["seeds"] = std::to_string(args.seeds);
  if (!args.seed_list.empty()) kv["seed_list"] = args.seed_list;
  if (args.slots > 0) kv["slots"] = std::to_string(args.slots);
  if (args.jobs > 0) kv["jobs"] = std::to_string(args.jobs);
  if (!args.tol_profile.empty()) kv["tol_profile"] = args.tol_profile;
  if (!args.solver.empty()) kv["solver"] = args.solver;
  if (!args.figure.empty()) kv["figure"] = args.figure;
  for (const auto& s : args.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value: " + s);
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return laacoex::spec_from_kv(kv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LAA / Wi-Fi coexistence analysis and simulation toolkit"};
  app.require_subcommand(1);

  CommonArgs args;
  const char* kModes[] = {"analyze", "simulate", "compare", "sweep", "table4", "table5", "figure"};
  const char* kHelp[] = {
      "analytic fixed point for one configuration",
      "slot-level simulation for one configuration",
      "both engines on one configuration plus a pass/fail comparison",
      "grid sweep over t_wifi / rsf / n_sf axes",
      "collided-subframes table over the 8 ms grid, both engines",
      "overlap-share table over the full paper grid, simulation",
      "long-format CSV data for one figure",
  };
  std::map<std::string, CLI::App*> cmds;
  for (int i = 0; i < 7; ++i) {
    CLI::App* cmd = app.add_subcommand(kModes[i], kHelp[i]);
    add_common(cmd, args);
    if (std::string(kModes[i]) == "figure") {
      cmd->add_option("name", args.figure, "fig7|fig8|fig9|fig12|fig13|fig14");
    }
    cmds[kModes[i]] = cmd;
  }

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [mode, cmd] : cmds) {
      if (!cmd->parsed()) continue;
      const auto spec = build_spec(args, mode);
      const auto result = laacoex::run_experiment(spec);
      std::size_t ok = 0;
      for (const auto& c : result.cells) ok += c.ok ? 1 : 0;
      std::cout << "cells: " << ok << '/' << result.cells.size() << " ok\n";
      for (const auto& c : result.cells) {
        if (!c.ok) {
          std::cout << "  cell " << c.coord.n_sf << "ms rsf" << c.coord.rsf << " t_wifi "
                    << c.coord.t_wifi << ' ' << c.engine << " failed: " << c.error << '\n';
        }
      }
      if (!result.comparisons.empty()) {
        std::size_t pass = 0;
        for (const auto& r : result.comparisons) pass += r.pass ? 1 : 0;
        std::cout << "comparisons: " << pass << '/' << result.comparisons.size() << " pass\n";
      }
      for (const auto& f : result.written_files) std::cout << "wrote " << f << '\n';
      return result.exit_code;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
