#include "stlplan/bench.hpp"
#include "stlplan/plots.hpp"
#include "stlplan/scenario.hpp"
#include "stlplan/toml.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace stlplan;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

void print_rows(const std::vector<AggregateRow>& rows) {
  std::printf("%-16s %-8s %5s %6s %12s %12s %8s %12s\n", "scenario", "method", "runs", "errors", "mean_rho",
              "median_rho", "sat", "mean_ms");
  for (const auto& r : rows) {
    std::printf("%-16s %-8s %5d %6d %12.5f %12.5f %8.3f %12.1f\n", r.scenario.c_str(),
                std::string(to_string(r.method)).c_str(), r.runs, r.errors, r.mean_robustness, r.median_robustness,
                r.satisfaction_rate, r.mean_runtime_ms);
  }
}

Method parse_method(const std::string& s) {
  auto m = method_from_string(s);
  if (!m) throw CLI::ValidationError("--method", "expected one of svpio, mppi, gd, fd-svgd");
  return *m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory synthesis from signal temporal logic specifications"};
  app.require_subcommand(1);

  std::string scenario_arg;
  std::string method_arg = "svpio";
  std::uint64_t seed = 0;
  std::string config_path;
  std::string out_dir;
  unsigned workers = 1;
  auto* run = app.add_subcommand("run", "optimize one scenario with one method and seed");
  run->add_option("--scenario", scenario_arg, "built-in name or scenario file")->required();
  run->add_option("--method", method_arg, "svpio | mppi | gd | fd-svgd");
  run->add_option("--seed", seed, "random seed");
  run->add_option("--config", config_path, "TOML file with [svpio]/[gd]/[fd_svgd]/[mppi]/[heuristic] overrides");
  run->add_option("--out", out_dir, "output directory (default out/<scenario>/<method>/<seed>)");
  run->add_option("--workers", workers, "threads for particle evaluation (0 = all cores)");

  std::string plan_path;
  std::string grid_path;
  std::optional<unsigned> plan_workers;
  auto* bench = app.add_subcommand("bench", "run a benchmark plan");
  bench->add_option("--plan", plan_path, "plan TOML")->required();
  bench->add_option("--out", out_dir, "override the plan's output directory");
  bench->add_option("--workers", plan_workers, "cells evaluated concurrently");

  auto* sweep_cmd = app.add_subcommand("sweep", "hyperparameter grid search");
  sweep_cmd->add_option("--plan", plan_path, "plan TOML")->required();
  sweep_cmd->add_option("--grid", grid_path, "grid TOML")->required();
  sweep_cmd->add_option("--out", out_dir, "override the plan's output directory");
  sweep_cmd->add_option("--workers", plan_workers, "cells evaluated concurrently");

  std::string trace_path;
  auto* check = app.add_subcommand("check", "hard robustness of a recorded trajectory");
  check->add_option("--scenario", scenario_arg, "built-in name or scenario file")->required();
  check->add_option("--trace", trace_path, "trace.csv")->required();

  std::string in_dir;
  auto* plot = app.add_subcommand("plot", "SVG trajectory plots and bar charts");
  plot->add_option("--in", in_dir, "benchmark or run directory")->required();
  plot->add_option("--out", out_dir, "directory for SVG files")->required();

  auto* show = app.add_subcommand("show", "print a scenario with its formula and predicates written out");
  show->add_option("--scenario", scenario_arg, "built-in name or scenario file")->required();
  bool show_json = false;
  show->add_flag("--json", show_json, "print JSON instead of TOML");
  app.add_subcommand("list", "list built-in scenarios");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const Method method = parse_method(method_arg);
      Scenario sc = resolve_scenario(scenario_arg);
      nlohmann::json overrides = config_path.empty() ? nlohmann::json::object() : toml::parse_file(config_path);
      RunResult r = run_method(sc, method, seed, overrides, workers);
      const fs::path dir = out_dir.empty() ? fs::path("out") / sc.name / std::string(to_string(method)) /
                                                 std::to_string(seed)
                                           : fs::path(out_dir);
      nlohmann::json doc = result_to_json(r);
      doc["scenario_source"] = scenario_arg;
      write_file(dir / "result.json", dump_json(doc));
      write_file(dir / "trace.csv", trace_to_csv(r.trace));
      std::printf("%s %s seed %llu: robustness %.6f (%s), %d iterations, %.1f ms -> %s\n", sc.name.c_str(),
                  r.method.c_str(), static_cast<unsigned long long>(seed), r.robustness,
                  r.robustness > 0 ? "satisfied" : "violated", r.iterations, r.wall_ms, dir.string().c_str());
      return 0;
    }
    if (*bench || *sweep_cmd) {
      BenchmarkPlan plan = load_plan(plan_path);
      if (!out_dir.empty()) plan.output_dir = out_dir;
      if (plan_workers) plan.workers = *plan_workers;
      if (*bench) {
        AggregateReport report = run_benchmark(plan);
        print_rows(report.rows);
        for (const auto& c : report.cells) {
          if (!c.ok) {
            std::fprintf(stderr, "error: %s %s seed %llu: %s\n", c.scenario.c_str(),
                         std::string(to_string(c.method)).c_str(), static_cast<unsigned long long>(c.seed),
                         c.error.c_str());
          }
        }
        return report.any_error() ? 1 : 0;
      }
      SweepReport report = sweep(plan, toml::parse_file(grid_path));
      bool failed = false;
      for (const auto& e : report.entries) {
        std::printf("%-16s %-8s %-48s mean %10.5f sat %.3f%s\n", e.scenario.c_str(),
                    std::string(to_string(e.method)).c_str(), e.config.dump().c_str(), e.row.mean_robustness,
                    e.row.satisfaction_rate, e.failed_cells ? "  [failed cells]" : "");
        failed = failed || e.failed_cells > 0;
      }
      for (const auto& b : report.best) {
        std::printf("best %s %s: %s\n", b.scenario.c_str(), std::string(to_string(b.method)).c_str(),
                    b.entry >= 0 ? report.entries[static_cast<std::size_t>(b.entry)].config.dump().c_str() : "none");
      }
      return failed ? 1 : 0;
    }
    if (*check) {
      Scenario sc = resolve_scenario(scenario_arg);
      CheckReport report = check_trajectory(sc, trace_path);
      std::printf("robustness %.17g (%s)\n", report.robustness, report.robustness > 0 ? "satisfied" : "violated");
      for (const auto& c : report.conjuncts) std::printf("  %14.6f  %s\n", c.robustness, c.text.c_str());
      return 0;
    }
    if (*plot) {
      for (const auto& f : export_plots(in_dir, out_dir)) std::printf("%s\n", f.c_str());
      return 0;
    }
    if (*show) {
      Scenario sc = resolve_scenario(scenario_arg);
      std::cout << (show_json ? dump_json(scenario_to_json(sc)) : scenario_to_toml(sc));
      return 0;
    }
    for (const auto& name : builtin_scenario_names()) std::printf("%s\n", name.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
