#pragma once

#include "stlplan/planner.hpp"
#include "stlplan/scenario.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stlplan {

enum class Method { Svpio, Mppi, Gd, FdSvgd };

std::string_view to_string(Method m);
std::optional<Method> method_from_string(std::string_view s);

/// Tuning table key for a method inside scenario and plan files (svpio, mppi, gd, fd_svgd).
std::string_view tuning_key(Method m);

/// Runs one method on one scenario. Settings are the scenario's own tuning table for the
/// method, overlaid with the same table from `overrides` ({"svpio": {...}}). MPPI also reads
/// the "heuristic" table.
RunResult run_method(const Scenario& scenario, Method method, std::uint64_t seed,
                     const nlohmann::json& overrides = nlohmann::json::object(), unsigned workers = 1);

struct BenchmarkPlan {
  std::vector<std::string> scenarios;  // built-in names or config paths
  std::vector<Method> methods;
  std::vector<std::uint64_t> seeds;
  /// {"svpio": {...}, "heuristic": {...}} applied to every scenario.
  nlohmann::json overrides = nlohmann::json::object();
  /// {"corridor": {"svpio": {...}}} applied after `overrides` for that scenario.
  nlohmann::json scenario_overrides = nlohmann::json::object();
  std::string output_dir;  // empty: nothing is written
  unsigned workers = 1;    // cells evaluated concurrently
};

/// Throws std::invalid_argument when a list is empty.
void check_plan(const BenchmarkPlan& plan);

/// Reads a plan file:
///   scenarios = [...]; methods = [...]; seeds = [...] or seed_start/seed_count;
///   out = "dir"; workers = n; [overrides.<table>]; [scenario_overrides.<scenario>.<table>]
BenchmarkPlan load_plan(const std::string& path);
BenchmarkPlan plan_from_json(const nlohmann::json& doc);

struct CellResult {
  std::string scenario;         // scenario name
  std::string scenario_source;  // as given in the plan
  Method method = Method::Svpio;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  RunResult run;
};

struct AggregateRow {
  std::string scenario;
  std::string scenario_source;
  Method method = Method::Svpio;
  int runs = 0;
  int errors = 0;
  double mean_robustness = 0.0;
  double median_robustness = 0.0;
  double satisfaction_rate = 0.0;  // runs with hard robustness > 0 over all runs (errors count as failures)
  double mean_runtime_ms = 0.0;
  int samples = 0;
  int iterations = 0;
  double mean_evaluations = 0.0;
  std::uint64_t best_seed = 0;
  double best_robustness = 0.0;
  nlohmann::json config = nlohmann::json::object();
};

struct AggregateReport {
  std::vector<AggregateRow> rows;  // ordered by (scenario, method) as listed in the plan
  std::vector<CellResult> cells;   // ordered by (scenario, method, seed)

  bool any_error() const;
};

/// Aggregates finished cells; rows follow first appearance order of (scenario, method).
std::vector<AggregateRow> aggregate(const std::vector<CellResult>& cells);

/// Executes every (scenario, method, seed) cell. A failing cell is recorded, not rethrown.
/// Writes <out>/<scenario>/<method>/<seed>/{result.json,trace.csv} and <out>/report.{json,csv}.
AggregateReport run_benchmark(const BenchmarkPlan& plan);

/// result.json content. Wall-clock values live under "timing"; everything else is deterministic.
nlohmann::json result_to_json(const RunResult& r);
nlohmann::json report_to_json(const AggregateReport& report);
std::string report_to_csv(const AggregateReport& report);

/// Serializes with a fixed layout so equal trees give equal bytes.
std::string dump_json(const nlohmann::json& doc);

/// Copy of `doc` with every "timing" member removed, recursively.
nlohmann::json strip_timing(const nlohmann::json& doc);

// ---- Hyperparameter sweeps ---------------------------------------------------

/// Grid file: one table per method key, each value a list of candidates, e.g.
///   [svpio]
///   epsilon = [0.1, 0.2]
///   lambda = [0.05, 0.1]
struct SweepEntry {
  std::string scenario;
  Method method = Method::Svpio;
  nlohmann::json config;  // the grid point (only the swept keys)
  AggregateRow row;
  int failed_cells = 0;
  std::vector<std::string> errors;
};

struct SweepReport {
  std::vector<SweepEntry> entries;
  /// Index into entries of the selected config per (scenario, method); -1 when every config failed.
  struct Choice {
    std::string scenario;
    Method method = Method::Svpio;
    int entry = -1;
  };
  std::vector<Choice> best;
};

/// Cartesian product of the candidate lists, keys in lexicographic order.
std::vector<nlohmann::json> expand_grid(const nlohmann::json& table);

/// Runs every grid point of every method over the plan's seeds. Configs with a failed cell are
/// flagged and never selected; the rest are ranked by mean robustness, then satisfaction rate,
/// then mean runtime. Writes <out>/sweep.json and <out>/sweep.csv when the plan has an output dir.
SweepReport sweep(const BenchmarkPlan& plan, const nlohmann::json& grid);

nlohmann::json sweep_to_json(const SweepReport& report);
std::string sweep_to_csv(const SweepReport& report);

}  // namespace stlplan
