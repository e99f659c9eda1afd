#include "stlplan/bench.hpp"

#include "stlplan/baselines.hpp"
#include "stlplan/parallel.hpp"
#include "stlplan/toml.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <tuple>
#include <set>
#include <stdexcept>

namespace stlplan {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::pair<Method, std::string_view> kMethodNames[] = {
    {Method::Svpio, "svpio"}, {Method::Mppi, "mppi"}, {Method::Gd, "gd"}, {Method::FdSvgd, "fd-svgd"}};

json table_or_empty(const json& doc, std::string_view key) {
  if (!doc.is_object()) return json::object();
  auto it = doc.find(std::string(key));
  if (it == doc.end()) return json::object();
  if (!it->is_object()) throw std::invalid_argument("'" + std::string(key) + "' must be a table");
  return *it;
}

json overlay(json base, const json& top) {
  if (!base.is_object()) base = json::object();
  for (const auto& [k, v] : top.items()) {
    if (v.is_object() && base.contains(k) && base[k].is_object()) {
      base[k] = overlay(base[k], v);
    } else {
      base[k] = v;
    }
  }
  return base;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct CellSpec {
  const Scenario* scenario;
  std::string source;
  Method method;
  std::uint64_t seed;
  json overrides;
};

std::vector<CellResult> run_cells(const std::vector<CellSpec>& specs, unsigned workers) {
  std::vector<CellResult> cells(specs.size());
  parallel_for(specs.size(), workers, [&](std::size_t i) {
    const CellSpec& spec = specs[i];
    CellResult& cell = cells[i];
    cell.scenario = spec.scenario->name;
    cell.scenario_source = spec.source;
    cell.method = spec.method;
    cell.seed = spec.seed;
    try {
      cell.run = run_method(*spec.scenario, spec.method, spec.seed, spec.overrides, 1);
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
  });
  return cells;
}

std::vector<Scenario> resolve_all(const std::vector<std::string>& sources) {
  std::vector<Scenario> out;
  for (const auto& s : sources) out.push_back(resolve_scenario(s));
  return out;
}

json cell_overrides(const BenchmarkPlan& plan, const std::string& source, const std::string& name) {
  json o = plan.overrides;
  if (plan.scenario_overrides.contains(source)) {
    o = overlay(o, plan.scenario_overrides[source]);
  } else if (plan.scenario_overrides.contains(name)) {
    o = overlay(o, plan.scenario_overrides[name]);
  }
  return o;
}

std::string cell_dir(const CellResult& c) {
  return c.scenario + "/" + std::string(to_string(c.method)) + "/" + std::to_string(c.seed);
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string_view to_string(Method m) {
  for (const auto& [k, n] : kMethodNames) {
    if (k == m) return n;
  }
  return "svpio";
}

std::optional<Method> method_from_string(std::string_view s) {
  for (const auto& [k, n] : kMethodNames) {
    if (n == s) return k;
  }
  return std::nullopt;
}

std::string_view tuning_key(Method m) {
  switch (m) {
    case Method::Svpio: return "svpio";
    case Method::Mppi: return "mppi";
    case Method::Gd: return "gd";
    case Method::FdSvgd: return "fd_svgd";
  }
  return "svpio";
}

RunResult run_method(const Scenario& scenario, Method method, std::uint64_t seed, const json& overrides,
                     unsigned workers) {
  const std::string_view key = tuning_key(method);
  const json settings = overlay(table_or_empty(scenario.tuning, key), table_or_empty(overrides, key));
  const double eps = default_epsilon(scenario.dynamics);
  switch (method) {
    case Method::Svpio: {
      SvpioConfig base;
      base.epsilon = eps;
      SvpioConfig cfg = svpio_config(settings, base);
      cfg.seed = seed;
      cfg.workers = workers;
      return run_svpio(scenario, cfg);
    }
    case Method::Gd: {
      GdConfig base;
      base.epsilon = eps;
      GdConfig cfg = gd_config(settings, base);
      cfg.seed = seed;
      return run_gradient_ascent(scenario, cfg);
    }
    case Method::FdSvgd: {
      FdSvgdSettings base;
      base.svgd.epsilon = eps;
      FdSvgdSettings cfg = fd_svgd_config(settings, base);
      cfg.svgd.seed = seed;
      cfg.svgd.workers = workers;
      return run_fd_svgd(scenario, cfg);
    }
    case Method::Mppi: {
      MppiConfig cfg = mppi_config(settings, MppiConfig{});
      cfg.seed = seed;
      cfg.workers = workers;
      const json h = overlay(table_or_empty(scenario.tuning, "heuristic"), table_or_empty(overrides, "heuristic"));
      return run_mppi(scenario, cfg, heuristic_cost(h, HeuristicCost{}));
    }
  }
  throw std::invalid_argument("unknown method");
}

void check_plan(const BenchmarkPlan& plan) {
  if (plan.scenarios.empty()) throw std::invalid_argument("plan: scenario list is empty");
  if (plan.methods.empty()) throw std::invalid_argument("plan: method list is empty");
  if (plan.seeds.empty()) throw std::invalid_argument("plan: seed list is empty");
}

BenchmarkPlan plan_from_json(const json& doc) {
  static const std::set<std::string> known = {"scenarios", "methods", "seeds",     "seed_start",
                                              "seed_count", "out",    "workers",   "overrides",
                                              "scenario_overrides"};
  if (!doc.is_object()) throw std::invalid_argument("plan must be a table");
  for (const auto& [k, _] : doc.items()) {
    if (!known.contains(k)) throw std::invalid_argument("plan: unknown field '" + k + "'");
  }
  BenchmarkPlan plan;
  try {
    if (doc.contains("scenarios")) plan.scenarios = doc["scenarios"].get<std::vector<std::string>>();
    if (doc.contains("methods")) {
      for (const auto& m : doc["methods"].get<std::vector<std::string>>()) {
        auto parsed = method_from_string(m);
        if (!parsed) throw std::invalid_argument("plan: unknown method '" + m + "'");
        plan.methods.push_back(*parsed);
      }
    }
    if (doc.contains("seeds")) plan.seeds = doc["seeds"].get<std::vector<std::uint64_t>>();
    if (doc.contains("seed_count")) {
      if (doc.contains("seeds")) throw std::invalid_argument("plan: give either seeds or seed_count");
      const auto start = doc.value("seed_start", std::uint64_t{0});
      const auto count = doc["seed_count"].get<std::uint64_t>();
      for (std::uint64_t s = 0; s < count; ++s) plan.seeds.push_back(start + s);
    }
    plan.output_dir = doc.value("out", std::string());
    plan.workers = doc.value("workers", 1u);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("plan: ") + e.what());
  }
  plan.overrides = table_or_empty(doc, "overrides");
  plan.scenario_overrides = table_or_empty(doc, "scenario_overrides");
  check_plan(plan);
  return plan;
}

BenchmarkPlan load_plan(const std::string& path) {
  try {
    return plan_from_json(toml::parse_file(path));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

bool AggregateReport::any_error() const {
  return std::any_of(cells.begin(), cells.end(), [](const CellResult& c) { return !c.ok; });
}

std::vector<AggregateRow> aggregate(const std::vector<CellResult>& cells) {
  std::vector<AggregateRow> rows;
  std::map<std::tuple<std::string, std::string, Method>, std::vector<const CellResult*>> groups;
  for (const auto& c : cells) {
    auto& g = groups[{c.scenario_source, c.scenario, c.method}];
    if (g.empty()) {
      AggregateRow row;
      row.scenario = c.scenario;
      row.scenario_source = c.scenario_source;
      row.method = c.method;
      rows.push_back(row);
    }
    g.push_back(&c);
  }
  for (auto& row : rows) {
    const auto& g = groups[{row.scenario_source, row.scenario, row.method}];
    row.runs = static_cast<int>(g.size());
    std::vector<double> rob;
    double runtime = 0.0;
    double evals = 0.0;
    int satisfied = 0;
    bool have_best = false;
    for (const CellResult* c : g) {
      if (!c->ok) {
        ++row.errors;
        continue;
      }
      const RunResult& r = c->run;
      rob.push_back(r.robustness);
      runtime += r.wall_ms;
      evals += static_cast<double>(r.evaluations);
      if (r.robustness > 0.0) ++satisfied;
      if (!have_best || r.robustness > row.best_robustness) {
        row.best_robustness = r.robustness;
        row.best_seed = c->seed;
      }
      if (!have_best) {
        row.samples = r.samples;
        row.iterations = r.iterations;
        row.config = r.config;
      }
      have_best = true;
    }
    row.satisfaction_rate = row.runs ? static_cast<double>(satisfied) / row.runs : 0.0;
    if (!rob.empty()) {
      double sum = 0.0;
      for (double v : rob) sum += v;
      row.mean_robustness = sum / static_cast<double>(rob.size());
      row.median_robustness = median_of(rob);
      row.mean_runtime_ms = runtime / static_cast<double>(rob.size());
      row.mean_evaluations = evals / static_cast<double>(rob.size());
    }
  }
  return rows;
}

json result_to_json(const RunResult& r) {
  json controls = json::array();
  for (Eigen::Index t = 0; t < r.controls.rows(); ++t) {
    json row = json::array();
    for (Eigen::Index d = 0; d < r.controls.cols(); ++d) row.push_back(r.controls(t, d));
    controls.push_back(row);
  }
  json diags = json::array();
  json iter_ms = json::array();
  for (const auto& d : r.diagnostics) {
    diags.push_back({{"iteration", d.iteration},
                     {"best", d.best},
                     {"mean", d.mean},
                     {"min", d.min},
                     {"mean_pairwise_distance", d.mean_pairwise_distance},
                     {"bandwidth", d.bandwidth}});
    iter_ms.push_back(d.wall_ms);
  }
  return {{"scenario", r.scenario},
          {"method", r.method},
          {"seed", r.seed},
          {"config", r.config},
          {"robustness", r.robustness},
          {"satisfied", r.robustness > 0.0},
          {"samples", r.samples},
          {"iterations", r.iterations},
          {"evaluations", r.evaluations},
          {"horizon", r.controls.rows()},
          {"trace", "trace.csv"},
          {"controls", controls},
          {"diagnostics", diags},
          {"timing", {{"wall_ms", r.wall_ms}, {"iteration_wall_ms", iter_ms}}}};
}

json report_to_json(const AggregateReport& report) {
  json rows = json::array();
  json row_timing = json::array();
  for (const auto& r : report.rows) {
    const std::string method(to_string(r.method));
    rows.push_back({{"scenario", r.scenario},
                    {"scenario_source", r.scenario_source},
                    {"method", method},
                    {"runs", r.runs},
                    {"errors", r.errors},
                    {"mean_robustness", r.mean_robustness},
                    {"median_robustness", r.median_robustness},
                    {"satisfaction_rate", r.satisfaction_rate},
                    {"samples", r.samples},
                    {"iterations", r.iterations},
                    {"mean_evaluations", r.mean_evaluations},
                    {"best_seed", r.best_seed},
                    {"best_robustness", r.best_robustness},
                    {"best_trace", r.scenario + "/" + method + "/" + std::to_string(r.best_seed) + "/trace.csv"},
                    {"config", r.config}});
    row_timing.push_back({{"scenario", r.scenario}, {"method", method}, {"mean_runtime_ms", r.mean_runtime_ms}});
  }
  json cells = json::array();
  json cell_timing = json::array();
  for (const auto& c : report.cells) {
    json cell{{"scenario", c.scenario}, {"method", std::string(to_string(c.method))}, {"seed", c.seed}, {"ok", c.ok}};
    if (c.ok) {
      cell["robustness"] = c.run.robustness;
    } else {
      cell["error"] = c.error;
    }
    cells.push_back(cell);
    cell_timing.push_back({{"scenario", c.scenario},
                           {"method", std::string(to_string(c.method))},
                           {"seed", c.seed},
                           {"wall_ms", c.ok ? c.run.wall_ms : 0.0}});
  }
  return {{"rows", rows}, {"cells", cells}, {"timing", {{"rows", row_timing}, {"cells", cell_timing}}}};
}

std::string report_to_csv(const AggregateReport& report) {
  std::string out =
      "scenario,method,runs,errors,mean_robustness,median_robustness,satisfaction_rate,mean_runtime_ms,samples,"
      "iterations,mean_evaluations,best_seed,best_robustness\n";
  for (const auto& r : report.rows) {
    out += csv_field(r.scenario) + "," + std::string(to_string(r.method)) + "," + std::to_string(r.runs) + "," +
           std::to_string(r.errors) + "," + fmt(r.mean_robustness) + "," + fmt(r.median_robustness) + "," +
           fmt(r.satisfaction_rate) + "," + fmt(r.mean_runtime_ms) + "," + std::to_string(r.samples) + "," +
           std::to_string(r.iterations) + "," + fmt(r.mean_evaluations) + "," + std::to_string(r.best_seed) + "," +
           fmt(r.best_robustness) + "\n";
  }
  return out;
}

std::string dump_json(const json& doc) { return doc.dump(2) + "\n"; }

json strip_timing(const json& doc) {
  if (doc.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : doc.items()) {
      if (k != "timing") out[k] = strip_timing(v);
    }
    return out;
  }
  if (doc.is_array()) {
    json out = json::array();
    for (const auto& v : doc) out.push_back(strip_timing(v));
    return out;
  }
  return doc;
}

AggregateReport run_benchmark(const BenchmarkPlan& plan) {
  check_plan(plan);
  const std::vector<Scenario> scenarios = resolve_all(plan.scenarios);
  std::vector<CellSpec> specs;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const json o = cell_overrides(plan, plan.scenarios[s], scenarios[s].name);
    for (Method m : plan.methods) {
      for (std::uint64_t seed : plan.seeds) specs.push_back({&scenarios[s], plan.scenarios[s], m, seed, o});
    }
  }
  AggregateReport report;
  report.cells = run_cells(specs, plan.workers);
  report.rows = aggregate(report.cells);

  if (!plan.output_dir.empty()) {
    const fs::path out(plan.output_dir);
    for (const auto& c : report.cells) {
      const fs::path dir = out / cell_dir(c);
      if (c.ok) {
        write_text(dir / "result.json", dump_json(result_to_json(c.run)));
        write_text(dir / "trace.csv", trace_to_csv(c.run.trace));
      } else {
        write_text(dir / "result.json",
                   dump_json({{"scenario", c.scenario},
                              {"method", std::string(to_string(c.method))},
                              {"seed", c.seed},
                              {"error", c.error}}));
      }
    }
    write_text(out / "report.json", dump_json(report_to_json(report)));
    write_text(out / "report.csv", report_to_csv(report));
  }
  return report;
}

std::vector<json> expand_grid(const json& table) {
  std::vector<json> points{json::object()};
  if (table.is_null()) return points;
  if (!table.is_object()) throw std::invalid_argument("grid entries must be tables");
  for (const auto& [key, values] : table.items()) {
    const json candidates = values.is_array() ? values : json::array({values});
    if (candidates.empty()) throw std::invalid_argument("grid: '" + key + "' has no candidates");
    std::vector<json> next;
    for (const auto& p : points) {
      for (const auto& v : candidates) {
        json q = p;
        q[key] = v;
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  return points;
}

SweepReport sweep(const BenchmarkPlan& plan, const json& grid) {
  check_plan(plan);
  if (!grid.is_object()) throw std::invalid_argument("grid must be a table");
  const std::vector<Scenario> scenarios = resolve_all(plan.scenarios);

  struct Point {
    std::size_t scenario;
    Method method;
    json config;
    std::size_t first_cell;
  };
  std::vector<Point> points;
  std::vector<CellSpec> specs;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const json base = cell_overrides(plan, plan.scenarios[s], scenarios[s].name);
    for (Method m : plan.methods) {
      const std::string key(tuning_key(m));
      for (const json& cfg : expand_grid(grid.contains(key) ? grid[key] : json())) {
        points.push_back({s, m, cfg, specs.size()});
        json o = base;
        o[key] = overlay(table_or_empty(base, key), cfg);
        for (std::uint64_t seed : plan.seeds) specs.push_back({&scenarios[s], plan.scenarios[s], m, seed, o});
      }
    }
  }
  const std::vector<CellResult> cells = run_cells(specs, plan.workers);

  SweepReport report;
  const std::size_t n_seeds = plan.seeds.size();
  for (const Point& p : points) {
    std::vector<CellResult> mine(cells.begin() + static_cast<std::ptrdiff_t>(p.first_cell),
                                 cells.begin() + static_cast<std::ptrdiff_t>(p.first_cell + n_seeds));
    SweepEntry e;
    e.scenario = scenarios[p.scenario].name;
    e.method = p.method;
    e.config = p.config;
    e.row = aggregate(mine).front();
    for (const auto& c : mine) {
      if (!c.ok) {
        ++e.failed_cells;
        e.errors.push_back("seed " + std::to_string(c.seed) + ": " + c.error);
      }
    }
    report.entries.push_back(std::move(e));
  }

  auto better = [](const SweepEntry& a, const SweepEntry& b) {
    if (a.row.mean_robustness != b.row.mean_robustness) return a.row.mean_robustness > b.row.mean_robustness;
    if (a.row.satisfaction_rate != b.row.satisfaction_rate) return a.row.satisfaction_rate > b.row.satisfaction_rate;
    return a.row.mean_runtime_ms < b.row.mean_runtime_ms;
  };
  for (std::size_t i = 0; i < report.entries.size(); ++i) {
    const SweepEntry& e = report.entries[i];
    auto it = std::find_if(report.best.begin(), report.best.end(), [&](const SweepReport::Choice& c) {
      return c.scenario == e.scenario && c.method == e.method;
    });
    if (it == report.best.end()) {
      report.best.push_back({e.scenario, e.method, -1});
      it = std::prev(report.best.end());
    }
    if (e.failed_cells > 0) continue;
    if (it->entry < 0 || better(e, report.entries[static_cast<std::size_t>(it->entry)])) {
      it->entry = static_cast<int>(i);
    }
  }

  if (!plan.output_dir.empty()) {
    const fs::path out(plan.output_dir);
    write_text(out / "sweep.json", dump_json(sweep_to_json(report)));
    write_text(out / "sweep.csv", sweep_to_csv(report));
  }
  return report;
}

json sweep_to_json(const SweepReport& report) {
  json entries = json::array();
  json timing = json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"scenario", e.scenario},
                       {"method", std::string(to_string(e.method))},
                       {"config", e.config},
                       {"runs", e.row.runs},
                       {"mean_robustness", e.row.mean_robustness},
                       {"median_robustness", e.row.median_robustness},
                       {"satisfaction_rate", e.row.satisfaction_rate},
                       {"failed_cells", e.failed_cells},
                       {"flagged", e.failed_cells > 0},
                       {"errors", e.errors}});
    timing.push_back({{"scenario", e.scenario},
                      {"method", std::string(to_string(e.method))},
                      {"config", e.config},
                      {"mean_runtime_ms", e.row.mean_runtime_ms}});
  }
  json best = json::array();
  for (const auto& c : report.best) {
    json b{{"scenario", c.scenario}, {"method", std::string(to_string(c.method))}, {"entry", c.entry}};
    b["config"] = c.entry >= 0 ? report.entries[static_cast<std::size_t>(c.entry)].config : json();
    best.push_back(b);
  }
  return {{"entries", entries}, {"best", best}, {"timing", timing}};
}

std::string sweep_to_csv(const SweepReport& report) {
  std::string out =
      "scenario,method,config,runs,mean_robustness,median_robustness,satisfaction_rate,mean_runtime_ms,failed_cells,"
      "selected\n";
  for (std::size_t i = 0; i < report.entries.size(); ++i) {
    const auto& e = report.entries[i];
    const bool selected = std::any_of(report.best.begin(), report.best.end(),
                                      [&](const SweepReport::Choice& c) { return c.entry == static_cast<int>(i); });
    out += csv_field(e.scenario) + "," + std::string(to_string(e.method)) + "," + csv_field(e.config.dump()) + "," +
           std::to_string(e.row.runs) + "," + fmt(e.row.mean_robustness) + "," + fmt(e.row.median_robustness) + "," +
           fmt(e.row.satisfaction_rate) + "," + fmt(e.row.mean_runtime_ms) + "," + std::to_string(e.failed_cells) +
           "," + (selected ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace stlplan
