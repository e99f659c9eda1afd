#include "stlplan/bench.hpp"
#include "stlplan/plots.hpp"
#include "stlplan/scenario.hpp"
#include "stlplan/toml.hpp"

#include <doctest.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace stlplan;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  fs::path p = fs::temp_directory_path() / ("stlplan_" + tag + "_" + std::to_string(rng()));
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

int count(const std::string& hay, const std::string& needle) {
  int n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

bool parses_as_xml(const std::string& svg) {
  std::istringstream in(svg);
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_xml(in, tree);
  } catch (const std::exception&) {
    return false;
  }
  return tree.count("svg") == 1;
}

BenchmarkPlan small_plan() {
  BenchmarkPlan plan;
  plan.scenarios = {"reach_avoid"};
  plan.methods = {Method::Svpio, Method::Gd};
  plan.seeds = {0, 1, 2};
  plan.overrides = {{"svpio", {{"particles", 4}, {"iterations", 3}}}, {"gd", {{"iterations", 5}}}};
  return plan;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(STLPLAN_CLI) + " " + args + " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("method names") {
  for (Method m : {Method::Svpio, Method::Mppi, Method::Gd, Method::FdSvgd}) {
    CHECK(method_from_string(to_string(m)) == m);
  }
  CHECK(method_from_string("fd-svgd") == Method::FdSvgd);
  CHECK_FALSE(method_from_string("adam").has_value());
  CHECK(tuning_key(Method::FdSvgd) == "fd_svgd");
}

TEST_CASE("one-seed plan reports the run verbatim") {
  BenchmarkPlan plan = small_plan();
  plan.methods = {Method::Svpio};
  plan.seeds = {7};
  AggregateReport report = run_benchmark(plan);
  REQUIRE(report.rows.size() == 1);
  REQUIRE(report.cells.size() == 1);
  const RunResult& run = report.cells[0].run;
  const AggregateRow& row = report.rows[0];
  CHECK(row.runs == 1);
  CHECK(row.errors == 0);
  CHECK(row.mean_robustness == run.robustness);
  CHECK(row.median_robustness == run.robustness);
  CHECK(row.best_robustness == run.robustness);
  CHECK(row.best_seed == 7);
  CHECK(row.satisfaction_rate == (run.robustness > 0 ? 1.0 : 0.0));
  CHECK(row.mean_runtime_ms == run.wall_ms);
  CHECK(row.samples == run.samples);
  CHECK(row.iterations == run.iterations);
  CHECK(row.mean_evaluations == static_cast<double>(run.evaluations));
  CHECK(row.config == run.config);

  RunResult direct = run_method(load_builtin_scenario("reach_avoid"), Method::Svpio, 7, plan.overrides);
  CHECK(dump_json(strip_timing(result_to_json(direct))) == dump_json(strip_timing(result_to_json(run))));
}

TEST_CASE("plan validation") {
  BenchmarkPlan plan = small_plan();
  plan.methods.clear();
  CHECK_THROWS_AS(check_plan(plan), std::invalid_argument);
  CHECK_THROWS_AS(run_benchmark(plan), std::invalid_argument);
  plan = small_plan();
  plan.seeds.clear();
  CHECK_THROWS_AS(check_plan(plan), std::invalid_argument);
  plan = small_plan();
  plan.scenarios.clear();
  CHECK_THROWS_AS(check_plan(plan), std::invalid_argument);

  CHECK_THROWS(plan_from_json(json{{"scenarios", {"reach_avoid"}}, {"methods", json::array()}, {"seeds", {0}}}));
  CHECK_THROWS(plan_from_json(json{{"scenarios", {"reach_avoid"}}, {"methods", {"adam"}}, {"seeds", {0}}}));

  BenchmarkPlan p = plan_from_json(toml::parse(R"(
scenarios = ["reach_avoid", "corridor"]
methods = ["svpio", "fd-svgd"]
seed_start = 10
seed_count = 3
workers = 2
[overrides.svpio]
iterations = 4
[scenario_overrides.corridor.svpio]
particles = 2
)"));
  CHECK(p.scenarios == std::vector<std::string>{"reach_avoid", "corridor"});
  CHECK(p.methods == std::vector<Method>{Method::Svpio, Method::FdSvgd});
  CHECK(p.seeds == std::vector<std::uint64_t>{10, 11, 12});
  CHECK(p.workers == 2);
  CHECK(p.overrides["svpio"]["iterations"] == 4);
  CHECK(p.scenario_overrides["corridor"]["svpio"]["particles"] == 2);
}

TEST_CASE("aggregate counts errors and zero robustness as failures") {
  std::vector<CellResult> cells(4);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells[i].scenario = "s";
    cells[i].method = Method::Gd;
    cells[i].seed = i;
    cells[i].ok = true;
    cells[i].run.wall_ms = 10.0;
  }
  cells[0].run.robustness = 0.5;
  cells[1].run.robustness = 0.0;
  cells[2].run.robustness = -0.2;
  cells[3].ok = false;
  cells[3].error = "boom";
  auto rows = aggregate(cells);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].runs == 4);
  CHECK(rows[0].errors == 1);
  CHECK(rows[0].satisfaction_rate == 0.25);
  CHECK(rows[0].best_seed == 0);
  CHECK(rows[0].best_robustness == 0.5);

  AggregateReport report;
  report.cells = cells;
  report.rows = rows;
  CHECK(report.any_error());
}

TEST_CASE("aggregate row order follows the cells") {
  std::vector<CellResult> cells;
  for (const char* s : {"b", "a"}) {
    for (Method m : {Method::Mppi, Method::Svpio}) {
      CellResult c;
      c.scenario = s;
      c.method = m;
      c.ok = true;
      cells.push_back(c);
    }
  }
  auto rows = aggregate(cells);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].scenario == "b");
  CHECK(rows[0].method == Method::Mppi);
  CHECK(rows[3].scenario == "a");
  CHECK(rows[3].method == Method::Svpio);
}

TEST_CASE("benchmark output is reproducible across worker counts") {
  BenchmarkPlan plan = small_plan();
  plan.workers = 1;
  AggregateReport one = run_benchmark(plan);
  plan.workers = 3;
  AggregateReport three = run_benchmark(plan);
  CHECK(dump_json(strip_timing(report_to_json(one))) == dump_json(strip_timing(report_to_json(three))));
  REQUIRE(one.cells.size() == 6);
  for (std::size_t i = 0; i < one.cells.size(); ++i) {
    CHECK(dump_json(strip_timing(result_to_json(one.cells[i].run))) ==
          dump_json(strip_timing(result_to_json(three.cells[i].run))));
  }
  CHECK(one.cells[0].method == Method::Svpio);
  CHECK(one.cells[3].method == Method::Gd);
  CHECK(one.cells[4].seed == 1);
}

TEST_CASE("strip_timing removes nested timing members") {
  json doc = {{"a", 1}, {"timing", 2}, {"rows", {{{"timing", 3}, {"b", 4}}}}, {"c", {{"timing", {{"x", 1}}}}}};
  json s = strip_timing(doc);
  CHECK(s == json{{"a", 1}, {"rows", {{{"b", 4}}}}, {"c", json::object()}});
  CHECK(result_to_json(RunResult{}).contains("timing"));
}

TEST_CASE("benchmark writes its output tree") {
  fs::path out = scratch("bench");
  BenchmarkPlan plan = small_plan();
  plan.methods = {Method::Gd};
  plan.seeds = {0, 1};
  plan.output_dir = out.string();
  AggregateReport report = run_benchmark(plan);
  CHECK(fs::exists(out / "report.json"));
  CHECK(fs::exists(out / "report.csv"));
  CHECK(fs::exists(out / "reach_avoid" / "gd" / "1" / "result.json"));
  CHECK(fs::exists(out / "reach_avoid" / "gd" / "1" / "trace.csv"));
  json on_disk = json::parse(slurp(out / "report.json"));
  CHECK(dump_json(on_disk) == dump_json(report_to_json(report)));

  Trace trace = read_trace_csv((out / "reach_avoid" / "gd" / "1" / "trace.csv").string(), 0.1);
  CHECK(check_trajectory(load_builtin_scenario("reach_avoid"), trace).robustness == report.cells[1].run.robustness);

  std::string csv = report_to_csv(report);
  CHECK(count(csv, "\n") == 2);
  CHECK(csv.rfind("scenario,", 0) == 0);

  auto files = export_plots(out.string(), (out / "plots").string());
  CHECK(files.size() == 2);
  for (const auto& f : files) {
    CHECK(fs::exists(f));
    CHECK(parses_as_xml(slurp(f)));
  }
  fs::remove_all(out);
}

TEST_CASE("expand_grid") {
  auto points = expand_grid(json{{"lambda", {0.05, 0.1}}, {"epsilon", {0.1, 0.2, 0.3}}});
  REQUIRE(points.size() == 6);
  CHECK(points[0] == json{{"epsilon", 0.1}, {"lambda", 0.05}});
  CHECK(points[1] == json{{"epsilon", 0.1}, {"lambda", 0.1}});
  CHECK(points[5] == json{{"epsilon", 0.3}, {"lambda", 0.1}});
  CHECK(expand_grid(json{{"iterations", 5}}).size() == 1);
  CHECK(expand_grid(json()).size() == 1);
  CHECK_THROWS(expand_grid(json{{"epsilon", json::array()}}));
}

TEST_CASE("sweep with a single grid point") {
  BenchmarkPlan plan = small_plan();
  plan.methods = {Method::Gd};
  plan.seeds = {0};
  SweepReport r = sweep(plan, json{{"gd", {{"epsilon", {0.2}}}}});
  REQUIRE(r.entries.size() == 1);
  REQUIRE(r.best.size() == 1);
  CHECK(r.best[0].entry == 0);
  CHECK(r.entries[0].config == json{{"epsilon", 0.2}});
  CHECK(r.entries[0].row.config["epsilon"] == 0.2);
}

TEST_CASE("sweep flags failing configs and picks the best mean") {
  BenchmarkPlan plan = small_plan();
  plan.methods = {Method::Svpio};
  plan.seeds = {0, 1};
  SweepReport r = sweep(plan, json{{"svpio", {{"epsilon", {1e308, 0.2, 0.01}}, {"lambda", {1e-300}}}}});
  REQUIRE(r.entries.size() == 3);
  CHECK(r.entries[0].failed_cells == 2);
  CHECK_FALSE(r.entries[0].errors.empty());
  CHECK(r.entries[1].failed_cells == 0);
  CHECK(r.entries[2].failed_cells == 0);
  REQUIRE(r.best.size() == 1);
  const int chosen = r.best[0].entry;
  REQUIRE(chosen > 0);
  const int other = chosen == 1 ? 2 : 1;
  CHECK(r.entries[chosen].row.mean_robustness >= r.entries[other].row.mean_robustness);

  json j = sweep_to_json(r);
  CHECK(j.dump().find("non-finite") != std::string::npos);
  CHECK(count(sweep_to_csv(r), "\n") == 4);
}

TEST_CASE("sweep with every config failing selects nothing") {
  BenchmarkPlan plan = small_plan();
  plan.methods = {Method::Svpio};
  plan.seeds = {0};
  SweepReport r = sweep(plan, json{{"svpio", {{"epsilon", {1e308}}, {"lambda", {1e-300}}}}});
  REQUIRE(r.best.size() == 1);
  CHECK(r.best[0].entry == -1);
}

TEST_CASE("trajectory svg") {
  Scenario s = load_builtin_scenario("reach_avoid");
  RunResult run = run_method(s, Method::Gd, 0, json{{"gd", {{"iterations", 3}}}});
  std::string svg = trajectory_svg(s, run.trace, "reach <avoid> & co");
  CHECK(parses_as_xml(svg));
  CHECK(count(svg, "<circle") == 1);
  CHECK(count(svg, "<rect") == 1);
  CHECK(count(svg, "<polyline") == 1);
  CHECK(count(svg, "<polygon") == 2);

  Scenario c = load_builtin_scenario("corridor");
  RunResult cr = run_method(c, Method::Gd, 0, json{{"gd", {{"iterations", 1}}}});
  std::string csvg = trajectory_svg(c, cr.trace, "corridor");
  CHECK(parses_as_xml(csvg));
  CHECK(count(csvg, "<polyline") == 2);
  CHECK(count(csvg, "class=\"wall\"") == 2);
}

TEST_CASE("bar chart svg") {
  std::vector<AggregateRow> rows;
  for (const char* s : {"a", "b", "c", "d"}) {
    for (Method m : {Method::Svpio, Method::Gd, Method::Mppi}) {
      AggregateRow r;
      r.scenario = s;
      r.method = m;
      r.mean_robustness = s[0] == 'b' ? -0.3 : 0.2;
      r.satisfaction_rate = 0.5;
      rows.push_back(r);
    }
  }
  std::string svg = bar_chart_svg(rows, "bars");
  CHECK(parses_as_xml(svg));
  CHECK(count(svg, "class=\"bar ") == 24);
  CHECK(count(svg, "class=\"bar robustness") == 12);
}

TEST_CASE("cli") {
  fs::path out = scratch("cli");
  const std::string dir = out.string();

  CHECK(run_cli("list") == 0);
  CHECK(run_cli("show --scenario sync_goals --json") == 0);

  write(out / "fast.toml", "[gd]\niterations = 3\n");
  CHECK(run_cli("run --scenario reach_avoid --method gd --seed 2 --config " + dir + "/fast.toml --out " + dir + "/run") ==
        0);
  REQUIRE(fs::exists(out / "run" / "result.json"));
  json result = json::parse(slurp(out / "run" / "result.json"));
  CHECK(result["config"]["iterations"] == 3);
  CHECK(run_cli("check --scenario reach_avoid --trace " + dir + "/run/trace.csv") == 0);

  write(out / "plan.toml", "scenarios = [\"reach_avoid\"]\nmethods = [\"svpio\"]\nseeds = [0]\n"
                           "[overrides.svpio]\niterations = 2\nparticles = 2\nepsilon = 1e308\nlambda = 1e-300\n");
  CHECK(run_cli("bench --plan " + dir + "/plan.toml --out " + dir + "/bench") == 1);
  CHECK(fs::exists(out / "bench" / "report.json"));

  write(out / "good.toml", "scenarios = [\"reach_avoid\"]\nmethods = [\"gd\"]\nseeds = [0, 1]\n"
                           "[overrides.gd]\niterations = 2\n");
  CHECK(run_cli("bench --plan " + dir + "/good.toml --out " + dir + "/good") == 0);
  CHECK(run_cli("plot --in " + dir + "/good --out " + dir + "/plots") == 0);
  CHECK(fs::exists(out / "plots"));

  CHECK(run_cli("run --scenario no_such_scenario") == 2);
  CHECK(run_cli("check --scenario reach_avoid --trace " + dir + "/missing.csv") == 2);
  fs::remove_all(out);
}

TEST_CASE("shipped plans and grids load") {
  const fs::path dir = fs::path(STLPLAN_SOURCE_DIR) / "bench";
  int plans = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.path().extension() != ".toml") continue;
    const json doc = toml::parse_file(e.path().string());
    if (doc.contains("scenarios")) {
      BenchmarkPlan p = load_plan(e.path().string());
      CHECK_NOTHROW(check_plan(p));
      for (const auto& s : p.scenarios) CHECK_NOTHROW(resolve_scenario(s));
      ++plans;
    } else {
      for (const auto& [key, table] : doc.items()) {
        CHECK(method_from_string(key).has_value());
        CHECK(expand_grid(table).size() > 1);
      }
    }
  }
  CHECK(plans >= 5);
}
