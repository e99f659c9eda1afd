// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers as arguments
// to run a subset.

#include "oracles.hpp"

#include "stlplan/baselines.hpp"
#include "stlplan/bench.hpp"
#include "stlplan/dynamics.hpp"
#include "stlplan/planner.hpp"
#include "stlplan/scenario.hpp"
#include "stlplan/semantics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace stlplan;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double satisfaction(const std::vector<CellResult>& cells, const std::string& scenario, Method m) {
  int runs = 0, ok = 0;
  for (const auto& c : cells) {
    if (c.scenario != scenario || c.method != m) continue;
    ++runs;
    if (c.ok && c.run.robustness > 0.0) ++ok;
  }
  return runs ? static_cast<double>(ok) / runs : 0.0;
}

std::vector<std::uint64_t> seed_range(int n) {
  std::vector<std::uint64_t> s(n);
  for (int i = 0; i < n; ++i) s[i] = i;
  return s;
}

// Shared by criteria 1 and 2.
std::vector<oracle::RandomInstance> corpus() {
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> H(0, 12), m(1, 2);
  std::vector<oracle::RandomInstance> out;
  out.reserve(1000);
  for (int k = 0; k < 1000; ++k) out.push_back(oracle::random_instance(rng, H(rng), 4, m(rng)));
  return out;
}

Outcome oracle_equivalence() {
  const auto instances = corpus();
  long points = 0, mismatches = 0;
  for (const auto& inst : instances) {
    CompiledFormula cf(inst.formula, inst.bindings);
    const int la = lookahead(inst.formula);
    for (int t = 0; t + la <= inst.trace.horizon(); ++t) {
      ++points;
      if (cf.hard(inst.trace, t) != oracle::brute_hard(inst.formula, inst.trace, t, inst.bindings)) ++mismatches;
      if (robustness_hard(inst.formula, inst.trace, t, inst.bindings) != cf.hard(inst.trace, t)) ++mismatches;
    }
  }
  return {mismatches == 0, fmt("%zu instances, %ld (instance, t) points, %ld mismatches", instances.size(), points,
                               mismatches)};
}

Outcome sandwich() {
  const auto instances = corpus();
  int bound_violations = 0, unique = 0, ratio_violations = 0;
  double worst_slack = -INFINITY;
  for (const auto& inst : instances) {
    CompiledFormula cf(inst.formula, inst.bindings);
    const auto shape = cf.smoothing_shape();
    const double hard = cf.hard(inst.trace, 0);
    double err[2];
    int k = 0;
    for (double beta : {10.0, 100.0}) {
      SmoothingConfig cfg;
      cfg.beta = beta;
      err[k] = std::abs(robustness_smooth(inst.formula, inst.trace, cfg, inst.bindings).value - hard);
      const double bound = shape.depth * std::log(static_cast<double>(shape.max_fan_in)) / beta;
      worst_slack = std::max(worst_slack, err[k] - bound);
      if (err[k] > bound + 1e-12 * std::max(1.0, std::abs(hard))) ++bound_violations;
      ++k;
    }
    if (oracle::unique_extremes(inst.formula, inst.trace, 0, inst.bindings)) {
      ++unique;
      if (err[1] > err[0] / 10.0) ++ratio_violations;
    }
  }
  return {bound_violations == 0 && ratio_violations == 0,
          fmt("%zu instances, %d bound violations (max err - bound %.3g), %d/%d unique-optimum ratio violations",
              instances.size(), bound_violations, worst_slack, ratio_violations, unique)};
}

DynamicsSpec spec_for(int agents) {
  DynamicsSpec s;
  s.kind = agents == 1 ? DynamicsKind::DoubleIntegrator2d : DynamicsKind::MultiAgentDoubleIntegrator;
  s.agents = agents;
  s.dt = 0.1;
  s.u_min = Eigen::VectorXd::Constant(2 * agents, -2.0);
  s.u_max = Eigen::VectorXd::Constant(2 * agents, 2.0);
  return s;
}

Outcome gradient_fidelity() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> H(1, 10), m(1, 2);
  std::uniform_real_distribution<double> ud(-2.0, 2.0);
  int failures = 0;
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const int agents = m(rng), horizon = H(rng);
    const DynamicsSpec spec = spec_for(agents);
    auto inst = oracle::random_instance(rng, horizon, 4, agents, false);
    Eigen::VectorXd x0 = inst.trace.states.row(0).transpose();
    ControlSequence u(horizon, 2 * agents);
    for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = ud(rng);
    const SmoothingConfig cfg;
    auto r = robustness_smooth(inst.formula, rollout(spec, x0, u), cfg, inst.bindings);
    ControlSequence gu = backprop_controls(rollout_jacobians(spec), r.per_state_grad);
    auto fd = oracle::central_diff(
        [&](const Eigen::VectorXd& y) {
          ControlSequence v = u;
          Eigen::Map<Eigen::VectorXd>(v.data(), v.size()) = y;
          return robustness_smooth(inst.formula, rollout(spec, x0, v), cfg, inst.bindings).value;
        },
        Eigen::Map<const Eigen::VectorXd>(u.data(), u.size()), 1e-5);
    const double e = oracle::rel_error(Eigen::Map<const Eigen::VectorXd>(gu.data(), gu.size()), fd);
    worst = std::max(worst, e);
    if (!(e <= 1e-4)) ++failures;
  }
  return {failures == 0, fmt("200 instances, %d above 1e-4, worst relative error %.2e", failures, worst)};
}

Outcome reach_avoid_anchor() {
  const Scenario s = load_builtin_scenario("reach_avoid");
  const json overrides{{"svpio", {{"particles", 10}, {"iterations", 20}}}};
  std::vector<double> rob;
  int positive = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    rob.push_back(run_method(s, Method::Svpio, seed, overrides).robustness);
    if (rob.back() > 0.0) ++positive;
  }
  const double med = median(rob);
  return {positive >= 18 && med >= 0.02 && med <= 0.5,
          fmt("%d/20 seeds positive, median robustness %.4f", positive, med)};
}

// Corridor svpio runs are shared with criterion 6.
std::vector<CellResult> corridor_svpio_cells;

Outcome ablation_ordering() {
  BenchmarkPlan plan;
  plan.scenarios = {"corridor", "long_horizon"};
  plan.methods = {Method::Svpio, Method::Gd};
  plan.seeds = seed_range(30);
  AggregateReport main = run_benchmark(plan);
  plan.scenarios = {"corridor"};
  plan.methods = {Method::FdSvgd};
  AggregateReport fd = run_benchmark(plan);
  for (const auto& c : main.cells) {
    if (c.scenario == "corridor" && c.method == Method::Svpio) corridor_svpio_cells.push_back(c);
  }
  const double sc = satisfaction(main.cells, "corridor", Method::Svpio);
  const double gc = satisfaction(main.cells, "corridor", Method::Gd);
  const double sl = satisfaction(main.cells, "long_horizon", Method::Svpio);
  const double gl = satisfaction(main.cells, "long_horizon", Method::Gd);
  const double fc = satisfaction(fd.cells, "corridor", Method::FdSvgd);
  const bool ok = sc - gc >= 0.2 - 1e-12 && sl - gl >= 0.2 - 1e-12 && sc > fc;
  return {ok, fmt("corridor svpio %.3f gd %.3f fd-svgd %.3f; long_horizon svpio %.3f gd %.3f", sc, gc, fc, sl, gl)};
}

Outcome multi_agent() {
  BenchmarkPlan plan;
  plan.scenarios = {"button_order", "sync_goals"};
  plan.methods = {Method::Svpio};
  plan.seeds = seed_range(30);
  std::vector<CellResult> cells = run_benchmark(plan).cells;
  if (corridor_svpio_cells.empty()) {
    plan.scenarios = {"corridor"};
    corridor_svpio_cells = run_benchmark(plan).cells;
  }
  cells.insert(cells.end(), corridor_svpio_cells.begin(), corridor_svpio_cells.end());
  bool ok = true;
  std::string detail;
  for (const char* name : {"button_order", "sync_goals", "corridor"}) {
    const int n = load_builtin_scenario(name).tuning["svpio"].value("particles", 0);
    const double rate = satisfaction(cells, name, Method::Svpio);
    ok = ok && rate >= 0.5 && n <= 64;
    detail += fmt("%s%s %.3f (N=%d)", detail.empty() ? "" : ", ", name, rate, n);
  }
  return {ok, detail};
}

Outcome svgd_correctness() {
  const auto g = oracle::gaussian_recovery();
  const auto m = oracle::bimodal_coverage();
  const bool ok = g.mean_error <= 0.05 && g.variance_error <= 0.25 && m.near_a > 0 && m.near_b > 0 &&
                  m.single_near_a != m.single_near_b;
  return {ok, fmt("gaussian mean error %.4f sigma, variance error %.3f; bimodal %d near a, %d near b; "
                  "single particle reaches %s",
                  g.mean_error, g.variance_error, m.near_a, m.near_b,
                  m.single_near_a == m.single_near_b ? (m.single_near_a ? "both" : "neither")
                                                     : (m.single_near_a ? "a only" : "b only"))};
}

Outcome determinism() {
  BenchmarkPlan plan;
  plan.scenarios = {"reach_avoid", "sync_goals"};
  plan.methods = {Method::Svpio, Method::Mppi, Method::Gd, Method::FdSvgd};
  plan.seeds = {0, 1, 2};
  plan.overrides = {{"svpio", {{"iterations", 5}}},
                    {"gd", {{"iterations", 10}}},
                    {"fd_svgd", {{"iterations", 2}, {"particles", 4}}},
                    {"mppi", {{"iterations", 10}}}};
  std::vector<std::string> reports, results;
  for (unsigned w : {1u, 8u, 1u}) {
    plan.workers = w;
    AggregateReport r = run_benchmark(plan);
    std::string all;
    for (const auto& c : r.cells) all += dump_json(strip_timing(result_to_json(c.run)));
    reports.push_back(dump_json(strip_timing(report_to_json(r))));
    results.push_back(all);
  }
  // Particle-level threads inside one run.
  const Scenario s = load_builtin_scenario("corridor");
  const json small{{"svpio", {{"iterations", 5}}}};
  const bool particles_same = dump_json(strip_timing(result_to_json(run_method(s, Method::Svpio, 9, small, 1)))) ==
                              dump_json(strip_timing(result_to_json(run_method(s, Method::Svpio, 9, small, 8))));
  const bool ok = reports[0] == reports[1] && reports[1] == reports[2] && results[0] == results[1] &&
                  results[1] == results[2] && particles_same;
  return {ok, fmt("24 cells, runs with 1, 8, 1 workers; reports %s, results %s; particle threads 1 vs 8 %s",
                  reports[0] == reports[1] && reports[1] == reports[2] ? "identical" : "differ",
                  results[0] == results[1] && results[1] == results[2] ? "identical" : "differ",
                  particles_same ? "identical" : "differ")};
}

Outcome ablation_identity() {
  const Scenario s = load_builtin_scenario("reach_avoid");
  GdConfig g;
  g.iterations = 10;
  g.seed = 5;
  SvpioConfig v;
  v.particles = 1;
  v.iterations = 10;
  v.epsilon = g.epsilon;
  v.lambda = g.lambda;
  v.seed = g.seed;
  RunResult a = run_gradient_ascent(s, g);
  RunResult b = run_svpio(s, v);
  const bool same_controls = a.controls == b.controls;
  const bool same_trace = a.trace.states == b.trace.states;
  bool same_diag = a.diagnostics.size() == b.diagnostics.size();
  for (std::size_t i = 0; same_diag && i < a.diagnostics.size(); ++i) {
    same_diag = a.diagnostics[i].best == b.diagnostics[i].best;
  }
  return {same_controls && same_trace && same_diag && a.robustness == b.robustness,
          fmt("controls %s, trajectory %s, per-iteration best %s", same_controls ? "identical" : "differ",
              same_trace ? "identical" : "differ", same_diag ? "identical" : "differ")};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // 0: no runtime limit
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "robustness oracle equivalence", 10, oracle_equivalence},
      {2, "smooth-hard sandwich", 30, sandwich},
      {3, "gradient fidelity", 60, gradient_fidelity},
      {4, "reach-avoid anchor", 120, reach_avoid_anchor},
      {5, "ablation ordering", 1800, ablation_ordering},
      {6, "multi-agent feasibility", 0, multi_agent},
      {7, "SVGD correctness", 60, svgd_correctness},
      {8, "determinism", 0, determinism},
      {9, "ablation identity", 0, ablation_identity},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && secs > c.limit_s) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s limit", c.limit_s);
    }
    if (!o.pass) ++failed;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
