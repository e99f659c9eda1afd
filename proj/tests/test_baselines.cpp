#include "oracles.hpp"

#include "stlplan/baselines.hpp"
#include "stlplan/planner.hpp"
#include "stlplan/scenario.hpp"
#include "stlplan/toml.hpp"

#include <doctest.h>

#include <cmath>

using namespace stlplan;

namespace {

// Single agent with affine predicates on x, y at step 3.
Scenario affine_scenario(const std::string& formula) {
  return scenario_from_json(toml::parse(R"(
name = "affine"
horizon = 6
formula = ")" + formula + R"("
[dynamics]
u_min = -2.0
u_max = 2.0
[[agents]]
position = [0.0, 0.0]
[[predicates]]
name = "px2"
kind = "custom_affine"
coeffs = [2.0, 0.0, 0.0, 0.0]
[[predicates]]
name = "nx"
kind = "custom_affine"
coeffs = [-1.0, 0.0, 0.0, 0.0]
[[predicates]]
name = "ny"
kind = "custom_affine"
coeffs = [-1.0, 0.0, 0.0, 0.0]
offset = 0.0
[[predicates]]
name = "lin"
kind = "custom_affine"
coeffs = [1.5, -0.5, 0.25, 0.0]
offset = 0.3
)"));
}

Eigen::VectorXd flat(const ControlSequence& u) { return Eigen::Map<const Eigen::VectorXd>(u.data(), u.size()); }

}  // namespace

TEST_CASE("mppi weights") {
  Eigen::VectorXd same = Eigen::VectorXd::Constant(8, 3.7);
  Eigen::VectorXd w = mppi_weights(same, 1.0);
  CHECK((w.array() - 1.0 / 8).abs().maxCoeff() < 1e-15);

  Eigen::VectorXd c(4);
  c << 2.0, 0.5, 0.9, 4.0;
  Eigen::VectorXd sharp = mppi_weights(c, 1e-4);
  CHECK(sharp(1) == doctest::Approx(1.0));
  CHECK(sharp(0) < 1e-12);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int k = 0; k < 100; ++k) {
    Eigen::VectorXd r(10);
    for (auto& x : r) x = u(rng);
    CHECK(std::abs(mppi_weights(r, 0.5 + k).sum() - 1.0) <= 1e-12);
  }
  CHECK_THROWS(mppi_weights(c, 0.0));
}

TEST_CASE("uniform weights make the update the mean perturbation") {
  std::mt19937_64 rng(6);
  ControlSequence nominal = ControlSequence::Random(5, 2);
  std::vector<ControlSequence> cand;
  ControlSequence mean = ControlSequence::Zero(5, 2);
  for (int k = 0; k < 6; ++k) {
    cand.push_back(nominal + ControlSequence::Random(5, 2));
    mean += (cand.back() - nominal) / 6.0;
  }
  Eigen::VectorXd w = mppi_weights(Eigen::VectorXd::Constant(6, 1.0), 2.0);
  ControlSequence update = ControlSequence::Zero(5, 2);
  for (int k = 0; k < 6; ++k) update += w(k) * (cand[k] - nominal);
  CHECK((update - mean).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("heuristic cost on a hand-built trace") {
  Scenario s = load_builtin_scenario("reach_avoid");
  Trace tr;
  tr.states = StateMatrix::Zero(3, 4);
  tr.states.row(1) << 1.5, 1.2, 0, 0;  // 0.3 inside the obstacle
  tr.states.row(2) << 3.0, 3.0, 0, 0;
  HeuristicCost w;
  const double d0 = std::hypot(3.0, 3.0), d1 = std::hypot(1.5, 1.8);
  const double want = w.goal_weight * (d0 + d1) + w.obstacle_weight * 0.3;
  CHECK(heuristic_trajectory_cost(s, w, tr) == doctest::Approx(want));
  CHECK_THROWS_AS(heuristic_trajectory_cost(load_builtin_scenario("sync_goals"), w, tr), ScenarioError);
  CHECK_THROWS(run_mppi(load_builtin_scenario("corridor"), MppiConfig{}, w));
}

TEST_CASE("mppi is deterministic across worker counts and stays in the box") {
  Scenario s = load_builtin_scenario("reach_avoid");
  MppiConfig cfg;
  cfg.iterations = 30;
  cfg.seed = 9;
  RunResult a = run_mppi(s, cfg, HeuristicCost{});
  cfg.workers = 3;
  RunResult b = run_mppi(s, cfg, HeuristicCost{});
  CHECK(a.controls == b.controls);
  CHECK(a.robustness == b.robustness);
  CHECK((a.controls.array().abs() <= 2.0).all());
  CHECK(a.robustness == CompiledFormula(s.formula, s.bindings).hard(a.trace));
  CHECK(a.samples == 10);
  CHECK(a.diagnostics.size() == 30);
}

TEST_CASE("gradient ascent equals one-particle transport iterate by iterate") {
  Scenario s = load_builtin_scenario("reach_avoid");
  for (int m = 0; m <= 10; ++m) {
    GdConfig g;
    g.iterations = m;
    g.seed = 21;
    SvpioConfig v;
    v.particles = 1;
    v.iterations = m;
    v.epsilon = g.epsilon;
    v.lambda = g.lambda;
    v.seed = g.seed;
    RunResult a = run_gradient_ascent(s, g);
    RunResult b = run_svpio(s, v);
    CHECK(a.controls == b.controls);
    CHECK(a.trace.states == b.trace.states);
    CHECK(a.robustness == b.robustness);
  }
}

TEST_CASE("gradient ascent leaves a flat start unchanged") {
  Scenario s = load_builtin_scenario("reach_avoid");
  s.formula = Formula::top();
  GdConfig g;
  g.iterations = 5;
  g.seed = 2;
  RunResult r = run_gradient_ascent(s, g);
  auto init = sample_uniform(control_box(s.dynamics, s.horizon), 1, g.seed);
  CHECK(Eigen::Map<const Eigen::RowVectorXd>(r.controls.data(), r.controls.size()) == init.row(0));
}

TEST_CASE("fd gradient is exact for affine robustness") {
  Scenario s = affine_scenario("F[3,3] lin");
  StlObjective obj(s);
  ControlSequence u = ControlSequence::Random(6, 2);
  ControlSequence g = fd_gradient(s, u, 1e-4);
  auto exact = obj.evaluate({u.data(), static_cast<std::size_t>(u.size())}, true).gradient;
  CHECK((flat(g) - exact.transpose()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(exact.norm() > 0.0);
}

TEST_CASE("fd and smooth gradients disagree at a kink") {
  // Three conjuncts cross at x_3 = 0 with slopes 2, -1, -1: one-sided slopes are -1 and 2,
  // so central differences give 0.5 while the smooth weights are uniform and give 0.
  Scenario s = affine_scenario("F[3,3] (px2 and nx and ny)");
  ControlSequence u = ControlSequence::Zero(6, 2);
  ControlSequence g = fd_gradient(s, u, 1e-4);
  auto exact = StlObjective(s).evaluate({u.data(), static_cast<std::size_t>(u.size())}, true).gradient;
  CHECK(g(0, 0) == doctest::Approx(0.5 * 3 * 0.01));
  CHECK(std::abs(exact(0)) < 1e-12);
  CHECK(oracle::rel_error(exact.transpose(), flat(g)) > 0.5);
}

TEST_CASE("fd gradient of hard robustness matches the sharp smooth gradient away from kinks") {
  Scenario s = load_builtin_scenario("reach_avoid");
  s.smoothing.beta = 1e5;
  StlObjective obj(s);
  int compared = 0;
  for (std::uint64_t seed = 0; seed < 20 && compared < 5; ++seed) {
    auto u = sample_uniform(control_box(s.dynamics, s.horizon), 1, seed);
    ControlSequence cu = unflatten_controls({u.data(), static_cast<std::size_t>(u.size())}, s.horizon, 2);
    Trace tr = rollout(s.dynamics, s.x0, cu);
    // Skip starts within 1e-3 of a min/max tie.
    std::vector<double> avoid, goal;
    for (int t = 0; t <= s.horizon; ++t) {
      Eigen::VectorXd x = tr.states.row(t).transpose();
      avoid.push_back(predicate_value(s.bindings.at("avoid_obs"), x));
      goal.push_back(predicate_value(s.bindings.at("in_goal"), x));
    }
    std::sort(avoid.begin(), avoid.end());
    std::sort(goal.begin(), goal.end());
    const double top_goal = goal.back(), low_avoid = avoid.front();
    if (avoid[1] - avoid[0] < 1e-3 || goal.back() - goal[goal.size() - 2] < 1e-3 ||
        std::abs(top_goal - low_avoid) < 1e-3) {
      continue;
    }
    ControlSequence g = fd_gradient(s, cu, 1e-6);
    auto exact = obj.evaluate({u.data(), static_cast<std::size_t>(u.size())}, true).gradient;
    CHECK(oracle::rel_error(flat(g), exact.transpose()) <= 1e-2);
    ++compared;
  }
  CHECK(compared >= 3);
}

TEST_CASE("fd transport counts its probes") {
  Scenario s = load_builtin_scenario("reach_avoid");
  FdSvgdSettings cfg;
  cfg.svgd.particles = 2;
  cfg.svgd.iterations = 1;
  RunResult r = run_fd_svgd(s, cfg);
  const long per_grad = 1 + 2 * static_cast<long>(s.horizon) * 2;
  CHECK(r.evaluations == 2 * per_grad + 2);
  CHECK(r.method == "fd-svgd");
  CHECK(r.robustness == CompiledFormula(s.formula, s.bindings).hard(r.trace));
}

TEST_CASE("baseline config readers reject unknown keys") {
  CHECK_THROWS(gd_config(nlohmann::json{{"particles", 3}}, GdConfig{}));
  CHECK_THROWS(mppi_config(nlohmann::json{{"epsilon", 3}}, MppiConfig{}));
  CHECK(mppi_config(nlohmann::json{{"sigma", {0.1, 0.2}}}, MppiConfig{}).sigma.size() == 2);
  CHECK(fd_svgd_config(nlohmann::json{{"fd_step", 1e-3}, {"particles", 4}}, FdSvgdSettings{}).fd.fd_step == 1e-3);
  CHECK_THROWS(heuristic_cost(nlohmann::json{{"goal_weight", -1.0}}, HeuristicCost{}));
}
