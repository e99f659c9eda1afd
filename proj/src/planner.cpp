#include "stlplan/planner.hpp"

#include <set>
#include <stdexcept>

namespace stlplan {

ControlBox control_box(const DynamicsSpec& spec, int horizon) {
  ControlBox box;
  box.lower = spec.u_min.transpose().replicate(1, horizon);
  box.upper = spec.u_max.transpose().replicate(1, horizon);
  return box;
}

ControlSequence unflatten_controls(std::span<const double> u, int horizon, int control_dim) {
  if (u.size() != static_cast<std::size_t>(horizon) * control_dim) {
    throw std::invalid_argument("control vector has " + std::to_string(u.size()) + " entries, expected " +
                                std::to_string(horizon * control_dim));
  }
  return Eigen::Map<const ControlSequence>(u.data(), horizon, control_dim);
}

StlObjective::StlObjective(const Scenario& scenario)
    : scenario_(scenario),
      formula_(scenario.formula, scenario.bindings),
      jac_(rollout_jacobians(scenario.dynamics)),
      horizon_(scenario.horizon),
      control_dim_(scenario.dynamics.control_dim()) {}

Trace StlObjective::rollout(std::span<const double> u) const {
  return stlplan::rollout(scenario_.dynamics, scenario_.x0, unflatten_controls(u, horizon_, control_dim_));
}

double StlObjective::hard(std::span<const double> u) const {
  return formula_.hard(rollout(u), 0, scenario_.smoothing.top_sentinel);
}

ObjectiveSample StlObjective::evaluate(std::span<const double> u, bool with_gradient) const {
  Trace trace = rollout(u);
  ObjectiveSample s;
  s.score = formula_.hard(trace, 0, scenario_.smoothing.top_sentinel);
  if (with_gradient) {
    RobustnessResult r = formula_.smooth(trace, scenario_.smoothing);
    s.smooth = r.value;
    ControlSequence g = backprop_controls(jac_, r.per_state_grad);
    s.gradient = Eigen::Map<const Eigen::RowVectorXd>(g.data(), g.size());
  } else {
    s.smooth = formula_.smooth_value(trace, scenario_.smoothing);
  }
  return s;
}

double default_epsilon(const DynamicsSpec& spec) { return 0.05 * (spec.u_max - spec.u_min).mean(); }

SvpioConfig svpio_config(const nlohmann::json& tuning, SvpioConfig base) {
  static const std::set<std::string> known = {"particles", "iterations",      "epsilon",          "lambda",
                                              "seed",      "bandwidth_floor", "clamp_after_step", "workers"};
  if (tuning.is_null()) return base;
  if (!tuning.is_object()) throw std::invalid_argument("svpio settings must be a table");
  for (const auto& [key, value] : tuning.items()) {
    if (!known.contains(key)) throw std::invalid_argument("unknown svpio setting '" + key + "'");
    try {
      if (key == "particles") base.particles = value.get<int>();
      if (key == "iterations") base.iterations = value.get<int>();
      if (key == "epsilon") base.epsilon = value.get<double>();
      if (key == "lambda") base.lambda = value.get<double>();
      if (key == "seed") base.seed = value.get<std::uint64_t>();
      if (key == "bandwidth_floor") base.bandwidth_floor = value.get<double>();
      if (key == "clamp_after_step") base.clamp_after_step = value.get<bool>();
      if (key == "workers") base.workers = value.get<unsigned>();
    } catch (const nlohmann::json::exception&) {
      throw std::invalid_argument("svpio setting '" + key + "' has the wrong type");
    }
  }
  return base;
}

nlohmann::json to_json(const SvpioConfig& cfg) {
  return {{"particles", cfg.particles},   {"iterations", cfg.iterations},
          {"epsilon", cfg.epsilon},       {"lambda", cfg.lambda},
          {"bandwidth_floor", cfg.bandwidth_floor}, {"clamp_after_step", cfg.clamp_after_step}};
}

RunResult make_run_result(const StlObjective& objective, const SvgdRun& run, const std::string& method,
                          std::uint64_t seed) {
  const Scenario& sc = objective.scenario();
  RunResult r;
  r.scenario = sc.name;
  r.method = method;
  r.seed = seed;
  const auto row = run.final.particles.row(run.best);
  r.controls = unflatten_controls({row.data(), static_cast<std::size_t>(row.size())}, sc.horizon,
                                  sc.dynamics.control_dim());
  r.trace = rollout(sc.dynamics, sc.x0, r.controls);
  r.robustness = run.final.hard(run.best);
  r.diagnostics = run.diagnostics;
  r.samples = static_cast<int>(run.final.particles.rows());
  r.iterations = static_cast<int>(run.diagnostics.size());
  r.evaluations = run.evaluations;
  r.wall_ms = run.wall_ms;
  return r;
}

RunResult run_svpio(const Scenario& scenario, const SvpioConfig& cfg) {
  check_config(cfg);
  StlObjective objective(scenario);
  SvgdRun run = run_svgd(objective, control_box(scenario.dynamics, scenario.horizon), cfg);
  RunResult r = make_run_result(objective, run, "svpio", cfg.seed);
  r.config = to_json(cfg);
  return r;
}

}  // namespace stlplan
