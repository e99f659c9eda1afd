#pragma once

#include "stlplan/dynamics.hpp"
#include "stlplan/scenario.hpp"
#include "stlplan/semantics.hpp"
#include "stlplan/svgd.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace stlplan {

/// Outcome of one optimizer run on one scenario.
struct RunResult {
  std::string scenario;
  std::string method;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();  // hyperparameters actually used
  ControlSequence controls;
  Trace trace;
  double robustness = 0.0;  // hard robustness of `trace`
  std::vector<IterationDiag> diagnostics;
  int samples = 0;      // particles or samples per iteration
  int iterations = 0;
  long evaluations = 0;  // robustness (or cost) evaluations, including finite-difference probes
  double wall_ms = 0.0;
};

/// Flattened control box [u_min, u_max] repeated over the horizon.
ControlBox control_box(const DynamicsSpec& spec, int horizon);

ControlSequence unflatten_controls(std::span<const double> u, int horizon, int control_dim);

/// Rollout, hard robustness for selection, smooth robustness and its control gradient.
class StlObjective : public Objective {
 public:
  explicit StlObjective(const Scenario& scenario);

  Eigen::Index dimension() const override { return static_cast<Eigen::Index>(horizon_) * control_dim_; }
  ObjectiveSample evaluate(std::span<const double> u, bool with_gradient) const override;

  const Scenario& scenario() const { return scenario_; }
  const CompiledFormula& formula() const { return formula_; }
  Trace rollout(std::span<const double> u) const;
  double hard(std::span<const double> u) const;

 private:
  const Scenario& scenario_;
  CompiledFormula formula_;
  RolloutJacobians jac_;
  int horizon_;
  int control_dim_;
};

/// Reads particles, iterations, epsilon, lambda, bandwidth_floor, clamp_after_step from a
/// tuning table on top of `base`. Unknown keys throw std::invalid_argument.
SvpioConfig svpio_config(const nlohmann::json& tuning, SvpioConfig base);

/// Default step size: 0.05 of the mean control range.
double default_epsilon(const DynamicsSpec& spec);

/// Wraps a finished transport run into a RunResult (best particle, its trace and robustness).
RunResult make_run_result(const StlObjective& objective, const SvgdRun& run, const std::string& method,
                          std::uint64_t seed);

/// Uniform initialization over the control box, M transport iterations, hard-robustness argmax.
RunResult run_svpio(const Scenario& scenario, const SvpioConfig& cfg);

nlohmann::json to_json(const SvpioConfig& cfg);

}  // namespace stlplan
