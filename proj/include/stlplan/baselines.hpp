#pragma once

#include "stlplan/planner.hpp"

#include <json.hpp>

#include <cstdint>

namespace stlplan {

// ---- Gradient ascent on smooth robustness ---------------------------------

struct GdConfig {
  int iterations = 20;
  double epsilon = 0.2;  // step size; the applied step is epsilon / lambda * gradient
  double lambda = 0.1;
  std::uint64_t seed = 0;
  bool clamp_after_step = true;
};

GdConfig gd_config(const nlohmann::json& tuning, GdConfig base);
nlohmann::json to_json(const GdConfig& cfg);

/// One control sequence drawn from the same uniform stream as particle 0 of the transport
/// optimizer, then u <- clamp(u + epsilon * grad / lambda) for each iteration.
RunResult run_gradient_ascent(const Scenario& scenario, const GdConfig& cfg);

// ---- Transport with finite-difference gradients ----------------------------

struct FdConfig {
  double fd_step = 1e-4;
};

/// Central differences of hard robustness, one pair of probes per control coordinate.
ControlSequence fd_gradient(const Scenario& scenario, const ControlSequence& u, double fd_step);

/// Hard robustness for both selection and potential; the gradient comes from fd_gradient.
class FdObjective : public Objective {
 public:
  FdObjective(const Scenario& scenario, FdConfig cfg);

  Eigen::Index dimension() const override { return inner_.dimension(); }
  ObjectiveSample evaluate(std::span<const double> u, bool with_gradient) const override;

 private:
  StlObjective inner_;
  FdConfig cfg_;
};

struct FdSvgdSettings {
  SvpioConfig svgd;
  FdConfig fd;
};

FdSvgdSettings fd_svgd_config(const nlohmann::json& tuning, FdSvgdSettings base);

RunResult run_fd_svgd(const Scenario& scenario, const FdSvgdSettings& cfg);

// ---- MPPI with handcrafted distance costs ----------------------------------

struct MppiConfig {
  int samples = 10;
  int iterations = 200;
  double lambda = 1.0;
  Eigen::VectorXd sigma;  // per control dimension standard deviation; empty = 0.25 of the control range
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

struct HeuristicCost {
  double obstacle_weight = 10.0;
  double goal_weight = 0.1;
  double terminal_weight = 5.0;
};

MppiConfig mppi_config(const nlohmann::json& tuning, MppiConfig base);
HeuristicCost heuristic_cost(const nlohmann::json& tuning, HeuristicCost base);
nlohmann::json to_json(const MppiConfig& cfg, const HeuristicCost& cost);

/// w_k = exp(-(J_k - min J) / lambda), normalized.
Eigen::VectorXd mppi_weights(const Eigen::VectorXd& costs, double lambda);

/// sum_t [w_obs sum_o max(0, r_o - |p_t - c_o|) + w_goal |p_t - g|] + w_term |p_H - g|.
/// Needs a single agent and a single goal zone; throws ScenarioError otherwise.
double heuristic_trajectory_cost(const Scenario& scenario, const HeuristicCost& cost, const Trace& trace);

/// Nominal starts at zero (projected into the box). Each iteration draws `samples`
/// Gaussian perturbations, projects them into the box, and moves the nominal to the
/// weighted mean. The reported robustness is the hard robustness of the final nominal.
RunResult run_mppi(const Scenario& scenario, const MppiConfig& cfg, const HeuristicCost& cost);

}  // namespace stlplan
