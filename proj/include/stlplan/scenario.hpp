#pragma once

#include "stlplan/dynamics.hpp"
#include "stlplan/formula.hpp"
#include "stlplan/predicates.hpp"
#include "stlplan/semantics.hpp"

#include <json.hpp>

#include <Eigen/Core>

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stlplan {

enum class TaskKind { Custom, ReachAvoid, LongHorizon, ButtonOrder, SyncGoals, Corridor };

std::string_view to_string(TaskKind kind);
std::optional<TaskKind> task_kind_from_string(std::string_view s);

struct CircleObstacle {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;
};

enum class ZoneShape { Circle, Box };

/// Named region. Roles: "goal" (reach target), "button" (gating event),
/// "corridor" (passage to traverse). agent = -1 means every agent.
struct Zone {
  std::string name;
  ZoneShape shape = ZoneShape::Circle;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;
  Eigen::Vector2d half_extents = Eigen::Vector2d::Zero();
  std::string role = "goal";
  int agent = -1;
};

struct Wall {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  Eigen::Vector2d half_extents = Eigen::Vector2d::Zero();
};

struct Geometry {
  std::vector<CircleObstacle> obstacles;
  std::vector<Zone> zones;
  std::vector<Wall> walls;
};

struct TaskFormula {
  Formula formula;
  PredicateBindings bindings;
};

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Emits the canonical specification of a task kind over the given geometry.
///   reach_avoid  : G[0,H] avoid_o ... and F[0,H] in_goal
///   long_horizon : /\_o G[0,H] avoid_o and /\_z F[0,H] in_z
///   button_order : avoidance for both agents, F in(0,A), F in(1,C), (not in(1,C)) U[0,H] in(0,B)
///   sync_goals   : /\_{i<j} G[0,H] col_ij and F[0,H-2d] (/\_i F[0,2d] in_i)
///   corridor     : separation, wall avoidance, corridor visit, x >= 0, exclusive occupancy
/// Throws ScenarioError when the geometry does not fit the task (or 2*delta >= H for sync_goals).
TaskFormula build_formula(TaskKind kind, const Geometry& geometry, int agents, int horizon, int delta,
                          double agent_radius);

struct Scenario {
  std::string name;
  TaskKind task = TaskKind::Custom;
  DynamicsSpec dynamics;
  Eigen::VectorXd x0;
  int horizon = 0;
  int delta = 5;
  double agent_radius = 0.15;
  Geometry geometry;
  PredicateBindings bindings;
  Formula formula = Formula::top();
  SmoothingConfig smoothing;
  nlohmann::json tuning = nlohmann::json::object();  // per-method defaults: svpio, gd, fd_svgd, mppi, heuristic
};

/// Builds and validates a scenario from a parsed config tree. Errors name the field path.
Scenario scenario_from_json(const nlohmann::json& doc);

/// Explicit form: predicates and formula text are always written out.
nlohmann::json scenario_to_json(const Scenario& s);

Scenario load_scenario(const std::string& path);
std::string scenario_to_toml(const Scenario& s);

std::vector<std::string> builtin_scenario_names();
std::string builtin_scenario_source(const std::string& name);
Scenario load_builtin_scenario(const std::string& name);

/// Built-in name or path to a config file.
Scenario resolve_scenario(const std::string& name_or_path);

/// Top-level conjuncts of the scenario formula (the formula itself if it is not a conjunction).
std::vector<Formula> top_level_conjuncts(const Formula& f);

struct ConjunctReport {
  std::string text;
  double robustness = 0.0;
};

struct CheckReport {
  double robustness = 0.0;
  std::vector<ConjunctReport> conjuncts;
};

/// Hard robustness of the scenario formula plus each top-level conjunct.
CheckReport check_trajectory(const Scenario& s, const Trace& trace);
CheckReport check_trajectory(const Scenario& s, const std::string& trace_csv_path);

/// Geometry/formula agreement: each (obstacle, agent) and (wall, agent) pair in exactly one
/// always-rooted conjunct, each (goal or corridor zone, agent) pair in exactly one eventually-rooted
/// conjunct. Returns the violations found.
std::vector<std::string> audit_geometry(const Scenario& s);

/// trace.csv: header `t,x0,...,x{n-1}`, one row per step, 17 significant digits.
void write_trace_csv(const std::string& path, const Trace& trace);
std::string trace_to_csv(const Trace& trace);
Trace read_trace_csv(const std::string& path, double dt);
Trace trace_from_csv(std::string_view text, double dt);

}  // namespace stlplan
