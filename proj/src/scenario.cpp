#include "stlplan/scenario.hpp"

#include "stlplan/toml.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace stlplan {

namespace {

using json = nlohmann::json;

struct BuiltinEntry {
  const char* name;
  const char* source;
};

#include "builtin_scenarios.inc"

constexpr std::pair<TaskKind, std::string_view> kTaskNames[] = {
    {TaskKind::Custom, "custom"},           {TaskKind::ReachAvoid, "reach_avoid"},
    {TaskKind::LongHorizon, "long_horizon"}, {TaskKind::ButtonOrder, "button_order"},
    {TaskKind::SyncGoals, "sync_goals"},     {TaskKind::Corridor, "corridor"},
};

const std::set<std::string> kTuningKeys = {"svpio", "gd", "fd_svgd", "mppi", "heuristic"};
const std::set<std::string> kTopLevelKeys = {"name",   "task",      "horizon",    "delta",      "agent_radius",
                                             "formula", "dynamics", "smoothing",  "agents",     "obstacles",
                                             "zones",   "walls",    "predicates", "description"};

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ScenarioError(path.empty() ? msg : path + ": " + msg);
}

// --- JSON field access with error paths -------------------------------------

// path is either empty or ends in '.'.
void only_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> known) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) fail(path + key, "unknown field");
  }
}

const json* find(const json& obj, const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double number_at(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

double get_number(const json& obj, const std::string& key, const std::string& path, std::optional<double> def = {}) {
  const json* v = find(obj, key);
  if (!v) {
    if (def) return *def;
    fail(path + key, "missing required field");
  }
  return number_at(*v, path + key);
}

int get_int(const json& obj, const std::string& key, const std::string& path, std::optional<int> def = {}) {
  const json* v = find(obj, key);
  if (!v) {
    if (def) return *def;
    fail(path + key, "missing required field");
  }
  if (!v->is_number_integer()) fail(path + key, "expected an integer");
  return v->get<int>();
}

std::string get_string(const json& obj, const std::string& key, const std::string& path,
                       std::optional<std::string> def = {}) {
  const json* v = find(obj, key);
  if (!v) {
    if (def) return *def;
    fail(path + key, "missing required field");
  }
  if (!v->is_string()) fail(path + key, "expected a string");
  return v->get<std::string>();
}

Eigen::VectorXd vector_at(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = number_at(v[i], path + "[" + std::to_string(i) + "]");
  return out;
}

Eigen::Vector2d get_vec2(const json& obj, const std::string& key, const std::string& path,
                         std::optional<Eigen::Vector2d> def = {}) {
  const json* v = find(obj, key);
  if (!v) {
    if (def) return *def;
    fail(path + key, "missing required field");
  }
  Eigen::VectorXd x = vector_at(*v, path + key);
  if (x.size() != 2) fail(path + key, "expected 2 components");
  return x;
}

// Scalar or per-component array expanded to `size` entries.
Eigen::VectorXd get_bounds(const json& obj, const std::string& key, const std::string& path, int size, double def) {
  const json* v = find(obj, key);
  if (!v) return Eigen::VectorXd::Constant(size, def);
  if (v->is_number()) return Eigen::VectorXd::Constant(size, v->get<double>());
  Eigen::VectorXd x = vector_at(*v, path + key);
  if (x.size() != size) fail(path + key, "expected " + std::to_string(size) + " components");
  return x;
}

json to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

json to_json(const Eigen::Vector2d& v) { return json::array({v.x(), v.y()}); }

bool valid_identifier(const std::string& s) {
  if (s.empty() || std::isdigit(static_cast<unsigned char>(s[0]))) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

PredicateDef predicate_from_json(const json& p, const std::string& path) {
  if (!p.is_object()) fail(path, "expected a table");
  only_keys(p, path, {"name", "kind", "agents", "center", "radius", "half_extents", "threshold", "coeffs", "offset"});
  PredicateDef def;
  def.name = get_string(p, "name", path);
  if (!valid_identifier(def.name)) fail(path + "name", "'" + def.name + "' is not a valid identifier");
  std::string kind = get_string(p, "kind", path);
  auto k = predicate_kind_from_string(kind);
  if (!k) fail(path + "kind", "unknown predicate kind '" + kind + "'");
  def.kind = *k;
  if (const json* a = find(p, "agents")) {
    if (!a->is_array()) fail(path + "agents", "expected an array of integers");
    for (const auto& e : *a) {
      if (!e.is_number_integer()) fail(path + "agents", "expected an array of integers");
      def.agents.push_back(e.get<int>());
    }
  }
  def.center = get_vec2(p, "center", path, Eigen::Vector2d::Zero());
  def.radius = get_number(p, "radius", path, 0.0);
  def.half_extents = get_vec2(p, "half_extents", path, Eigen::Vector2d::Zero());
  def.threshold = get_number(p, "threshold", path, 0.0);
  if (const json* c = find(p, "coeffs")) def.coeffs = vector_at(*c, path + "coeffs");
  def.offset = get_number(p, "offset", path, 0.0);
  return def;
}

json predicate_to_json(const PredicateDef& p) {
  json out{{"name", p.name}, {"kind", std::string(to_string(p.kind))}, {"agents", p.agents}};
  switch (p.kind) {
    case PredicateKind::CircleAvoid:
    case PredicateKind::CircleIn:
      out["center"] = to_json(p.center);
      out["radius"] = p.radius;
      break;
    case PredicateKind::BoxIn:
      out["center"] = to_json(p.center);
      out["half_extents"] = to_json(p.half_extents);
      break;
    case PredicateKind::HalfspaceXGe: out["threshold"] = p.threshold; break;
    case PredicateKind::PairwiseSeparation: out["radius"] = p.radius; break;
    case PredicateKind::CustomAffine:
      out["coeffs"] = to_json(p.coeffs);
      out["offset"] = p.offset;
      break;
  }
  return out;
}

Zone zone_from_json(const json& z, const std::string& path) {
  only_keys(z, path, {"name", "shape", "center", "radius", "half_extents", "role", "agent"});
  Zone zone;
  zone.name = get_string(z, "name", path);
  if (!valid_identifier(zone.name)) fail(path + "name", "'" + zone.name + "' is not a valid identifier");
  std::string shape = get_string(z, "shape", path, std::string("circle"));
  if (shape == "circle") {
    zone.shape = ZoneShape::Circle;
    zone.radius = get_number(z, "radius", path);
    if (!(zone.radius > 0.0)) fail(path + "radius", "must be > 0");
  } else if (shape == "box") {
    zone.shape = ZoneShape::Box;
    zone.half_extents = get_vec2(z, "half_extents", path);
    if (!(zone.half_extents.array() > 0.0).all()) fail(path + "half_extents", "must be > 0");
  } else {
    fail(path + "shape", "expected 'circle' or 'box'");
  }
  zone.center = get_vec2(z, "center", path);
  zone.role = get_string(z, "role", path, std::string("goal"));
  zone.agent = get_int(z, "agent", path, -1);
  return zone;
}

json zone_to_json(const Zone& z) {
  json out{{"name", z.name}, {"center", to_json(z.center)}, {"role", z.role}, {"agent", z.agent}};
  if (z.shape == ZoneShape::Circle) {
    out["shape"] = "circle";
    out["radius"] = z.radius;
  } else {
    out["shape"] = "box";
    out["half_extents"] = to_json(z.half_extents);
  }
  return out;
}

template <typename F>
void for_each_entry(const json& doc, const std::string& key, F&& fn) {
  const json* arr = find(doc, key);
  if (!arr) return;
  if (!arr->is_array()) fail(key, "expected an array of tables");
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const json& e = (*arr)[i];
    std::string path = key + "[" + std::to_string(i) + "].";
    if (!e.is_object()) fail(path, "expected a table");
    fn(e, path);
  }
}

// --- Formula construction ----------------------------------------------------

class FormulaBuilder {
 public:
  FormulaBuilder(int horizon) : horizon_(horizon) {}

  Formula bind(PredicateDef p) {
    std::string name = p.name;
    out_.bindings.insert_or_assign(name, std::move(p));
    return Formula::pred(name);
  }

  Formula avoid(int agent, int index, const CircleObstacle& o) {
    PredicateDef p;
    p.name = "avoid_a" + std::to_string(agent) + "_o" + std::to_string(index);
    p.kind = PredicateKind::CircleAvoid;
    p.agents = {agent};
    p.center = o.center;
    p.radius = o.radius;
    return bind(std::move(p));
  }

  Formula in_zone(int agent, const Zone& z) {
    PredicateDef p;
    p.name = "in_a" + std::to_string(agent) + "_" + z.name;
    p.agents = {agent};
    p.center = z.center;
    if (z.shape == ZoneShape::Circle) {
      p.kind = PredicateKind::CircleIn;
      p.radius = z.radius;
    } else {
      p.kind = PredicateKind::BoxIn;
      p.half_extents = z.half_extents;
    }
    return bind(std::move(p));
  }

  Formula in_wall(int agent, int index, const Wall& w) {
    PredicateDef p;
    p.name = "in_a" + std::to_string(agent) + "_wall" + std::to_string(index);
    p.kind = PredicateKind::BoxIn;
    p.agents = {agent};
    p.center = w.center;
    p.half_extents = w.half_extents;
    return bind(std::move(p));
  }

  Formula separated(int i, int j, double r_col) {
    PredicateDef p;
    p.name = "col_a" + std::to_string(i) + "_a" + std::to_string(j);
    p.kind = PredicateKind::PairwiseSeparation;
    p.agents = {i, j};
    p.radius = r_col;
    return bind(std::move(p));
  }

  Formula x_at_least(int agent, double threshold) {
    PredicateDef p;
    p.name = "xpos_a" + std::to_string(agent);
    p.kind = PredicateKind::HalfspaceXGe;
    p.agents = {agent};
    p.threshold = threshold;
    return bind(std::move(p));
  }

  Formula always(Formula f) const { return Formula::always({0, horizon_}, std::move(f)); }
  Formula eventually(Formula f) const { return Formula::eventually({0, horizon_}, std::move(f)); }

  static Formula all_of(std::vector<Formula> terms) {
    if (terms.empty()) return Formula::top();
    if (terms.size() == 1) return terms.front();
    return Formula::conjunction(std::move(terms));
  }

  void add(Formula f) { conjuncts_.push_back(std::move(f)); }

  void avoid_everything(const Geometry& g, int agent) {
    for (std::size_t o = 0; o < g.obstacles.size(); ++o) add(always(avoid(agent, static_cast<int>(o), g.obstacles[o])));
    for (std::size_t w = 0; w < g.walls.size(); ++w) {
      add(always(Formula::negation(in_wall(agent, static_cast<int>(w), g.walls[w]))));
    }
  }

  TaskFormula finish() {
    out_.formula = all_of(std::move(conjuncts_));
    return std::move(out_);
  }

 private:
  int horizon_;
  std::vector<Formula> conjuncts_;
  TaskFormula out_{Formula::top(), {}};
};

std::vector<const Zone*> zones_with(const Geometry& g, const std::string& role) {
  std::vector<const Zone*> out;
  for (const auto& z : g.zones) {
    if (z.role == role) out.push_back(&z);
  }
  return out;
}

const Zone& unique_zone(const Geometry& g, const std::string& role, int agent, const char* task) {
  const Zone* hit = nullptr;
  for (const auto& z : g.zones) {
    if (z.role == role && (agent < 0 || z.agent == agent)) {
      if (hit) fail("zones", std::string(task) + ": more than one '" + role + "' zone" +
                                 (agent >= 0 ? " for agent " + std::to_string(agent) : ""));
      hit = &z;
    }
  }
  if (!hit) {
    fail("zones", std::string(task) + ": needs a '" + role + "' zone" +
                      (agent >= 0 ? " for agent " + std::to_string(agent) : ""));
  }
  return *hit;
}

}  // namespace

std::string_view to_string(TaskKind kind) {
  for (const auto& [k, n] : kTaskNames) {
    if (k == kind) return n;
  }
  return "custom";
}

std::optional<TaskKind> task_kind_from_string(std::string_view s) {
  for (const auto& [k, n] : kTaskNames) {
    if (n == s) return k;
  }
  return std::nullopt;
}

TaskFormula build_formula(TaskKind kind, const Geometry& g, int agents, int horizon, int delta, double agent_radius) {
  if (horizon < 1) fail("horizon", "must be >= 1");
  FormulaBuilder b(horizon);
  auto pairs = [&](auto&& term) {
    for (int i = 0; i < agents; ++i) {
      for (int j = i + 1; j < agents; ++j) b.add(term(i, j));
    }
  };
  switch (kind) {
    case TaskKind::Custom: fail("task", "custom scenarios must provide a formula");
    case TaskKind::ReachAvoid: {
      if (agents != 1) fail("agents", "reach_avoid has exactly one agent");
      b.avoid_everything(g, 0);
      b.add(b.eventually(b.in_zone(0, unique_zone(g, "goal", -1, "reach_avoid"))));
      break;
    }
    case TaskKind::LongHorizon: {
      if (agents != 1) fail("agents", "long_horizon has exactly one agent");
      auto goals = zones_with(g, "goal");
      if (goals.empty()) fail("zones", "long_horizon needs at least one goal zone");
      b.avoid_everything(g, 0);
      for (const Zone* z : goals) b.add(b.eventually(b.in_zone(0, *z)));
      break;
    }
    case TaskKind::ButtonOrder: {
      if (agents != 2) fail("agents", "button_order has exactly two agents");
      const Zone& goal_a = unique_zone(g, "goal", 0, "button_order");
      const Zone& goal_c = unique_zone(g, "goal", 1, "button_order");
      const Zone& button = unique_zone(g, "button", -1, "button_order");
      b.avoid_everything(g, 0);
      b.avoid_everything(g, 1);
      b.add(b.eventually(b.in_zone(0, goal_a)));
      Formula second_in_goal = b.in_zone(1, goal_c);
      b.add(b.eventually(second_in_goal));
      b.add(Formula::until({0, horizon}, Formula::negation(second_in_goal), b.in_zone(0, button)));
      break;
    }
    case TaskKind::SyncGoals: {
      if (delta < 0) fail("delta", "must be >= 0");
      if (2 * delta >= horizon) {
        fail("delta", "sync window 2*delta = " + std::to_string(2 * delta) + " leaves no room in horizon " +
                          std::to_string(horizon) + " (need delta < H/2)");
      }
      pairs([&](int i, int j) { return b.always(b.separated(i, j, agent_radius)); });
      for (int i = 0; i < agents; ++i) b.avoid_everything(g, i);
      std::vector<Formula> arrivals;
      for (int i = 0; i < agents; ++i) {
        arrivals.push_back(Formula::eventually({0, 2 * delta}, b.in_zone(i, unique_zone(g, "goal", i, "sync_goals"))));
      }
      b.add(Formula::eventually({0, horizon - 2 * delta}, FormulaBuilder::all_of(std::move(arrivals))));
      break;
    }
    case TaskKind::Corridor: {
      const Zone& corridor = unique_zone(g, "corridor", -1, "corridor");
      if (corridor.shape != ZoneShape::Box) fail("zones", "corridor zone must be a box");
      pairs([&](int i, int j) { return b.always(b.separated(i, j, agent_radius)); });
      for (int i = 0; i < agents; ++i) b.avoid_everything(g, i);
      std::vector<Formula> in_corridor;
      for (int i = 0; i < agents; ++i) in_corridor.push_back(b.in_zone(i, corridor));
      for (int i = 0; i < agents; ++i) b.add(b.eventually(in_corridor[i]));
      for (int i = 0; i < agents; ++i) b.add(b.eventually(b.x_at_least(i, corridor.center.x())));
      pairs([&](int i, int j) {
        return b.always(Formula::negation(Formula::conjunction({in_corridor[i], in_corridor[j]})));
      });
      break;
    }
  }
  return b.finish();
}

Scenario scenario_from_json(const json& doc) {
  if (!doc.is_object()) fail("", "scenario must be a table");
  for (const auto& [key, _] : doc.items()) {
    if (!kTopLevelKeys.contains(key) && !kTuningKeys.contains(key)) fail(key, "unknown field");
  }
  Scenario s;
  s.name = get_string(doc, "name", "");
  std::string task = get_string(doc, "task", "", std::string("custom"));
  auto kind = task_kind_from_string(task);
  if (!kind) fail("task", "unknown task kind '" + task + "'");
  s.task = *kind;
  s.horizon = get_int(doc, "horizon", "");
  if (s.horizon < 1) fail("horizon", "must be >= 1");
  s.delta = get_int(doc, "delta", "", 5);
  s.agent_radius = get_number(doc, "agent_radius", "", 0.15);
  if (!(s.agent_radius > 0.0)) fail("agent_radius", "must be > 0");

  std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> starts;
  for_each_entry(doc, "agents", [&](const json& a, const std::string& path) {
    only_keys(a, path, {"position", "velocity"});
    starts.emplace_back(get_vec2(a, "position", path), get_vec2(a, "velocity", path, Eigen::Vector2d::Zero()));
  });
  if (starts.empty()) fail("agents", "at least one agent is required");
  const int m = static_cast<int>(starts.size());

  const json empty = json::object();
  const json* dyn = find(doc, "dynamics");
  if (dyn && !dyn->is_object()) fail("dynamics", "expected a table");
  const json& d = dyn ? *dyn : empty;
  only_keys(d, "dynamics.", {"kind", "dt", "u_min", "u_max"});
  std::string dkind = get_string(d, "kind", "dynamics.",
                                 std::string(m == 1 ? "double_integrator_2d" : "multi_agent_double_integrator"));
  auto dk = dynamics_kind_from_string(dkind);
  if (!dk) fail("dynamics.kind", "unknown dynamics kind '" + dkind + "'");
  s.dynamics.kind = *dk;
  s.dynamics.agents = m;
  s.dynamics.dt = get_number(d, "dt", "dynamics.", 0.1);
  s.dynamics.u_min = get_bounds(d, "u_min", "dynamics.", 2 * m, -2.0);
  s.dynamics.u_max = get_bounds(d, "u_max", "dynamics.", 2 * m, 2.0);
  try {
    check_dynamics(s.dynamics);
  } catch (const std::invalid_argument& e) {
    fail("dynamics", e.what());
  }
  s.x0 = Eigen::VectorXd::Zero(s.dynamics.state_dim());
  for (int i = 0; i < m; ++i) {
    s.x0.segment<2>(position_offset(i)) = starts[i].first;
    s.x0.segment<2>(position_offset(i) + 2) = starts[i].second;
  }

  for_each_entry(doc, "obstacles", [&](const json& o, const std::string& path) {
    only_keys(o, path, {"center", "radius"});
    CircleObstacle obs{get_vec2(o, "center", path), get_number(o, "radius", path)};
    if (!(obs.radius > 0.0)) fail(path + "radius", "must be > 0");
    s.geometry.obstacles.push_back(obs);
  });
  for_each_entry(doc, "zones", [&](const json& z, const std::string& path) {
    s.geometry.zones.push_back(zone_from_json(z, path));
    if (s.geometry.zones.back().agent >= m) fail(path + "agent", "agent index out of range");
  });
  for_each_entry(doc, "walls", [&](const json& w, const std::string& path) {
    only_keys(w, path, {"center", "half_extents"});
    Wall wall{get_vec2(w, "center", path), get_vec2(w, "half_extents", path)};
    if (!(wall.half_extents.array() > 0.0).all()) fail(path + "half_extents", "must be > 0");
    s.geometry.walls.push_back(wall);
  });

  if (const json* sm = find(doc, "smoothing")) {
    if (!sm->is_object()) fail("smoothing", "expected a table");
    only_keys(*sm, "smoothing.", {"beta", "top_sentinel"});
    s.smoothing.beta = get_number(*sm, "beta", "smoothing.", 10.0);
    s.smoothing.top_sentinel = get_number(*sm, "top_sentinel", "smoothing.", 1e6);
    if (!(s.smoothing.beta > 0.0)) fail("smoothing.beta", "must be > 0");
  }
  for (const auto& key : kTuningKeys) {
    if (const json* t = find(doc, key)) {
      if (!t->is_object()) fail(key, "expected a table");
      s.tuning[key] = *t;
    }
  }

  if (const json* text = find(doc, "formula")) {
    if (!text->is_string()) fail("formula", "expected a string");
    try {
      s.formula = parse_formula(text->get<std::string>());
    } catch (const ParseError& e) {
      fail("formula", e.what());
    }
    for_each_entry(doc, "predicates", [&](const json& p, const std::string& path) {
      PredicateDef def = predicate_from_json(p, path);
      if (s.bindings.contains(def.name)) fail(path + "name", "duplicate predicate '" + def.name + "'");
      s.bindings.emplace(def.name, std::move(def));
    });
  } else {
    if (find(doc, "predicates")) fail("predicates", "explicit predicates require an explicit formula");
    TaskFormula tf = build_formula(s.task, s.geometry, m, s.horizon, s.delta, s.agent_radius);
    s.formula = std::move(tf.formula);
    s.bindings = std::move(tf.bindings);
  }

  for (const auto& [name, p] : s.bindings) {
    try {
      check_predicate(p, m);
    } catch (const std::invalid_argument& e) {
      fail("predicates", e.what());
    }
  }
  auto diags = validate(s.formula, binding_names(s.bindings), s.horizon);
  if (!diags.empty()) {
    std::string msg;
    for (const auto& dg : diags) msg += (msg.empty() ? "" : "; ") + dg.message;
    fail("formula", msg);
  }
  return s;
}

json scenario_to_json(const Scenario& s) {
  json doc;
  doc["name"] = s.name;
  doc["task"] = std::string(to_string(s.task));
  doc["horizon"] = s.horizon;
  doc["delta"] = s.delta;
  doc["agent_radius"] = s.agent_radius;
  doc["formula"] = pretty_print(s.formula);
  doc["dynamics"] = {{"kind", std::string(to_string(s.dynamics.kind))},
                     {"dt", s.dynamics.dt},
                     {"u_min", to_json(s.dynamics.u_min)},
                     {"u_max", to_json(s.dynamics.u_max)}};
  doc["smoothing"] = {{"beta", s.smoothing.beta}, {"top_sentinel", s.smoothing.top_sentinel}};
  json agents = json::array();
  for (int i = 0; i < s.dynamics.agents; ++i) {
    agents.push_back({{"position", to_json(Eigen::Vector2d(s.x0.segment<2>(position_offset(i))))},
                      {"velocity", to_json(Eigen::Vector2d(s.x0.segment<2>(position_offset(i) + 2)))}});
  }
  doc["agents"] = agents;
  json obstacles = json::array();
  for (const auto& o : s.geometry.obstacles) obstacles.push_back({{"center", to_json(o.center)}, {"radius", o.radius}});
  if (!obstacles.empty()) doc["obstacles"] = obstacles;
  json zones = json::array();
  for (const auto& z : s.geometry.zones) zones.push_back(zone_to_json(z));
  if (!zones.empty()) doc["zones"] = zones;
  json walls = json::array();
  for (const auto& w : s.geometry.walls) {
    walls.push_back({{"center", to_json(w.center)}, {"half_extents", to_json(w.half_extents)}});
  }
  if (!walls.empty()) doc["walls"] = walls;
  json preds = json::array();
  for (const auto& [name, p] : s.bindings) preds.push_back(predicate_to_json(p));
  doc["predicates"] = preds;
  for (const auto& [key, value] : s.tuning.items()) doc[key] = value;
  return doc;
}

Scenario load_scenario(const std::string& path) {
  json doc;
  try {
    doc = toml::parse_file(path);
  } catch (const toml::Error& e) {
    throw ScenarioError(e.what());
  } catch (const std::runtime_error& e) {
    throw ScenarioError(e.what());
  }
  try {
    return scenario_from_json(doc);
  } catch (const ScenarioError& e) {
    throw ScenarioError(path + ": " + e.what());
  }
}

std::string scenario_to_toml(const Scenario& s) { return toml::dump(scenario_to_json(s)); }

std::vector<std::string> builtin_scenario_names() {
  std::vector<std::string> names;
  for (const auto& e : kBuiltinScenarios) names.emplace_back(e.name);
  return names;
}

std::string builtin_scenario_source(const std::string& name) {
  for (const auto& e : kBuiltinScenarios) {
    if (name == e.name) return e.source;
  }
  throw ScenarioError("unknown built-in scenario '" + name + "'");
}

Scenario load_builtin_scenario(const std::string& name) {
  try {
    return scenario_from_json(toml::parse(builtin_scenario_source(name)));
  } catch (const toml::Error& e) {
    throw ScenarioError("built-in " + name + ": " + e.what());
  } catch (const ScenarioError& e) {
    throw ScenarioError("built-in " + name + ": " + e.what());
  }
}

Scenario resolve_scenario(const std::string& name_or_path) {
  for (const auto& e : kBuiltinScenarios) {
    if (name_or_path == e.name) return load_builtin_scenario(name_or_path);
  }
  if (std::filesystem::exists(name_or_path)) return load_scenario(name_or_path);
  throw ScenarioError("'" + name_or_path + "' is neither a built-in scenario nor a readable file");
}

std::vector<Formula> top_level_conjuncts(const Formula& f) {
  if (f.op() == Op::And) return {f.children().begin(), f.children().end()};
  return {f};
}

CheckReport check_trajectory(const Scenario& s, const Trace& trace) {
  if (trace.length() != s.horizon + 1) {
    throw ScenarioError("trace has " + std::to_string(trace.length()) + " states, scenario '" + s.name + "' needs " +
                        std::to_string(s.horizon + 1));
  }
  if (trace.dim() != s.dynamics.state_dim()) {
    throw ScenarioError("trace state dimension " + std::to_string(trace.dim()) + " does not match " +
                        std::to_string(s.dynamics.state_dim()));
  }
  check_trace(trace);
  CheckReport report;
  report.robustness = CompiledFormula(s.formula, s.bindings).hard(trace, 0, s.smoothing.top_sentinel);
  for (const auto& c : top_level_conjuncts(s.formula)) {
    report.conjuncts.push_back(
        {pretty_print(c), CompiledFormula(c, s.bindings).hard(trace, 0, s.smoothing.top_sentinel)});
  }
  return report;
}

CheckReport check_trajectory(const Scenario& s, const std::string& trace_csv_path) {
  return check_trajectory(s, read_trace_csv(trace_csv_path, s.dynamics.dt));
}

std::vector<std::string> audit_geometry(const Scenario& s) {
  struct ConjunctInfo {
    Op root;
    std::vector<const PredicateDef*> preds;
  };
  std::vector<ConjunctInfo> info;
  for (const auto& c : top_level_conjuncts(s.formula)) {
    ConjunctInfo ci{c.op(), {}};
    for (const auto& name : predicate_names(c)) {
      if (auto it = s.bindings.find(name); it != s.bindings.end()) ci.preds.push_back(&it->second);
    }
    info.push_back(std::move(ci));
  }
  auto count = [&](Op root, auto&& matches) {
    int n = 0;
    for (const auto& ci : info) {
      if (ci.root != root) continue;
      if (std::any_of(ci.preds.begin(), ci.preds.end(), [&](const PredicateDef* p) { return matches(*p); })) ++n;
    }
    return n;
  };
  std::vector<std::string> issues;
  const int m = s.dynamics.agents;
  auto expect_one = [&](int n, const std::string& what) {
    if (n != 1) issues.push_back(what + " appears in " + std::to_string(n) + " conjuncts (expected 1)");
  };
  for (std::size_t o = 0; o < s.geometry.obstacles.size(); ++o) {
    const auto& obs = s.geometry.obstacles[o];
    for (int i = 0; i < m; ++i) {
      int n = count(Op::Always, [&](const PredicateDef& p) {
        return p.kind == PredicateKind::CircleAvoid && p.agents == std::vector<int>{i} && p.center == obs.center &&
               p.radius == obs.radius;
      });
      expect_one(n, "obstacle " + std::to_string(o) + " for agent " + std::to_string(i));
    }
  }
  for (std::size_t w = 0; w < s.geometry.walls.size(); ++w) {
    const auto& wall = s.geometry.walls[w];
    for (int i = 0; i < m; ++i) {
      int n = count(Op::Always, [&](const PredicateDef& p) {
        return p.kind == PredicateKind::BoxIn && p.agents == std::vector<int>{i} && p.center == wall.center &&
               p.half_extents == wall.half_extents;
      });
      expect_one(n, "wall " + std::to_string(w) + " for agent " + std::to_string(i));
    }
  }
  for (const auto& z : s.geometry.zones) {
    if (z.role != "goal" && z.role != "corridor") continue;
    for (int i = 0; i < m; ++i) {
      if (z.agent >= 0 && z.agent != i) continue;
      int n = count(Op::Eventually, [&](const PredicateDef& p) {
        if (p.agents != std::vector<int>{i} || p.center != z.center) return false;
        if (z.shape == ZoneShape::Circle) return p.kind == PredicateKind::CircleIn && p.radius == z.radius;
        return p.kind == PredicateKind::BoxIn && p.half_extents == z.half_extents;
      });
      expect_one(n, "zone '" + z.name + "' for agent " + std::to_string(i));
    }
  }
  return issues;
}

std::string trace_to_csv(const Trace& trace) {
  std::string out = "t";
  for (int j = 0; j < trace.dim(); ++j) out += ",x" + std::to_string(j);
  out += '\n';
  char buf[40];
  for (int t = 0; t < trace.length(); ++t) {
    out += std::to_string(t);
    for (int j = 0; j < trace.dim(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", trace.states(t, j));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_trace_csv(const std::string& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << trace_to_csv(trace);
}

Trace trace_from_csv(std::string_view text, double dt) {
  std::vector<std::vector<double>> rows;
  std::size_t columns = 0;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (line_no == 1) {
      if (cells.size() < 2 || cells[0] != "t") throw std::runtime_error("trace csv: header must start with 't'");
      for (std::size_t j = 1; j < cells.size(); ++j) {
        if (cells[j] != "x" + std::to_string(j - 1)) {
          throw std::runtime_error("trace csv: header column " + std::to_string(j) + " should be x" +
                                   std::to_string(j - 1));
        }
      }
      columns = cells.size();
      continue;
    }
    if (cells.size() != columns) {
      throw std::runtime_error("trace csv line " + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                               " columns, found " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cells[j].data(), cells[j].data() + cells[j].size(), v);
      if (ec != std::errc() || ptr != cells[j].data() + cells[j].size()) {
        throw std::runtime_error("trace csv line " + std::to_string(line_no) + ": malformed number '" +
                                 std::string(cells[j]) + "'");
      }
      row.push_back(v);
    }
    if (row[0] != static_cast<double>(rows.size())) {
      throw std::runtime_error("trace csv line " + std::to_string(line_no) + ": steps must count up from 0");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("trace csv: no states");
  Trace trace;
  trace.dt = dt;
  trace.states.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(columns - 1));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t j = 1; j < columns; ++j) trace.states(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j - 1)) = rows[t][j];
  }
  return trace;
}

Trace read_trace_csv(const std::string& path, double dt) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return trace_from_csv(ss.str(), dt);
}

}  // namespace stlplan
