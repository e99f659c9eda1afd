#include "stlplan/baselines.hpp"

#include "stlplan/parallel.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

namespace stlplan {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

template <typename Fn>
void for_each_setting(const nlohmann::json& tuning, const char* table, const std::set<std::string>& known, Fn&& fn) {
  if (tuning.is_null()) return;
  if (!tuning.is_object()) throw std::invalid_argument(std::string(table) + " settings must be a table");
  for (const auto& [key, value] : tuning.items()) {
    if (!known.contains(key)) throw std::invalid_argument("unknown " + std::string(table) + " setting '" + key + "'");
    try {
      fn(key, value);
    } catch (const nlohmann::json::exception&) {
      throw std::invalid_argument(std::string(table) + " setting '" + key + "' has the wrong type");
    }
  }
}

void check_finite_row(const Eigen::RowVectorXd& u, int iteration) {
  if (!u.allFinite()) throw EvaluationError("non-finite update at iteration " + std::to_string(iteration));
}

IterationDiag single_diag(int iteration, double score) {
  IterationDiag d;
  d.iteration = iteration;
  d.best = d.mean = d.min = score;
  return d;
}

}  // namespace

// ---- gradient ascent --------------------------------------------------------

GdConfig gd_config(const nlohmann::json& tuning, GdConfig base) {
  for_each_setting(tuning, "gd", {"iterations", "epsilon", "lambda", "seed", "clamp_after_step"},
                   [&](const std::string& key, const nlohmann::json& v) {
                     if (key == "iterations") base.iterations = v.get<int>();
                     if (key == "epsilon") base.epsilon = v.get<double>();
                     if (key == "lambda") base.lambda = v.get<double>();
                     if (key == "seed") base.seed = v.get<std::uint64_t>();
                     if (key == "clamp_after_step") base.clamp_after_step = v.get<bool>();
                   });
  return base;
}

nlohmann::json to_json(const GdConfig& cfg) {
  return {{"iterations", cfg.iterations},
          {"epsilon", cfg.epsilon},
          {"lambda", cfg.lambda},
          {"clamp_after_step", cfg.clamp_after_step}};
}

RunResult run_gradient_ascent(const Scenario& scenario, const GdConfig& cfg) {
  if (cfg.iterations < 0) throw std::invalid_argument("gd: iterations must be >= 0");
  if (!(cfg.epsilon > 0.0) || !(cfg.lambda > 0.0)) throw std::invalid_argument("gd: epsilon and lambda must be > 0");
  const auto start = Clock::now();
  StlObjective objective(scenario);
  const ControlBox box = control_box(scenario.dynamics, scenario.horizon);
  Eigen::RowVectorXd u = sample_uniform(box, 1, cfg.seed).row(0);
  const double inv_lambda = 1.0 / cfg.lambda;

  RunResult r;
  for (int m = 0; m < cfg.iterations; ++m) {
    const auto iter_start = Clock::now();
    ObjectiveSample s = objective.evaluate({u.data(), static_cast<std::size_t>(u.size())}, true);
    IterationDiag diag = single_diag(m, s.score);
    u += cfg.epsilon * (inv_lambda * s.gradient);
    check_finite_row(u, m);
    if (cfg.clamp_after_step) u = u.cwiseMax(box.lower).cwiseMin(box.upper);
    diag.wall_ms = elapsed_ms(iter_start);
    r.diagnostics.push_back(diag);
  }
  r.scenario = scenario.name;
  r.method = "gd";
  r.seed = cfg.seed;
  r.config = to_json(cfg);
  r.controls = unflatten_controls({u.data(), static_cast<std::size_t>(u.size())}, scenario.horizon,
                                  scenario.dynamics.control_dim());
  r.trace = rollout(scenario.dynamics, scenario.x0, r.controls);
  r.robustness = objective.formula().hard(r.trace, 0, scenario.smoothing.top_sentinel);
  r.samples = 1;
  r.iterations = cfg.iterations;
  r.evaluations = cfg.iterations + 1;
  r.wall_ms = elapsed_ms(start);
  return r;
}

// ---- finite-difference transport -------------------------------------------

ControlSequence fd_gradient(const Scenario& scenario, const ControlSequence& u, double fd_step) {
  if (!(fd_step > 0.0)) throw std::invalid_argument("fd: step must be > 0");
  StlObjective objective(scenario);
  ControlSequence probe = u;
  ControlSequence g(u.rows(), u.cols());
  const std::span<const double> flat(probe.data(), static_cast<std::size_t>(probe.size()));
  for (Eigen::Index k = 0; k < probe.size(); ++k) {
    const double keep = probe.data()[k];
    probe.data()[k] = keep + fd_step;
    const double up = objective.hard(flat);
    probe.data()[k] = keep - fd_step;
    const double down = objective.hard(flat);
    probe.data()[k] = keep;
    g.data()[k] = (up - down) / (2.0 * fd_step);
  }
  return g;
}

FdObjective::FdObjective(const Scenario& scenario, FdConfig cfg) : inner_(scenario), cfg_(cfg) {
  if (!(cfg_.fd_step > 0.0)) throw std::invalid_argument("fd: step must be > 0");
}

ObjectiveSample FdObjective::evaluate(std::span<const double> u, bool with_gradient) const {
  ObjectiveSample s;
  s.score = inner_.hard(u);
  s.smooth = s.score;
  s.evaluations = 1;
  if (!with_gradient) return s;
  std::vector<double> probe(u.begin(), u.end());
  const std::span<const double> flat(probe);
  s.gradient.resize(static_cast<Eigen::Index>(probe.size()));
  for (std::size_t k = 0; k < probe.size(); ++k) {
    const double keep = probe[k];
    probe[k] = keep + cfg_.fd_step;
    const double up = inner_.hard(flat);
    probe[k] = keep - cfg_.fd_step;
    const double down = inner_.hard(flat);
    probe[k] = keep;
    s.gradient(static_cast<Eigen::Index>(k)) = (up - down) / (2.0 * cfg_.fd_step);
  }
  s.evaluations += 2 * static_cast<long>(probe.size());
  return s;
}

FdSvgdSettings fd_svgd_config(const nlohmann::json& tuning, FdSvgdSettings base) {
  if (tuning.is_null()) return base;
  if (!tuning.is_object()) throw std::invalid_argument("fd_svgd settings must be a table");
  nlohmann::json svgd = tuning;
  if (auto it = svgd.find("fd_step"); it != svgd.end()) {
    if (!it->is_number()) throw std::invalid_argument("fd_svgd setting 'fd_step' has the wrong type");
    base.fd.fd_step = it->get<double>();
    svgd.erase(it);
  }
  base.svgd = svpio_config(svgd, base.svgd);
  return base;
}

RunResult run_fd_svgd(const Scenario& scenario, const FdSvgdSettings& cfg) {
  check_config(cfg.svgd);
  FdObjective objective(scenario, cfg.fd);
  StlObjective selection(scenario);
  SvgdRun run = run_svgd(objective, control_box(scenario.dynamics, scenario.horizon), cfg.svgd);
  RunResult r = make_run_result(selection, run, "fd-svgd", cfg.svgd.seed);
  r.config = to_json(cfg.svgd);
  r.config["fd_step"] = cfg.fd.fd_step;
  return r;
}

// ---- MPPI -------------------------------------------------------------------

MppiConfig mppi_config(const nlohmann::json& tuning, MppiConfig base) {
  for_each_setting(tuning, "mppi", {"samples", "iterations", "lambda", "sigma", "seed", "workers"},
                   [&](const std::string& key, const nlohmann::json& v) {
                     if (key == "samples") base.samples = v.get<int>();
                     if (key == "iterations") base.iterations = v.get<int>();
                     if (key == "lambda") base.lambda = v.get<double>();
                     if (key == "seed") base.seed = v.get<std::uint64_t>();
                     if (key == "workers") base.workers = v.get<unsigned>();
                     if (key == "sigma") {
                       if (v.is_number()) {
                         base.sigma = Eigen::VectorXd::Constant(1, v.get<double>());
                       } else {
                         auto s = v.get<std::vector<double>>();
                         base.sigma = Eigen::Map<Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
                       }
                     }
                   });
  return base;
}

HeuristicCost heuristic_cost(const nlohmann::json& tuning, HeuristicCost base) {
  for_each_setting(tuning, "heuristic", {"obstacle_weight", "goal_weight", "terminal_weight"},
                   [&](const std::string& key, const nlohmann::json& v) {
                     if (key == "obstacle_weight") base.obstacle_weight = v.get<double>();
                     if (key == "goal_weight") base.goal_weight = v.get<double>();
                     if (key == "terminal_weight") base.terminal_weight = v.get<double>();
                   });
  if (!(base.obstacle_weight >= 0.0 && base.goal_weight >= 0.0 && base.terminal_weight >= 0.0)) {
    throw std::invalid_argument("heuristic weights must be >= 0");
  }
  return base;
}

nlohmann::json to_json(const MppiConfig& cfg, const HeuristicCost& cost) {
  std::vector<double> sigma(cfg.sigma.data(), cfg.sigma.data() + cfg.sigma.size());
  return {{"samples", cfg.samples},
          {"iterations", cfg.iterations},
          {"lambda", cfg.lambda},
          {"sigma", sigma},
          {"obstacle_weight", cost.obstacle_weight},
          {"goal_weight", cost.goal_weight},
          {"terminal_weight", cost.terminal_weight}};
}

Eigen::VectorXd mppi_weights(const Eigen::VectorXd& costs, double lambda) {
  if (costs.size() == 0) throw std::invalid_argument("mppi: no samples");
  if (!(lambda > 0.0)) throw std::invalid_argument("mppi: lambda must be > 0");
  const double lo = costs.minCoeff();
  Eigen::VectorXd w = (-(costs.array() - lo) / lambda).exp();
  return w / w.sum();
}

namespace {

const Zone& single_goal(const Scenario& s) {
  if (s.dynamics.agents != 1) throw ScenarioError("mppi heuristic costs need a single agent");
  const Zone* goal = nullptr;
  for (const auto& z : s.geometry.zones) {
    if (z.role != "goal") continue;
    if (goal) throw ScenarioError("mppi heuristic costs need exactly one goal zone");
    goal = &z;
  }
  if (!goal) throw ScenarioError("mppi heuristic costs need exactly one goal zone");
  return *goal;
}

}  // namespace

double heuristic_trajectory_cost(const Scenario& scenario, const HeuristicCost& cost, const Trace& trace) {
  const Eigen::Vector2d goal = single_goal(scenario).center;
  double total = 0.0;
  for (int t = 0; t < trace.length(); ++t) {
    const Eigen::Vector2d p(trace.states(t, 0), trace.states(t, 1));
    double penetration = 0.0;
    for (const auto& o : scenario.geometry.obstacles) penetration += std::max(0.0, o.radius - (p - o.center).norm());
    total += cost.obstacle_weight * penetration + cost.goal_weight * (p - goal).norm();
  }
  const Eigen::Vector2d last(trace.states(trace.length() - 1, 0), trace.states(trace.length() - 1, 1));
  return total + cost.terminal_weight * (last - goal).norm();
}

RunResult run_mppi(const Scenario& scenario, const MppiConfig& cfg_in, const HeuristicCost& cost) {
  single_goal(scenario);
  MppiConfig cfg = cfg_in;
  const DynamicsSpec& dyn = scenario.dynamics;
  const int c = dyn.control_dim();
  if (cfg.samples < 1) throw std::invalid_argument("mppi: sample count must be >= 1");
  if (cfg.iterations < 0) throw std::invalid_argument("mppi: iterations must be >= 0");
  if (!(cfg.lambda > 0.0)) throw std::invalid_argument("mppi: lambda must be > 0");
  if (cfg.sigma.size() == 0) cfg.sigma = 0.25 * (dyn.u_max - dyn.u_min);
  if (cfg.sigma.size() == 1 && c > 1) cfg.sigma = Eigen::VectorXd::Constant(c, cfg.sigma(0));
  if (cfg.sigma.size() != c) throw std::invalid_argument("mppi: sigma needs one entry per control dimension");
  if (!(cfg.sigma.array() > 0.0).all()) throw std::invalid_argument("mppi: sigma entries must be > 0");

  const auto start = Clock::now();
  StlObjective objective(scenario);
  const int H = scenario.horizon;
  ControlSequence nominal = ControlSequence::Zero(H, c);
  clamp_controls(dyn, nominal);

  RunResult r;
  std::vector<ControlSequence> candidates(static_cast<std::size_t>(cfg.samples));
  Eigen::VectorXd costs(cfg.samples);
  Eigen::VectorXd scores(cfg.samples);
  for (int it = 0; it < cfg.iterations; ++it) {
    const auto iter_start = Clock::now();
    parallel_for(static_cast<std::size_t>(cfg.samples), cfg.workers, [&](std::size_t k) {
      std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                        static_cast<std::uint32_t>(it), static_cast<std::uint32_t>(k)};
      std::mt19937_64 rng(seq);
      std::normal_distribution<double> normal(0.0, 1.0);
      ControlSequence u = nominal;
      for (int t = 0; t < H; ++t) {
        for (int d = 0; d < c; ++d) u(t, d) += cfg.sigma(d) * normal(rng);
      }
      clamp_controls(dyn, u);
      Trace trace = rollout(dyn, scenario.x0, u);
      const auto slot = static_cast<Eigen::Index>(k);
      costs(slot) = heuristic_trajectory_cost(scenario, cost, trace);
      scores(slot) = objective.formula().hard(trace, 0, scenario.smoothing.top_sentinel);
      candidates[k] = std::move(u);
    });
    const Eigen::VectorXd w = mppi_weights(costs, cfg.lambda);
    ControlSequence update = ControlSequence::Zero(H, c);
    for (int k = 0; k < cfg.samples; ++k) update += w(k) * (candidates[static_cast<std::size_t>(k)] - nominal);
    nominal += update;
    clamp_controls(dyn, nominal);
    if (!nominal.allFinite()) throw EvaluationError("mppi: non-finite nominal at iteration " + std::to_string(it));

    IterationDiag diag;
    diag.iteration = it;
    diag.best = scores.maxCoeff();
    diag.mean = scores.mean();
    diag.min = scores.minCoeff();
    diag.wall_ms = elapsed_ms(iter_start);
    r.diagnostics.push_back(diag);
  }
  r.scenario = scenario.name;
  r.method = "mppi";
  r.seed = cfg.seed;
  r.config = to_json(cfg, cost);
  r.controls = nominal;
  r.trace = rollout(dyn, scenario.x0, nominal);
  r.robustness = objective.formula().hard(r.trace, 0, scenario.smoothing.top_sentinel);
  r.samples = cfg.samples;
  r.iterations = cfg.iterations;
  r.evaluations = static_cast<long>(cfg.samples) * cfg.iterations + 1;
  r.wall_ms = elapsed_ms(start);
  return r;
}

}  // namespace stlplan
