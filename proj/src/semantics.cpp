#include "stlplan/semantics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace stlplan {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool is_temporal(Op op) { return op == Op::Until || op == Op::Eventually || op == Op::Always; }

// Running log-sum-exp accumulator.
struct LogSum {
  double m = kNegInf;
  double s = 0.0;

  void add(double y) {
    if (y == kNegInf) return;
    if (y > m) {
      s = s * std::exp(m - y) + 1.0;
      m = y;
    } else {
      s += std::exp(y - m);
    }
  }
  double value() const { return m == kNegInf ? kNegInf : m + std::log(s); }
};

// Soft max (sign = +1) or soft min (sign = -1) of v; fills normalized weights when requested.
double soft_extreme(std::span<const double> v, double beta, double sign, double* weights = nullptr) {
  double m = sign * v[0];
  for (double x : v) m = std::max(m, sign * x);
  double sum = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    double e = std::exp(beta * (sign * v[k] - m));
    if (weights) weights[k] = e;
    sum += e;
  }
  if (weights) {
    for (std::size_t k = 0; k < v.size(); ++k) weights[k] /= sum;
  }
  return sign * (m + std::log(sum) / beta);
}

double hard_extreme(std::span<const double> v, double sign) {
  double m = v[0];
  for (double x : v) m = sign > 0 ? std::max(m, x) : std::min(m, x);
  return m;
}

Eigen::Map<const Eigen::VectorXd> state_at(const Trace& trace, int t) {
  return Eigen::Map<const Eigen::VectorXd>(trace.states.row(t).data(), trace.dim());
}

}  // namespace

double softmax(std::span<const double> v, double beta) {
  if (v.empty()) throw std::invalid_argument("softmax of empty set");
  return soft_extreme(v, beta, 1.0);
}

double softmin(std::span<const double> v, double beta) {
  if (v.empty()) throw std::invalid_argument("softmin of empty set");
  return soft_extreme(v, beta, -1.0);
}

void check_trace(const Trace& trace) {
  if (trace.states.rows() < 1 || trace.states.cols() < 1) throw std::invalid_argument("trace is empty");
  if (!trace.states.allFinite()) throw std::invalid_argument("trace contains non-finite entries");
}

struct CompiledFormula::Workspace {
  std::vector<int> need;
  std::vector<std::vector<double>> value;
  std::vector<std::vector<double>> adjoint;
  std::vector<double> scratch;
  std::vector<double> weights;
  std::vector<double> logs;
};

CompiledFormula::CompiledFormula(Formula formula, const PredicateBindings& bindings)
    : formula_(std::move(formula)) {
  std::unordered_map<const void*, int> index;
  std::unordered_map<std::string, int> pred_index;

  auto visit = [&](auto&& self, const Formula& f) -> int {
    if (auto it = index.find(f.id()); it != index.end()) return it->second;
    Node node{f.op(), f.interval(), {}, -1, f};
    for (const auto& c : f.children()) node.kids.push_back(self(self, c));
    if (f.op() == Op::Pred) {
      auto b = bindings.find(f.name());
      if (b == bindings.end()) throw std::invalid_argument("unbound predicate '" + f.name() + "'");
      auto [pit, inserted] = pred_index.try_emplace(f.name(), static_cast<int>(preds_.size()));
      if (inserted) preds_.push_back(b->second);
      node.pred = pit->second;
    }
    nodes_.push_back(std::move(node));
    int id = static_cast<int>(nodes_.size()) - 1;
    index.emplace(f.id(), id);
    return id;
  };
  visit(visit, formula_);
}

std::vector<int> CompiledFormula::needed_until(int horizon, int t) const {
  if (t < 0 || t > horizon) {
    throw EvaluationError("start step " + std::to_string(t) + " outside [0," + std::to_string(horizon) + "]");
  }
  std::vector<int> need(nodes_.size(), -1);
  need.back() = t;
  for (int k = static_cast<int>(nodes_.size()) - 1; k >= 0; --k) {
    const Node& n = nodes_[k];
    if (need[k] < 0) continue;
    int child_need = need[k];
    if (is_temporal(n.op)) {
      if (need[k] + n.interval.lo > horizon) {
        throw EvaluationError("empty evaluation window for '" + pretty_print(n.source) + "' at step " +
                              std::to_string(need[k]) + " (horizon " + std::to_string(horizon) + ")");
      }
      child_need = std::min(need[k] + n.interval.hi, horizon);
    }
    for (int c : n.kids) need[c] = std::max(need[c], child_need);
  }
  return need;
}

void CompiledFormula::forward(const Trace& trace, int t0, bool smooth, const SmoothingConfig& cfg,
                              Workspace& ws) const {
  const int H = trace.horizon();
  const double beta = cfg.beta;
  ws.need = needed_until(H, t0);
  ws.value.assign(nodes_.size(), {});
  auto& buf = ws.scratch;

  auto extreme = [&](std::span<const double> v, double sign) {
    return smooth ? soft_extreme(v, beta, sign) : hard_extreme(v, sign);
  };

  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const Node& n = nodes_[k];
    const int last = ws.need[k];
    if (last < 0) continue;
    auto& out = ws.value[k];
    out.resize(last + 1);
    const Interval iv = n.interval;

    for (int t = 0; t <= last; ++t) {
      double v = 0.0;
      switch (n.op) {
        case Op::True: v = cfg.top_sentinel; break;
        case Op::Pred: {
          const PredicateDef& p = preds_[n.pred];
          v = smooth ? predicate_value_smooth(p, state_at(trace, t), beta) : predicate_value(p, state_at(trace, t));
          break;
        }
        case Op::Not: v = -ws.value[n.kids[0]][t]; break;
        case Op::And:
        case Op::Or:
          buf.clear();
          for (int c : n.kids) buf.push_back(ws.value[c][t]);
          v = extreme(buf, n.op == Op::Or ? 1.0 : -1.0);
          break;
        case Op::Implies:
          buf.assign({-ws.value[n.kids[0]][t], ws.value[n.kids[1]][t]});
          v = extreme(buf, 1.0);
          break;
        case Op::Eventually:
        case Op::Always: {
          const auto& c = ws.value[n.kids[0]];
          const int b = t + iv.lo;
          const int e = std::min(t + iv.hi, H);
          v = extreme(std::span<const double>(c.data() + b, e - b + 1), n.op == Op::Eventually ? 1.0 : -1.0);
          break;
        }
        case Op::Until: {
          const auto& lhs = ws.value[n.kids[0]];
          const auto& rhs = ws.value[n.kids[1]];
          const int b = t + iv.lo;
          const int e = std::min(t + iv.hi, H);
          if (!smooth) {
            double running = std::numeric_limits<double>::infinity();
            double best = kNegInf;
            for (int tp = t; tp <= e; ++tp) {
              running = std::min(running, lhs[tp]);
              if (tp >= b) best = std::max(best, std::min(rhs[tp], running));
            }
            v = best;
          } else {
            buf.clear();
            LogSum prefix;
            for (int tp = t; tp <= e; ++tp) {
              prefix.add(-beta * lhs[tp]);
              if (tp >= b) {
                LogSum total = prefix;
                total.add(-beta * rhs[tp]);
                buf.push_back(-total.value() / beta);
              }
            }
            v = soft_extreme(buf, beta, 1.0);
          }
          break;
        }
      }
      out[t] = v;
    }
    for (double v : out) {
      if (!std::isfinite(v)) {
        throw EvaluationError("non-finite robustness in subformula '" + pretty_print(n.source) + "'");
      }
    }
  }
}

void CompiledFormula::backward(const Trace& trace, const SmoothingConfig& cfg, Workspace& ws,
                               StateMatrix& grad) const {
  const int H = trace.horizon();
  const double beta = cfg.beta;
  ws.adjoint.assign(nodes_.size(), {});
  for (std::size_t k = 0; k < nodes_.size(); ++k) ws.adjoint[k].assign(ws.value[k].size(), 0.0);
  ws.adjoint.back()[ws.need.back()] = 1.0;
  auto& buf = ws.scratch;
  auto& w = ws.weights;

  for (int k = static_cast<int>(nodes_.size()) - 1; k >= 0; --k) {
    const Node& n = nodes_[k];
    if (ws.need[k] < 0) continue;
    const Interval iv = n.interval;
    const auto& adj = ws.adjoint[k];

    for (int t = 0; t <= ws.need[k]; ++t) {
      const double a = adj[t];
      if (a == 0.0) continue;
      switch (n.op) {
        case Op::True: break;
        case Op::Pred: {
          Eigen::Map<Eigen::VectorXd> row(grad.row(t).data(), grad.cols());
          accumulate_predicate_grad_smooth(preds_[n.pred], state_at(trace, t), beta, a, row);
          break;
        }
        case Op::Not: ws.adjoint[n.kids[0]][t] -= a; break;
        case Op::And:
        case Op::Or: {
          buf.clear();
          for (int c : n.kids) buf.push_back(ws.value[c][t]);
          w.resize(buf.size());
          soft_extreme(buf, beta, n.op == Op::Or ? 1.0 : -1.0, w.data());
          for (std::size_t i = 0; i < n.kids.size(); ++i) ws.adjoint[n.kids[i]][t] += a * w[i];
          break;
        }
        case Op::Implies: {
          buf.assign({-ws.value[n.kids[0]][t], ws.value[n.kids[1]][t]});
          w.resize(2);
          soft_extreme(buf, beta, 1.0, w.data());
          ws.adjoint[n.kids[0]][t] -= a * w[0];
          ws.adjoint[n.kids[1]][t] += a * w[1];
          break;
        }
        case Op::Eventually:
        case Op::Always: {
          const auto& c = ws.value[n.kids[0]];
          auto& cadj = ws.adjoint[n.kids[0]];
          const int b = t + iv.lo;
          const int e = std::min(t + iv.hi, H);
          w.resize(e - b + 1);
          soft_extreme(std::span<const double>(c.data() + b, e - b + 1), beta, n.op == Op::Eventually ? 1.0 : -1.0,
                       w.data());
          for (int tp = b; tp <= e; ++tp) cadj[tp] += a * w[tp - b];
          break;
        }
        case Op::Until: {
          const auto& lhs = ws.value[n.kids[0]];
          const auto& rhs = ws.value[n.kids[1]];
          auto& lhs_adj = ws.adjoint[n.kids[0]];
          auto& rhs_adj = ws.adjoint[n.kids[1]];
          const int b = t + iv.lo;
          const int e = std::min(t + iv.hi, H);
          // Recompute the inner softmin totals L(t') = log sum exp(-beta * {rhs(t'), lhs(t..t')}).
          auto& logs = ws.logs;
          buf.clear();
          logs.clear();
          LogSum prefix;
          for (int tp = t; tp <= e; ++tp) {
            prefix.add(-beta * lhs[tp]);
            if (tp >= b) {
              LogSum total = prefix;
              total.add(-beta * rhs[tp]);
              logs.push_back(total.value());
              buf.push_back(-logs.back() / beta);
            }
          }
          w.resize(buf.size());
          soft_extreme(buf, beta, 1.0, w.data());
          for (int tp = b; tp <= e; ++tp) {
            const int i = tp - b;
            rhs_adj[tp] += a * w[i] * std::exp(-beta * rhs[tp] - logs[i]);
          }
          // lhs(t'') feeds every inner min with t' >= t''; accumulate the suffix in log space.
          LogSum suffix;
          for (int tpp = e; tpp >= t; --tpp) {
            if (tpp >= b) {
              const int i = tpp - b;
              suffix.add(w[i] > 0.0 ? std::log(w[i]) - logs[i] : kNegInf);
            }
            const double q = suffix.value();
            if (q != kNegInf) lhs_adj[tpp] += a * std::exp(-beta * lhs[tpp] + q);
          }
          break;
        }
      }
    }
  }
}

double CompiledFormula::hard(const Trace& trace, int t, double top_sentinel) const {
  Workspace ws;
  SmoothingConfig cfg;
  cfg.top_sentinel = top_sentinel;
  forward(trace, t, false, cfg, ws);
  return ws.value.back()[t];
}

double CompiledFormula::smooth_value(const Trace& trace, const SmoothingConfig& cfg, int t) const {
  if (!(cfg.beta > 0.0)) throw std::invalid_argument("smoothing beta must be > 0");
  Workspace ws;
  forward(trace, t, true, cfg, ws);
  return ws.value.back()[t];
}

RobustnessResult CompiledFormula::smooth(const Trace& trace, const SmoothingConfig& cfg, int t) const {
  if (!(cfg.beta > 0.0)) throw std::invalid_argument("smoothing beta must be > 0");
  Workspace ws;
  forward(trace, t, true, cfg, ws);
  RobustnessResult r;
  r.value = ws.value.back()[t];
  r.per_state_grad = StateMatrix::Zero(trace.length(), trace.dim());
  backward(trace, cfg, ws, r.per_state_grad);
  if (!r.per_state_grad.allFinite()) {
    throw EvaluationError("non-finite robustness gradient for '" + pretty_print(formula_) + "'");
  }
  return r;
}

CompiledFormula::SmoothingShape CompiledFormula::smoothing_shape() const {
  std::vector<int> depth(nodes_.size(), 0);
  SmoothingShape shape;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const Node& n = nodes_[k];
    int inner = 0;
    for (int c : n.kids) inner = std::max(inner, depth[c]);
    const int width = n.interval.hi - n.interval.lo + 1;
    switch (n.op) {
      case Op::True: depth[k] = 0; break;
      case Op::Pred:
        depth[k] = preds_[n.pred].kind == PredicateKind::BoxIn ? 1 : 0;
        if (depth[k]) shape.max_fan_in = std::max(shape.max_fan_in, 2);
        break;
      case Op::Not: depth[k] = inner; break;
      case Op::And:
      case Op::Or:
      case Op::Implies:
        depth[k] = inner + 1;
        shape.max_fan_in = std::max(shape.max_fan_in, static_cast<int>(n.kids.size()));
        break;
      case Op::Eventually:
      case Op::Always:
        depth[k] = inner + 1;
        shape.max_fan_in = std::max(shape.max_fan_in, width);
        break;
      case Op::Until:
        depth[k] = inner + 2;
        shape.max_fan_in = std::max({shape.max_fan_in, width, n.interval.hi + 2});
        break;
    }
  }
  shape.depth = depth.back();
  return shape;
}

double robustness_hard(const Formula& f, const Trace& trace, int t, const PredicateBindings& bindings,
                       double top_sentinel) {
  return CompiledFormula(f, bindings).hard(trace, t, top_sentinel);
}

RobustnessResult robustness_smooth(const Formula& f, const Trace& trace, const SmoothingConfig& cfg,
                                   const PredicateBindings& bindings, int t) {
  return CompiledFormula(f, bindings).smooth(trace, cfg, t);
}

}  // namespace stlplan
