#pragma once

#include "stlplan/formula.hpp"
#include "stlplan/predicates.hpp"

#include <Eigen/Core>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stlplan {

using StateMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Signal x_{0:H}: row t holds the joint state at step t.
struct Trace {
  StateMatrix states;
  double dt = 0.1;

  int horizon() const { return static_cast<int>(states.rows()) - 1; }
  int length() const { return static_cast<int>(states.rows()); }
  int dim() const { return static_cast<int>(states.cols()); }
};

/// Throws std::invalid_argument on empty or non-finite traces.
void check_trace(const Trace& trace);

struct SmoothingConfig {
  double beta = 10.0;
  double top_sentinel = 1e6;
};

struct RobustnessResult {
  double value = 0.0;
  StateMatrix per_state_grad;
};

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// LogSumExp approximations with the max-shift.
double softmax(std::span<const double> v, double beta);
double softmin(std::span<const double> v, double beta);

/// Formula flattened against a set of predicate bindings, evaluated many times.
/// Immutable after construction; evaluation allocates its own scratch space.
class CompiledFormula {
 public:
  /// Throws std::invalid_argument if a predicate name is unbound.
  CompiledFormula(Formula formula, const PredicateBindings& bindings);

  const Formula& formula() const { return formula_; }

  /// Hard (min/max) robustness at start step t.
  double hard(const Trace& trace, int t = 0, double top_sentinel = 1e6) const;

  /// Smooth robustness and d rho / d x_t for every step.
  RobustnessResult smooth(const Trace& trace, const SmoothingConfig& cfg, int t = 0) const;

  /// Smooth value without the reverse pass.
  double smooth_value(const Trace& trace, const SmoothingConfig& cfg, int t = 0) const;

  /// Soft-operator layers on the deepest path and the widest soft operator.
  /// |smooth - hard| <= depth * log(fan_in) / beta.
  struct SmoothingShape {
    int depth = 0;
    int max_fan_in = 1;
  };
  SmoothingShape smoothing_shape() const;

 private:
  struct Node {
    Op op;
    Interval interval;
    std::vector<int> kids;
    int pred = -1;
    Formula source;
  };

  struct Workspace;

  std::vector<int> needed_until(int horizon, int t) const;
  void forward(const Trace& trace, int t, bool smooth, const SmoothingConfig& cfg, Workspace& ws) const;
  void backward(const Trace& trace, const SmoothingConfig& cfg, Workspace& ws, StateMatrix& grad) const;

  Formula formula_;
  std::vector<Node> nodes_;  // post-order; root is last
  std::vector<PredicateDef> preds_;
};

double robustness_hard(const Formula& f, const Trace& trace, int t, const PredicateBindings& bindings,
                       double top_sentinel = 1e6);

RobustnessResult robustness_smooth(const Formula& f, const Trace& trace, const SmoothingConfig& cfg,
                                   const PredicateBindings& bindings, int t = 0);

}  // namespace stlplan
