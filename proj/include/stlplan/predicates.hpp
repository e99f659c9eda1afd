#pragma once

#include <Eigen/Core>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace stlplan {

/// Joint state layout: agent i occupies [4i, 4i+4) as (px, py, vx, vy).
inline constexpr int kStateDimPerAgent = 4;
inline constexpr int kControlDimPerAgent = 2;
constexpr int position_offset(int agent) { return kStateDimPerAgent * agent; }

enum class PredicateKind { CircleAvoid, CircleIn, BoxIn, HalfspaceXGe, PairwiseSeparation, CustomAffine };

std::string_view to_string(PredicateKind kind);
std::optional<PredicateKind> predicate_kind_from_string(std::string_view s);

/// Parametric atomic predicate g(x) >= 0 over the joint state.
///
///   circle_avoid        ||p_i - c|| - r
///   circle_in           r - ||p_i - c||
///   box_in              min(h_x - |p_x - c_x|, h_y - |p_y - c_y|)
///   halfspace_x_ge      p_x - threshold
///   pairwise_separation ||p_i - p_j|| - 2 r      (radius holds r_col)
///   custom_affine       coeffs . x + offset
struct PredicateDef {
  std::string name;
  PredicateKind kind = PredicateKind::CircleAvoid;
  std::vector<int> agents;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;
  Eigen::Vector2d half_extents = Eigen::Vector2d::Zero();
  double threshold = 0.0;
  Eigen::VectorXd coeffs;
  double offset = 0.0;

  friend bool operator==(const PredicateDef& a, const PredicateDef& b);
};

/// Throws std::invalid_argument when parameters break the kind's invariants.
void check_predicate(const PredicateDef& p, int agent_count);

using PredicateBindings = std::map<std::string, PredicateDef>;

std::set<std::string> binding_names(const PredicateBindings& bindings);

struct PredicateSample {
  double margin = 0.0;
  Eigen::VectorXd grad;
};

/// Exact margin and its analytic gradient with respect to the joint state.
/// Distances below 1e-9 take the first axis as their gradient direction.
PredicateSample predicate_value_grad(const PredicateDef& p, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Margin only; identical arithmetic to predicate_value_grad.
double predicate_value(const PredicateDef& p, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Smooth variant: box_in's internal min becomes a LogSumExp softmin at sharpness beta.
/// All other kinds match predicate_value_grad.
double predicate_value_smooth(const PredicateDef& p, const Eigen::Ref<const Eigen::VectorXd>& x, double beta);

/// Accumulates scale * d(smooth margin)/dx into grad.
void accumulate_predicate_grad_smooth(const PredicateDef& p, const Eigen::Ref<const Eigen::VectorXd>& x,
                                      double beta, double scale, Eigen::Ref<Eigen::VectorXd> grad);

}  // namespace stlplan
