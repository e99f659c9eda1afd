#pragma once

#include "stlplan/semantics.hpp"

#include <Eigen/Core>

#include <optional>
#include <string_view>

namespace stlplan {

enum class DynamicsKind { DoubleIntegrator2d, MultiAgentDoubleIntegrator };

std::string_view to_string(DynamicsKind kind);
std::optional<DynamicsKind> dynamics_kind_from_string(std::string_view s);

/// Point-mass agents with acceleration inputs, integrated by semi-implicit Euler.
struct DynamicsSpec {
  DynamicsKind kind = DynamicsKind::DoubleIntegrator2d;
  int agents = 1;
  double dt = 0.1;
  Eigen::VectorXd u_min;  // 2 * agents
  Eigen::VectorXd u_max;

  int state_dim() const { return kStateDimPerAgent * agents; }
  int control_dim() const { return kControlDimPerAgent * agents; }
};

/// Throws std::invalid_argument when `spec` breaks its invariants.
void check_dynamics(const DynamicsSpec& spec);

/// Row t holds u_t; the row-major layout makes data() the flattened particle.
using ControlSequence = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Time-invariant step Jacobians A = df/dx, B = df/du (all in-scope systems are linear).
struct RolloutJacobians {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
};

/// x_{t+1} from x_t, u_t; v' = v + a dt, p' = p + v' dt per agent.
Eigen::VectorXd step(const DynamicsSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                     const Eigen::Ref<const Eigen::VectorXd>& u);

Trace rollout(const DynamicsSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x0, const ControlSequence& u);

RolloutJacobians rollout_jacobians(const DynamicsSpec& spec);

/// Adjoint pass: lambda_H = g_H; g_u[t] = B^T lambda_{t+1}; lambda_t = g_t + A^T lambda_{t+1}.
ControlSequence backprop_controls(const RolloutJacobians& jac, const StateMatrix& per_state_grad);

/// Componentwise projection onto [u_min, u_max].
void clamp_controls(const DynamicsSpec& spec, ControlSequence& u);

}  // namespace stlplan
