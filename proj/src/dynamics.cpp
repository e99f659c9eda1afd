#include "stlplan/dynamics.hpp"

#include <stdexcept>
#include <string>

namespace stlplan {

std::string_view to_string(DynamicsKind kind) {
  switch (kind) {
    case DynamicsKind::DoubleIntegrator2d: return "double_integrator_2d";
    case DynamicsKind::MultiAgentDoubleIntegrator: return "multi_agent_double_integrator";
  }
  return "unknown";
}

std::optional<DynamicsKind> dynamics_kind_from_string(std::string_view s) {
  if (s == "double_integrator_2d") return DynamicsKind::DoubleIntegrator2d;
  if (s == "multi_agent_double_integrator") return DynamicsKind::MultiAgentDoubleIntegrator;
  return std::nullopt;
}

void check_dynamics(const DynamicsSpec& spec) {
  if (spec.agents < 1) throw std::invalid_argument("dynamics: agent count must be >= 1");
  if (spec.kind == DynamicsKind::DoubleIntegrator2d && spec.agents != 1) {
    throw std::invalid_argument("dynamics: double_integrator_2d has exactly one agent");
  }
  if (!(spec.dt > 0.0)) throw std::invalid_argument("dynamics: dt must be > 0");
  if (spec.u_min.size() != spec.control_dim() || spec.u_max.size() != spec.control_dim()) {
    throw std::invalid_argument("dynamics: control bounds must have " + std::to_string(spec.control_dim()) +
                                " components");
  }
  if (!(spec.u_min.array() < spec.u_max.array()).all()) {
    throw std::invalid_argument("dynamics: u_min must be < u_max componentwise");
  }
}

Eigen::VectorXd step(const DynamicsSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                     const Eigen::Ref<const Eigen::VectorXd>& u) {
  Eigen::VectorXd next(x.size());
  const double dt = spec.dt;
  for (int i = 0; i < spec.agents; ++i) {
    const int s = kStateDimPerAgent * i;
    const int c = kControlDimPerAgent * i;
    for (int d = 0; d < 2; ++d) {
      const double v = x(s + 2 + d) + u(c + d) * dt;
      next(s + 2 + d) = v;
      next(s + d) = x(s + d) + v * dt;
    }
  }
  return next;
}

Trace rollout(const DynamicsSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x0, const ControlSequence& u) {
  const int n = spec.state_dim();
  if (x0.size() != n) {
    throw std::invalid_argument("rollout: initial state has " + std::to_string(x0.size()) + " entries, expected " +
                                std::to_string(n));
  }
  if (u.cols() != spec.control_dim()) {
    throw std::invalid_argument("rollout: controls have " + std::to_string(u.cols()) + " columns, expected " +
                                std::to_string(spec.control_dim()));
  }
  Trace trace;
  trace.dt = spec.dt;
  trace.states.resize(u.rows() + 1, n);
  trace.states.row(0) = x0.transpose();
  const double dt = spec.dt;
  for (Eigen::Index t = 0; t < u.rows(); ++t) {
    const double* x = trace.states.row(t).data();
    double* y = trace.states.row(t + 1).data();
    const double* a = u.row(t).data();
    for (int i = 0; i < spec.agents; ++i) {
      const int s = kStateDimPerAgent * i;
      const int c = kControlDimPerAgent * i;
      for (int d = 0; d < 2; ++d) {
        const double v = x[s + 2 + d] + a[c + d] * dt;
        y[s + 2 + d] = v;
        y[s + d] = x[s + d] + v * dt;
      }
    }
  }
  if (!trace.states.allFinite()) throw std::runtime_error("rollout: non-finite state (divergent inputs)");
  return trace;
}

RolloutJacobians rollout_jacobians(const DynamicsSpec& spec) {
  check_dynamics(spec);
  const int n = spec.state_dim();
  const int m = spec.control_dim();
  const double dt = spec.dt;
  RolloutJacobians jac{Eigen::MatrixXd::Identity(n, n), Eigen::MatrixXd::Zero(n, m)};
  for (int i = 0; i < spec.agents; ++i) {
    const int s = kStateDimPerAgent * i;
    const int c = kControlDimPerAgent * i;
    for (int d = 0; d < 2; ++d) {
      jac.A(s + d, s + 2 + d) = dt;
      jac.B(s + d, c + d) = dt * dt;
      jac.B(s + 2 + d, c + d) = dt;
    }
  }
  return jac;
}

ControlSequence backprop_controls(const RolloutJacobians& jac, const StateMatrix& per_state_grad) {
  const Eigen::Index horizon = per_state_grad.rows() - 1;
  if (horizon < 0 || per_state_grad.cols() != jac.A.rows()) {
    throw std::invalid_argument("backprop_controls: gradient shape does not match the Jacobians");
  }
  ControlSequence gu(horizon, jac.B.cols());
  Eigen::VectorXd lambda = per_state_grad.row(horizon).transpose();
  const Eigen::MatrixXd At = jac.A.transpose();
  const Eigen::MatrixXd Bt = jac.B.transpose();
  for (Eigen::Index t = horizon - 1; t >= 0; --t) {
    gu.row(t) = (Bt * lambda).transpose();
    lambda = per_state_grad.row(t).transpose() + At * lambda;
  }
  return gu;
}

void clamp_controls(const DynamicsSpec& spec, ControlSequence& u) {
  for (Eigen::Index t = 0; t < u.rows(); ++t) {
    u.row(t) = u.row(t).cwiseMax(spec.u_min.transpose()).cwiseMin(spec.u_max.transpose());
  }
}

}  // namespace stlplan
