#include "stlplan/predicates.hpp"

#include <cmath>
#include <stdexcept>

namespace stlplan {

namespace {

constexpr double kNormSingularity = 1e-9;

struct KindName {
  PredicateKind kind;
  std::string_view name;
};

constexpr KindName kKindNames[] = {
    {PredicateKind::CircleAvoid, "circle_avoid"},
    {PredicateKind::CircleIn, "circle_in"},
    {PredicateKind::BoxIn, "box_in"},
    {PredicateKind::HalfspaceXGe, "halfspace_x_ge"},
    {PredicateKind::PairwiseSeparation, "pairwise_separation"},
    {PredicateKind::CustomAffine, "custom_affine"},
};

void check_dim(const PredicateDef& p, Eigen::Index n) {
  for (int a : p.agents) {
    if (a < 0 || position_offset(a) + kStateDimPerAgent > n) {
      throw std::invalid_argument("predicate '" + p.name + "': dimension mismatch (agent " +
                                  std::to_string(a) + " outside state of size " + std::to_string(n) + ")");
    }
  }
  if (p.kind == PredicateKind::CustomAffine && p.coeffs.size() != n) {
    throw std::invalid_argument("predicate '" + p.name + "': dimension mismatch (coeffs " +
                                std::to_string(p.coeffs.size()) + " vs state " + std::to_string(n) + ")");
  }
}

Eigen::Vector2d position(const Eigen::Ref<const Eigen::VectorXd>& x, int agent) {
  return x.segment<2>(position_offset(agent));
}

Eigen::Vector2d unit_or_default(const Eigen::Vector2d& d, double norm) {
  if (norm < kNormSingularity) return Eigen::Vector2d::UnitX();
  return d / norm;
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

// Both box margins; the predicate is min(a, b).
struct BoxTerms {
  double a;
  double b;
  double sx;
  double sy;
};

BoxTerms box_terms(const PredicateDef& p, const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::Vector2d d = position(x, p.agents[0]) - p.center;
  return {p.half_extents.x() - std::abs(d.x()), p.half_extents.y() - std::abs(d.y()), sign(d.x()), sign(d.y())};
}

}  // namespace

std::string_view to_string(PredicateKind kind) {
  for (const auto& k : kKindNames) {
    if (k.kind == kind) return k.name;
  }
  return "unknown";
}

std::optional<PredicateKind> predicate_kind_from_string(std::string_view s) {
  for (const auto& k : kKindNames) {
    if (k.name == s) return k.kind;
  }
  return std::nullopt;
}

bool operator==(const PredicateDef& a, const PredicateDef& b) {
  return a.name == b.name && a.kind == b.kind && a.agents == b.agents && a.center == b.center &&
         a.radius == b.radius && a.half_extents == b.half_extents && a.threshold == b.threshold &&
         a.coeffs.size() == b.coeffs.size() && a.coeffs == b.coeffs && a.offset == b.offset;
}

void check_predicate(const PredicateDef& p, int agent_count) {
  auto fail = [&](const std::string& msg) { throw std::invalid_argument("predicate '" + p.name + "': " + msg); };
  std::size_t want_agents = 1;
  switch (p.kind) {
    case PredicateKind::CircleAvoid:
    case PredicateKind::CircleIn:
      if (!(p.radius > 0.0)) fail("radius must be > 0");
      break;
    case PredicateKind::BoxIn:
      if (!(p.half_extents.x() > 0.0 && p.half_extents.y() > 0.0)) fail("half_extents must be > 0");
      break;
    case PredicateKind::PairwiseSeparation:
      want_agents = 2;
      if (!(p.radius > 0.0)) fail("separation radius must be > 0");
      if (p.agents.size() == 2 && p.agents[0] == p.agents[1]) fail("pairwise separation needs two distinct agents");
      break;
    case PredicateKind::HalfspaceXGe:
      break;
    case PredicateKind::CustomAffine:
      want_agents = 0;
      if (p.coeffs.size() != kStateDimPerAgent * agent_count) fail("coeffs must match the joint state dimension");
      break;
  }
  if (p.agents.size() != want_agents) {
    fail("expects " + std::to_string(want_agents) + " agent index(es), got " + std::to_string(p.agents.size()));
  }
  for (int a : p.agents) {
    if (a < 0 || a >= agent_count) fail("agent index " + std::to_string(a) + " out of range");
  }
}

std::set<std::string> binding_names(const PredicateBindings& bindings) {
  std::set<std::string> names;
  for (const auto& [name, _] : bindings) names.insert(name);
  return names;
}

double predicate_value(const PredicateDef& p, const Eigen::Ref<const Eigen::VectorXd>& x) {
  check_dim(p, x.size());
  switch (p.kind) {
    case PredicateKind::CircleAvoid: return (position(x, p.agents[0]) - p.center).norm() - p.radius;
    case PredicateKind::CircleIn: return p.radius - (position(x, p.agents[0]) - p.center).norm();
    case PredicateKind::BoxIn: {
      BoxTerms t = box_terms(p, x);
      return std::min(t.a, t.b);
    }
    case PredicateKind::HalfspaceXGe: return x(position_offset(p.agents[0])) - p.threshold;
    case PredicateKind::PairwiseSeparation:
      return (position(x, p.agents[0]) - position(x, p.agents[1])).norm() - 2.0 * p.radius;
    case PredicateKind::CustomAffine: return p.coeffs.dot(x) + p.offset;
  }
  return 0.0;
}

PredicateSample predicate_value_grad(const PredicateDef& p, const Eigen::Ref<const Eigen::VectorXd>& x) {
  check_dim(p, x.size());
  PredicateSample s;
  s.grad = Eigen::VectorXd::Zero(x.size());
  switch (p.kind) {
    case PredicateKind::CircleAvoid:
    case PredicateKind::CircleIn: {
      const int off = position_offset(p.agents[0]);
      Eigen::Vector2d d = position(x, p.agents[0]) - p.center;
      double norm = d.norm();
      Eigen::Vector2d u = unit_or_default(d, norm);
      if (p.kind == PredicateKind::CircleAvoid) {
        s.margin = norm - p.radius;
        s.grad.segment<2>(off) = u;
      } else {
        s.margin = p.radius - norm;
        s.grad.segment<2>(off) = -u;
      }
      break;
    }
    case PredicateKind::BoxIn: {
      const int off = position_offset(p.agents[0]);
      BoxTerms t = box_terms(p, x);
      if (t.a <= t.b) {
        s.margin = t.a;
        s.grad(off) = -t.sx;
      } else {
        s.margin = t.b;
        s.grad(off + 1) = -t.sy;
      }
      break;
    }
    case PredicateKind::HalfspaceXGe: {
      const int off = position_offset(p.agents[0]);
      s.margin = x(off) - p.threshold;
      s.grad(off) = 1.0;
      break;
    }
    case PredicateKind::PairwiseSeparation: {
      const int oi = position_offset(p.agents[0]);
      const int oj = position_offset(p.agents[1]);
      Eigen::Vector2d d = position(x, p.agents[0]) - position(x, p.agents[1]);
      double norm = d.norm();
      Eigen::Vector2d u = unit_or_default(d, norm);
      s.margin = norm - 2.0 * p.radius;
      s.grad.segment<2>(oi) = u;
      s.grad.segment<2>(oj) = -u;
      break;
    }
    case PredicateKind::CustomAffine:
      s.margin = p.coeffs.dot(x) + p.offset;
      s.grad = p.coeffs;
      break;
  }
  return s;
}

double predicate_value_smooth(const PredicateDef& p, const Eigen::Ref<const Eigen::VectorXd>& x, double beta) {
  if (p.kind != PredicateKind::BoxIn) return predicate_value(p, x);
  check_dim(p, x.size());
  BoxTerms t = box_terms(p, x);
  double m = std::min(t.a, t.b);
  return m - std::log(std::exp(-beta * (t.a - m)) + std::exp(-beta * (t.b - m))) / beta;
}

void accumulate_predicate_grad_smooth(const PredicateDef& p, const Eigen::Ref<const Eigen::VectorXd>& x,
                                      double beta, double scale, Eigen::Ref<Eigen::VectorXd> grad) {
  check_dim(p, x.size());
  switch (p.kind) {
    case PredicateKind::CircleAvoid:
    case PredicateKind::CircleIn: {
      const int off = position_offset(p.agents[0]);
      Eigen::Vector2d d = position(x, p.agents[0]) - p.center;
      Eigen::Vector2d u = unit_or_default(d, d.norm());
      grad.segment<2>(off) += (p.kind == PredicateKind::CircleAvoid ? scale : -scale) * u;
      break;
    }
    case PredicateKind::BoxIn: {
      const int off = position_offset(p.agents[0]);
      BoxTerms t = box_terms(p, x);
      double m = std::min(t.a, t.b);
      double ea = std::exp(-beta * (t.a - m));
      double eb = std::exp(-beta * (t.b - m));
      double wa = ea / (ea + eb);
      double wb = eb / (ea + eb);
      grad(off) -= scale * wa * t.sx;
      grad(off + 1) -= scale * wb * t.sy;
      break;
    }
    case PredicateKind::HalfspaceXGe:
      grad(position_offset(p.agents[0])) += scale;
      break;
    case PredicateKind::PairwiseSeparation: {
      const int oi = position_offset(p.agents[0]);
      const int oj = position_offset(p.agents[1]);
      Eigen::Vector2d d = position(x, p.agents[0]) - position(x, p.agents[1]);
      Eigen::Vector2d u = unit_or_default(d, d.norm());
      grad.segment<2>(oi) += scale * u;
      grad.segment<2>(oj) -= scale * u;
      break;
    }
    case PredicateKind::CustomAffine:
      grad += scale * p.coeffs;
      break;
  }
}

}  // namespace stlplan
