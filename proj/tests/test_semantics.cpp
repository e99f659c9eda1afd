#include "oracles.hpp"

#include "stlplan/semantics.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace stlplan;

namespace {

PredicateDef affine_coordinate(const std::string& name, int dim, int coord, double offset = 0.0) {
  PredicateDef p;
  p.name = name;
  p.kind = PredicateKind::CustomAffine;
  p.coeffs = Eigen::VectorXd::Zero(dim);
  p.coeffs(coord) = 1.0;
  p.offset = offset;
  return p;
}

// One-dimensional signal carried in coordinate 0 (and 1) of a 4-dim state.
Trace signal_trace(const std::vector<double>& a, const std::vector<double>& b = {}) {
  Trace tr;
  tr.states = StateMatrix::Zero(static_cast<Eigen::Index>(a.size()), 4);
  for (std::size_t t = 0; t < a.size(); ++t) {
    tr.states(t, 0) = a[t];
    if (!b.empty()) tr.states(t, 1) = b[t];
  }
  return tr;
}

}  // namespace

TEST_CASE("predicate examples") {
  PredicateDef avoid;
  avoid.kind = PredicateKind::CircleAvoid;
  avoid.agents = {0};
  avoid.radius = 2.0;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(4);
  x << 3, 4, 0, 0;
  auto s = predicate_value_grad(avoid, x);
  CHECK(s.margin == doctest::Approx(3.0));
  CHECK(s.grad(0) == doctest::Approx(0.6));
  CHECK(s.grad(1) == doctest::Approx(0.8));
  CHECK(s.grad(2) == 0.0);

  PredicateDef sep;
  sep.kind = PredicateKind::PairwiseSeparation;
  sep.agents = {0, 1};
  sep.radius = 0.5;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(8);
  y << 1, 1, 0, 0, 1, 1, 0, 0;
  auto c = predicate_value_grad(sep, y);
  CHECK(c.margin == doctest::Approx(-1.0));
  CHECK(c.grad.allFinite());
  CHECK(c.grad(0) == doctest::Approx(1.0));
  CHECK(c.grad(4) == doctest::Approx(-1.0));

  PredicateDef box;
  box.kind = PredicateKind::BoxIn;
  box.agents = {0};
  box.half_extents = {1, 1};
  Eigen::VectorXd z = Eigen::VectorXd::Zero(4);
  z << 0.25, -0.5, 0, 0;
  CHECK(predicate_value(box, z) == doctest::Approx(0.5));
}

TEST_CASE("box_in margin agrees with a grid-sampled distance oracle") {
  // Inside the box the margin is the distance to the nearest edge; sample the boundary.
  PredicateDef box;
  box.kind = PredicateKind::BoxIn;
  box.agents = {0};
  box.center = {0.3, -0.2};
  box.half_extents = {1.0, 0.6};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(-0.69, 1.29), uy(-0.79, 0.39);
  for (int k = 0; k < 50; ++k) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(4);
    x << ux(rng), uy(rng), 0, 0;
    double best = 1e9;
    const int n = 4000;
    for (int i = 0; i <= n; ++i) {
      const double s = static_cast<double>(i) / n;
      const double ex = -0.7 + 2.0 * s, ey = -0.8 + 1.2 * s;
      best = std::min({best, std::hypot(x(0) - ex, x(1) + 0.8), std::hypot(x(0) - ex, x(1) - 0.4),
                       std::hypot(x(0) + 0.7, x(1) - ey), std::hypot(x(0) - 1.3, x(1) - ey)});
    }
    CHECK(predicate_value(box, x) == doctest::Approx(best).epsilon(1e-3));
  }
}

TEST_CASE("predicate gradients match finite differences") {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 40; ++k) {
    auto bindings = oracle::random_bindings(rng, 2, 6);
    Eigen::VectorXd x = oracle::random_trace(rng, 0, 8).states.row(0).transpose();
    for (const auto& [name, p] : bindings) {
      auto s = predicate_value_grad(p, x);
      auto fd = oracle::central_diff([&](const Eigen::VectorXd& y) { return predicate_value(p, y); }, x, 1e-6);
      CHECK(oracle::rel_error(s.grad, fd) < 1e-5);
      Eigen::VectorXd g = Eigen::VectorXd::Zero(8);
      accumulate_predicate_grad_smooth(p, x, 10.0, 1.0, g);
      auto sfd = oracle::central_diff([&](const Eigen::VectorXd& y) { return predicate_value_smooth(p, y, 10.0); },
                                      x, 1e-6);
      CHECK(oracle::rel_error(g, sfd) < 1e-5);
    }
  }
}

TEST_CASE("predicate parameter invariants") {
  PredicateDef p;
  p.kind = PredicateKind::CircleIn;
  p.agents = {0};
  p.radius = 0.0;
  CHECK_THROWS(check_predicate(p, 1));
  p.radius = 1.0;
  CHECK_NOTHROW(check_predicate(p, 1));
  p.agents = {1};
  CHECK_THROWS(check_predicate(p, 1));
  PredicateDef b;
  b.kind = PredicateKind::BoxIn;
  b.agents = {0};
  b.half_extents = {1.0, 0.0};
  CHECK_THROWS(check_predicate(b, 1));
}

TEST_CASE("hard semantics examples") {
  PredicateBindings b{{"f", affine_coordinate("f", 4, 0)}, {"g", affine_coordinate("g", 4, 1)}};
  Trace tr = signal_trace({0.5}, {-0.1});
  CHECK(robustness_hard(Formula::negation(Formula::pred("f")), tr, 0, b) == -0.5);
  Trace tr2 = signal_trace({0.3}, {-0.1});
  CHECK(robustness_hard(Formula::conjunction({Formula::pred("f"), Formula::pred("g")}), tr2, 0, b) == -0.1);
  CHECK(robustness_hard(Formula::top(), tr2, 0, b) == 1e6);
}

TEST_CASE("until example against the enumerator") {
  PredicateBindings b{{"a", affine_coordinate("a", 4, 0)}, {"b", affine_coordinate("b", 4, 1)}};
  const std::vector<double> r1{1.0, 0.2, 0.5}, r2{-1.0, 0.4, 0.9};
  Trace tr = signal_trace(r1, r2);
  Formula u = Formula::until({0, 2}, Formula::pred("a"), Formula::pred("b"));
  const double want = oracle::enumerate_until(r1, r2, 0, 2);
  CHECK(want == doctest::Approx(0.2));
  CHECK(robustness_hard(u, tr, 0, b) == want);

  SmoothingConfig cfg;
  cfg.beta = 100.0;
  auto shape = CompiledFormula(u, b).smoothing_shape();
  const double bound = shape.depth * std::log(static_cast<double>(shape.max_fan_in)) / cfg.beta;
  CHECK(std::abs(robustness_smooth(u, tr, cfg, b).value - 0.2) <= bound);
}

TEST_CASE("until windows start late and clip at the horizon") {
  PredicateBindings b{{"a", affine_coordinate("a", 4, 0)}, {"b", affine_coordinate("b", 4, 1)}};
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> r1(9), r2(9);
    for (auto& v : r1) v = u(rng);
    for (auto& v : r2) v = u(rng);
    Trace tr = signal_trace(r1, r2);
    std::uniform_int_distribution<int> lo_d(0, 8);
    const int lo = lo_d(rng);
    std::uniform_int_distribution<int> hi_d(lo, 8);
    const int hi = hi_d(rng);
    Formula f = Formula::until({lo, hi}, Formula::pred("a"), Formula::pred("b"));
    CHECK(robustness_hard(f, tr, 0, b) == oracle::enumerate_until(r1, r2, lo, hi));
  }
}

TEST_CASE("evaluation window past the horizon is an error") {
  PredicateBindings b{{"a", affine_coordinate("a", 4, 0)}};
  Trace tr = signal_trace({1, 2, 3});
  CHECK_THROWS(robustness_hard(Formula::eventually({3, 4}, Formula::pred("a")), tr, 0, b));
  CHECK_THROWS(robustness_hard(Formula::pred("a"), tr, 3, b));
  CHECK_THROWS(robustness_hard(Formula::pred("zz"), tr, 0, b));
}

TEST_CASE("softmin and softmax closed forms") {
  const std::vector<double> z{0.0, 0.0};
  CHECK(softmin(z, 1.0) == doctest::Approx(-std::log(2.0)));
  CHECK(softmax(z, 1.0) == doctest::Approx(std::log(2.0)));
  const std::vector<double> big{1e6, 1e6 - 1};
  CHECK(std::isfinite(softmax(big, 100.0)));
  CHECK(softmax(big, 100.0) == doctest::Approx(1e6));
}

TEST_CASE("softmax nonincreasing and softmin nondecreasing in beta") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> v(5);
    for (auto& x : v) x = u(rng);
    const double hi = *std::max_element(v.begin(), v.end());
    const double lo = *std::min_element(v.begin(), v.end());
    double prev_max = softmax(v, 1.0), prev_min = softmin(v, 1.0);
    for (double beta : {10.0, 100.0}) {
      const double m = softmax(v, beta), n = softmin(v, beta);
      CHECK(m <= prev_max);
      CHECK(n >= prev_min);
      CHECK(m >= hi);
      CHECK(m <= hi + std::log(5.0) / beta + 1e-12);
      CHECK(n <= lo);
      CHECK(n >= lo - std::log(5.0) / beta - 1e-12);
      prev_max = m;
      prev_min = n;
    }
  }
}

TEST_CASE("hard robustness matches the brute-force recursion") {
  std::mt19937_64 rng(101);
  for (int k = 0; k < 300; ++k) {
    std::uniform_int_distribution<int> H(0, 8), m(1, 2);
    auto inst = oracle::random_instance(rng, H(rng), 3, m(rng));
    CompiledFormula cf(inst.formula, inst.bindings);
    for (int t = 0; t + lookahead(inst.formula) <= inst.trace.horizon(); ++t) {
      CHECK(cf.hard(inst.trace, t) == oracle::brute_hard(inst.formula, inst.trace, t, inst.bindings));
    }
  }
}

TEST_CASE("smooth robustness matches the brute-force smooth recursion") {
  std::mt19937_64 rng(103);
  for (int k = 0; k < 200; ++k) {
    auto inst = oracle::random_instance(rng, 6, 3, 2);
    for (double beta : {1.0, 10.0, 100.0}) {
      SmoothingConfig cfg;
      cfg.beta = beta;
      const double got = robustness_smooth(inst.formula, inst.trace, cfg, inst.bindings).value;
      const double want = oracle::brute_smooth(inst.formula, inst.trace, 0, inst.bindings, beta);
      CHECK(got == doctest::Approx(want).epsilon(1e-9).scale(1.0));
      CHECK(CompiledFormula(inst.formula, inst.bindings).smooth_value(inst.trace, cfg) == doctest::Approx(got));
    }
  }
}

TEST_CASE("sign soundness against Boolean semantics") {
  std::mt19937_64 rng(107);
  int decided = 0;
  for (int k = 0; k < 500; ++k) {
    auto inst = oracle::random_instance(rng, 8, 4, 2);
    const double r = robustness_hard(inst.formula, inst.trace, 0, inst.bindings);
    const bool sat = oracle::boolean_sat(inst.formula, inst.trace, 0, inst.bindings);
    if (r > 0) CHECK(sat);
    if (r < 0) CHECK_FALSE(sat);
    decided += r != 0;
  }
  CHECK(decided > 400);
}

TEST_CASE("negation antisymmetry, hard and smooth") {
  std::mt19937_64 rng(109);
  SmoothingConfig cfg;
  for (int k = 0; k < 100; ++k) {
    auto inst = oracle::random_instance(rng, 6, 3, 1);
    Formula neg = Formula::negation(inst.formula);
    CHECK(robustness_hard(neg, inst.trace, 0, inst.bindings) == -robustness_hard(inst.formula, inst.trace, 0, inst.bindings));
    auto s = robustness_smooth(inst.formula, inst.trace, cfg, inst.bindings);
    auto n = robustness_smooth(neg, inst.trace, cfg, inst.bindings);
    CHECK(n.value == -s.value);
    CHECK(n.per_state_grad == -s.per_state_grad);
  }
}

TEST_CASE("smooth state gradient matches finite differences") {
  std::mt19937_64 rng(113);
  int checked = 0;
  for (int k = 0; k < 100; ++k) {
    auto inst = oracle::random_instance(rng, 5, 3, 2, false);
    SmoothingConfig cfg;
    auto r = robustness_smooth(inst.formula, inst.trace, cfg, inst.bindings);
    REQUIRE(r.per_state_grad.rows() == inst.trace.states.rows());
    REQUIRE(r.per_state_grad.allFinite());
    const Eigen::Index n = inst.trace.states.size();
    Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(inst.trace.states.data(), n);
    Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(r.per_state_grad.data(), n);
    auto fd = oracle::central_diff(
        [&](const Eigen::VectorXd& y) {
          Trace t2 = inst.trace;
          Eigen::Map<Eigen::VectorXd>(t2.states.data(), n) = y;
          return robustness_smooth(inst.formula, t2, cfg, inst.bindings).value;
        },
        flat, 1e-5);
    CHECK(oracle::rel_error(g, fd) <= 1e-4);
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("eventually ignores the top sentinel; always over TRUE is the sentinel") {
  PredicateBindings b{{"a", affine_coordinate("a", 4, 0)}};
  Trace tr = signal_trace({0.1, -0.4, 0.3});
  CHECK(robustness_hard(parse_formula("F[0,2] a"), tr, 0, b) == 0.3);
  CHECK(robustness_hard(parse_formula("G[0,2] a"), tr, 0, b) == -0.4);
  CHECK(robustness_hard(parse_formula("G[0,2] TRUE"), tr, 0, b) == 1e6);
  CHECK(robustness_hard(parse_formula("TRUE U[0,2] a"), tr, 0, b) == 0.3);
}

TEST_CASE("check_trace rejects bad input") {
  Trace empty;
  CHECK_THROWS(check_trace(empty));
  Trace bad = signal_trace({1.0, NAN});
  CHECK_THROWS(check_trace(bad));
}
