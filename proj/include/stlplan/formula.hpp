#pragma once

#include <cstddef>
#include <memory>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stlplan {

/// Closed discrete-time window [lo, hi] in steps.
struct Interval {
  int lo = 0;
  int hi = 0;

  friend bool operator==(const Interval&, const Interval&) = default;
};

enum class Op { True, Pred, Not, And, Or, Implies, Until, Eventually, Always };

struct FormulaNode;

/// Immutable STL formula tree. Copies share structure.
///
/// Child layout by operator:
///   Not, Eventually, Always : children()[0]
///   And, Or                 : n >= 2 children
///   Implies, Until          : children()[0] = lhs, children()[1] = rhs
class Formula {
 public:
  static Formula top();
  static Formula pred(std::string name);
  static Formula negation(Formula child);
  static Formula conjunction(std::vector<Formula> children);
  static Formula disjunction(std::vector<Formula> children);
  static Formula implies(Formula lhs, Formula rhs);
  static Formula until(Interval interval, Formula lhs, Formula rhs);
  static Formula eventually(Interval interval, Formula child);
  static Formula always(Interval interval, Formula child);

  Op op() const;
  const std::string& name() const;
  Interval interval() const;
  std::span<const Formula> children() const;
  const Formula& child(std::size_t i) const { return children()[i]; }

  /// Address of the shared node; equal ids imply equal subtrees.
  const void* id() const { return node_.get(); }

  friend bool operator==(const Formula& a, const Formula& b);

 private:
  explicit Formula(std::shared_ptr<const FormulaNode> node) : node_(std::move(node)) {}
  std::shared_ptr<const FormulaNode> node_;
};

struct FormulaNode {
  Op op = Op::True;
  std::string name;
  Interval interval;
  std::vector<Formula> children;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line, int column);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Parses the textual formula grammar. Throws ParseError.
Formula parse_formula(std::string_view text);

/// Canonical text; parse_formula(pretty_print(f)) == f.
std::string pretty_print(const Formula& f);

struct Diagnostic {
  enum class Kind { UnboundPredicate, HorizonOverflow };
  Kind kind;
  std::string message;
  std::string subformula;
  int required_length = 0;
};

/// Number of steps beyond the evaluation time a formula looks ahead.
int lookahead(const Formula& f);

/// Empty result means the formula is bound and fits in a trace of H+1 states.
std::vector<Diagnostic> validate(const Formula& f, const std::set<std::string>& bindings, int horizon);

/// Predicate names referenced by f, sorted.
std::set<std::string> predicate_names(const Formula& f);

std::size_t formula_size(const Formula& f);

}  // namespace stlplan
