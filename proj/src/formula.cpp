#include "stlplan/formula.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

namespace stlplan {

namespace {

void require_interval(Interval iv) {
  if (iv.lo < 0 || iv.hi < iv.lo) {
    throw std::invalid_argument("invalid interval [" + std::to_string(iv.lo) + "," +
                                std::to_string(iv.hi) + "]");
  }
}

}  // namespace

Formula Formula::top() {
  return Formula(std::make_shared<const FormulaNode>(FormulaNode{Op::True, {}, {}, {}}));
}

Formula Formula::pred(std::string name) {
  if (name.empty()) throw std::invalid_argument("empty predicate name");
  return Formula(std::make_shared<const FormulaNode>(FormulaNode{Op::Pred, std::move(name), {}, {}}));
}

Formula Formula::negation(Formula child) {
  return Formula(std::make_shared<const FormulaNode>(FormulaNode{Op::Not, {}, {}, {std::move(child)}}));
}

Formula Formula::conjunction(std::vector<Formula> children) {
  if (children.size() < 2) throw std::invalid_argument("conjunction needs at least two operands");
  return Formula(std::make_shared<const FormulaNode>(FormulaNode{Op::And, {}, {}, std::move(children)}));
}

Formula Formula::disjunction(std::vector<Formula> children) {
  if (children.size() < 2) throw std::invalid_argument("disjunction needs at least two operands");
  return Formula(std::make_shared<const FormulaNode>(FormulaNode{Op::Or, {}, {}, std::move(children)}));
}

Formula Formula::implies(Formula lhs, Formula rhs) {
  return Formula(std::make_shared<const FormulaNode>(
      FormulaNode{Op::Implies, {}, {}, {std::move(lhs), std::move(rhs)}}));
}

Formula Formula::until(Interval interval, Formula lhs, Formula rhs) {
  require_interval(interval);
  return Formula(std::make_shared<const FormulaNode>(
      FormulaNode{Op::Until, {}, interval, {std::move(lhs), std::move(rhs)}}));
}

Formula Formula::eventually(Interval interval, Formula child) {
  require_interval(interval);
  return Formula(std::make_shared<const FormulaNode>(
      FormulaNode{Op::Eventually, {}, interval, {std::move(child)}}));
}

Formula Formula::always(Interval interval, Formula child) {
  require_interval(interval);
  return Formula(
      std::make_shared<const FormulaNode>(FormulaNode{Op::Always, {}, interval, {std::move(child)}}));
}

Op Formula::op() const { return node_->op; }
const std::string& Formula::name() const { return node_->name; }
Interval Formula::interval() const { return node_->interval; }
std::span<const Formula> Formula::children() const { return node_->children; }

bool operator==(const Formula& a, const Formula& b) {
  if (a.node_ == b.node_) return true;
  if (a.op() != b.op() || a.name() != b.name() || !(a.interval() == b.interval())) return false;
  auto ca = a.children();
  auto cb = b.children();
  return std::equal(ca.begin(), ca.end(), cb.begin(), cb.end());
}

ParseError::ParseError(const std::string& what, int line, int column)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

// ---------------------------------------------------------------------------
// Parser

namespace {

enum class Tok { Ident, Int, LParen, RParen, LBracket, RBracket, Comma, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  long long value = 0;
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_space();
    Token t;
    t.line = line_;
    t.column = col_;
    if (pos_ >= src_.size()) return t;
    char c = src_[pos_];
    auto single = [&](Tok k) {
      t.kind = k;
      t.text = std::string(1, c);
      advance();
      return t;
    };
    switch (c) {
      case '(': return single(Tok::LParen);
      case ')': return single(Tok::RParen);
      case '[': return single(Tok::LBracket);
      case ']': return single(Tok::RBracket);
      case ',': return single(Tok::Comma);
      default: break;
    }
    if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      advance();
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
      t.kind = Tok::Int;
      t.text = std::string(src_.substr(start, pos_ - start));
      auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.value);
      if (ec != std::errc() || ptr != t.text.data() + t.text.size()) {
        throw ParseError("malformed integer '" + t.text + "'", t.line, t.column);
      }
      return t;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        advance();
      }
      t.kind = Tok::Ident;
      t.text = std::string(src_.substr(start, pos_ - start));
      return t;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", line_, col_);
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }
  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

bool is_keyword(const std::string& s) {
  return s == "TRUE" || s == "not" || s == "and" || s == "or" || s == "implies" || s == "U" ||
         s == "F" || s == "G";
}

class Parser {
 public:
  explicit Parser(std::string_view src) : lex_(src) { tok_ = lex_.next(); }

  Formula parse() {
    Formula f = parse_implies();
    if (tok_.kind != Tok::End) fail("unexpected '" + tok_.text + "'");
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, tok_.line, tok_.column); }

  bool at_keyword(const char* kw) const { return tok_.kind == Tok::Ident && tok_.text == kw; }

  void expect(Tok kind, const char* what) {
    if (tok_.kind != kind) {
      fail(std::string("expected ") + what + (tok_.kind == Tok::End ? " at end of input" : ", found '" + tok_.text + "'"));
    }
    tok_ = lex_.next();
  }

  int bound() {
    if (tok_.kind != Tok::Int) fail("expected integer bound");
    if (tok_.value < 0) fail("negative interval bound " + tok_.text);
    if (tok_.value > 1'000'000'000) fail("interval bound too large");
    int v = static_cast<int>(tok_.value);
    tok_ = lex_.next();
    return v;
  }

  Interval interval() {
    Token open = tok_;
    expect(Tok::LBracket, "'['");
    Interval iv;
    iv.lo = bound();
    expect(Tok::Comma, "','");
    iv.hi = bound();
    expect(Tok::RBracket, "']'");
    if (iv.lo > iv.hi) {
      throw ParseError("interval lower bound " + std::to_string(iv.lo) + " exceeds upper bound " +
                           std::to_string(iv.hi),
                       open.line, open.column);
    }
    return iv;
  }

  Formula parse_implies() {
    Formula lhs = parse_or();
    if (at_keyword("implies")) {
      tok_ = lex_.next();
      return Formula::implies(lhs, parse_implies());
    }
    return lhs;
  }

  Formula parse_or() {
    std::vector<Formula> terms{parse_and()};
    while (at_keyword("or")) {
      tok_ = lex_.next();
      terms.push_back(parse_and());
    }
    return terms.size() == 1 ? terms.front() : Formula::disjunction(std::move(terms));
  }

  Formula parse_and() {
    std::vector<Formula> terms{parse_until()};
    while (at_keyword("and")) {
      tok_ = lex_.next();
      terms.push_back(parse_until());
    }
    return terms.size() == 1 ? terms.front() : Formula::conjunction(std::move(terms));
  }

  Formula parse_until() {
    Formula lhs = parse_unary();
    while (at_keyword("U")) {
      tok_ = lex_.next();
      Interval iv = interval();
      lhs = Formula::until(iv, lhs, parse_unary());
    }
    return lhs;
  }

  Formula parse_unary() {
    if (at_keyword("not")) {
      tok_ = lex_.next();
      return Formula::negation(parse_unary());
    }
    if (at_keyword("F") || at_keyword("G")) {
      bool eventually = tok_.text == "F";
      tok_ = lex_.next();
      Interval iv = interval();
      Formula child = parse_unary();
      return eventually ? Formula::eventually(iv, child) : Formula::always(iv, child);
    }
    if (tok_.kind == Tok::LParen) {
      tok_ = lex_.next();
      Formula inner = parse_implies();
      expect(Tok::RParen, "')'");
      return inner;
    }
    if (tok_.kind == Tok::Ident) {
      if (tok_.text == "TRUE") {
        tok_ = lex_.next();
        return Formula::top();
      }
      if (is_keyword(tok_.text)) fail("unexpected keyword '" + tok_.text + "'");
      Formula p = Formula::pred(tok_.text);
      tok_ = lex_.next();
      return p;
    }
    if (tok_.kind == Tok::End) fail("unexpected end of input");
    fail("unexpected '" + tok_.text + "'");
  }

  Lexer lex_;
  Token tok_;
};

// Binding strength used by the printer; lower binds tighter.
int precedence(Op op) {
  switch (op) {
    case Op::Until: return 1;
    case Op::And: return 2;
    case Op::Or: return 3;
    case Op::Implies: return 4;
    default: return 0;
  }
}

void print(const Formula& f, int max_prec, std::ostringstream& out);

void print_interval(Interval iv, std::ostringstream& out) { out << '[' << iv.lo << ',' << iv.hi << ']'; }

void print_node(const Formula& f, std::ostringstream& out) {
  switch (f.op()) {
    case Op::True: out << "TRUE"; break;
    case Op::Pred: out << f.name(); break;
    case Op::Not:
      out << "not ";
      print(f.child(0), 0, out);
      break;
    case Op::Eventually:
    case Op::Always:
      out << (f.op() == Op::Eventually ? 'F' : 'G');
      print_interval(f.interval(), out);
      out << ' ';
      print(f.child(0), 0, out);
      break;
    case Op::Until:
      print(f.child(0), 1, out);
      out << " U";
      print_interval(f.interval(), out);
      out << ' ';
      print(f.child(1), 0, out);
      break;
    case Op::And:
    case Op::Or: {
      const char* sep = f.op() == Op::And ? " and " : " or ";
      int child_prec = precedence(f.op()) - 1;
      bool first = true;
      for (const auto& c : f.children()) {
        if (!first) out << sep;
        first = false;
        print(c, child_prec, out);
      }
      break;
    }
    case Op::Implies:
      print(f.child(0), 3, out);
      out << " implies ";
      print(f.child(1), 4, out);
      break;
  }
}

void print(const Formula& f, int max_prec, std::ostringstream& out) {
  if (precedence(f.op()) > max_prec) {
    out << '(';
    print_node(f, out);
    out << ')';
  } else {
    print_node(f, out);
  }
}

void collect_names(const Formula& f, std::set<std::string>& names) {
  if (f.op() == Op::Pred) names.insert(f.name());
  for (const auto& c : f.children()) collect_names(c, names);
}

bool is_temporal(Op op) { return op == Op::Until || op == Op::Eventually || op == Op::Always; }

// First temporal node (pre-order) whose window reaches past the horizon.
const Formula* find_overflow(const Formula& f, int offset, int horizon, int& reached) {
  int child_offset = offset;
  if (is_temporal(f.op())) {
    child_offset = offset + f.interval().hi;
    if (child_offset > horizon) {
      reached = offset + lookahead(f);
      return &f;
    }
  }
  for (const auto& c : f.children()) {
    if (const Formula* hit = find_overflow(c, child_offset, horizon, reached)) return hit;
  }
  return nullptr;
}

}  // namespace

Formula parse_formula(std::string_view text) { return Parser(text).parse(); }

std::string pretty_print(const Formula& f) {
  std::ostringstream out;
  print(f, 4, out);
  return out.str();
}

int lookahead(const Formula& f) {
  int inner = 0;
  for (const auto& c : f.children()) inner = std::max(inner, lookahead(c));
  return is_temporal(f.op()) ? f.interval().hi + inner : inner;
}

std::set<std::string> predicate_names(const Formula& f) {
  std::set<std::string> names;
  collect_names(f, names);
  return names;
}

std::size_t formula_size(const Formula& f) {
  std::size_t n = 1;
  for (const auto& c : f.children()) n += formula_size(c);
  return n;
}

std::vector<Diagnostic> validate(const Formula& f, const std::set<std::string>& bindings, int horizon) {
  std::vector<Diagnostic> out;
  for (const auto& name : predicate_names(f)) {
    if (!bindings.contains(name)) {
      out.push_back({Diagnostic::Kind::UnboundPredicate, "unbound predicate '" + name + "'", name, 0});
    }
  }
  if (horizon < 0) {
    out.push_back({Diagnostic::Kind::HorizonOverflow, "negative horizon", pretty_print(f), 0});
    return out;
  }
  int reached = 0;
  if (const Formula* hit = find_overflow(f, 0, horizon, reached)) {
    int required = lookahead(f) + 1;
    std::string sub = pretty_print(*hit);
    out.push_back({Diagnostic::Kind::HorizonOverflow,
                   "formula needs a trace of " + std::to_string(required) + " states but horizon " +
                       std::to_string(horizon) + " provides " + std::to_string(horizon + 1) +
                       "; subformula '" + sub + "' reaches step " + std::to_string(reached),
                   sub, required});
  }
  return out;
}

}  // namespace stlplan
