#pragma once

// Small closed expression language in one variable `x`:
//   numbers, x, + - * / ^ (right-associative), unary minus,
//   exp log sqrt abs (one argument), min max pow (two arguments).
//
// Expressions are immutable trees of shared nodes, so copies are cheap and
// evaluation is reentrant.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ostop/core.hpp"
#include "ostop/errors.hpp"

namespace ostop {

namespace expr_detail {

enum class Op : std::uint8_t {
  constant,
  variable,
  add,
  sub,
  mul,
  div,
  pow,
  neg,
  exp,
  log,
  sqrt,
  abs,
  min,
  max,
  // Derivative of min/max/abs. Children: [a, b, slope_a, slope_b, result_a, result_b].
  // a and b decide the active branch; at a tie the slopes resolve one-sided limits.
  select_min,
  select_max,
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Op op;
  double value = 0.0;
  std::vector<NodePtr> args;
};

inline NodePtr make(Op op, std::vector<NodePtr> args = {}) {
  return std::make_shared<const Node>(Node{op, 0.0, std::move(args)});
}
inline NodePtr constant(double v) { return std::make_shared<const Node>(Node{Op::constant, v, {}}); }
inline NodePtr variable() { return make(Op::variable); }

inline bool is_const(const NodePtr& n, double v) { return n->op == Op::constant && n->value == v; }

// Minimal folding keeps derivative trees from growing without bound.
inline NodePtr add(NodePtr a, NodePtr b) {
  if (is_const(a, 0.0)) return b;
  if (is_const(b, 0.0)) return a;
  return make(Op::add, {std::move(a), std::move(b)});
}
inline NodePtr sub(NodePtr a, NodePtr b) {
  if (is_const(b, 0.0)) return a;
  if (is_const(a, 0.0)) return make(Op::neg, {std::move(b)});
  return make(Op::sub, {std::move(a), std::move(b)});
}
inline NodePtr mul(NodePtr a, NodePtr b) {
  if (is_const(a, 0.0) || is_const(b, 0.0)) return constant(0.0);
  if (is_const(a, 1.0)) return b;
  if (is_const(b, 1.0)) return a;
  return make(Op::mul, {std::move(a), std::move(b)});
}
inline NodePtr div(NodePtr a, NodePtr b) {
  if (is_const(a, 0.0)) return constant(0.0);
  if (is_const(b, 1.0)) return a;
  return make(Op::div, {std::move(a), std::move(b)});
}
inline NodePtr neg(NodePtr a) {
  if (is_const(a, 0.0)) return a;
  return make(Op::neg, {std::move(a)});
}

inline bool depends_on_x(const Node& n) {
  if (n.op == Op::variable) return true;
  return std::any_of(n.args.begin(), n.args.end(), [](const NodePtr& c) { return depends_on_x(*c); });
}

[[noreturn]] inline void domain_fail(const char* what, double x) {
  throw DomainError(std::string(what) + " at x=" + std::to_string(x));
}

inline double finite_or_fail(double v, const char* what, double x) {
  if (!std::isfinite(v)) domain_fail(what, x);
  return v;
}

// side == nullptr: strict evaluation, ties in select nodes raise KinkError.
inline double eval(const Node& n, double x, const Side* side) {
  auto arg = [&](std::size_t i) { return eval(*n.args[i], x, side); };
  switch (n.op) {
    case Op::constant:
      return n.value;
    case Op::variable:
      return x;
    case Op::add:
      return finite_or_fail(arg(0) + arg(1), "overflow in addition", x);
    case Op::sub:
      return finite_or_fail(arg(0) - arg(1), "overflow in subtraction", x);
    case Op::mul:
      return finite_or_fail(arg(0) * arg(1), "overflow in multiplication", x);
    case Op::div: {
      const double num = arg(0);
      const double den = arg(1);
      if (den == 0.0) domain_fail("division by zero", x);
      return finite_or_fail(num / den, "overflow in division", x);
    }
    case Op::pow: {
      const double base = arg(0);
      const double expo = arg(1);
      if (base == 0.0 && expo < 0.0) domain_fail("zero raised to a negative power", x);
      return finite_or_fail(std::pow(base, expo), "pow outside its domain", x);
    }
    case Op::neg:
      return -arg(0);
    case Op::exp:
      return finite_or_fail(std::exp(arg(0)), "exp overflow", x);
    case Op::log: {
      const double u = arg(0);
      if (!(u > 0.0)) domain_fail("log of a non-positive number", x);
      return std::log(u);
    }
    case Op::sqrt: {
      const double u = arg(0);
      if (u < 0.0) domain_fail("sqrt of a negative number", x);
      return std::sqrt(u);
    }
    case Op::abs:
      return std::abs(arg(0));
    case Op::min:
      return std::min(arg(0), arg(1));
    case Op::max:
      return std::max(arg(0), arg(1));
    case Op::select_min:
    case Op::select_max: {
      const bool is_max = n.op == Op::select_max;
      const double a = arg(0);
      const double b = arg(1);
      if (a != b) return ((a > b) == is_max) ? arg(4) : arg(5);
      const double ta = arg(2);
      const double tb = arg(3);
      if (side == nullptr) {
        const double ra = arg(4);
        const double rb = arg(5);
        if (ta == tb && ra == rb) return ra;
        throw KinkError(x);
      }
      if (ta != tb) {
        // To the right the larger slope wins a max; to the left the smaller one does.
        const bool right = *side == Side::right;
        const bool pick_a = ((ta > tb) == right) == is_max;
        return pick_a ? arg(4) : arg(5);
      }
      const double ra = arg(4);
      const double rb = arg(5);
      return is_max ? std::max(ra, rb) : std::min(ra, rb);
    }
  }
  return 0.0;
}

inline NodePtr derive(const NodePtr& n) {
  const auto& a = n->args;
  switch (n->op) {
    case Op::constant:
      return constant(0.0);
    case Op::variable:
      return constant(1.0);
    case Op::add:
      return add(derive(a[0]), derive(a[1]));
    case Op::sub:
      return sub(derive(a[0]), derive(a[1]));
    case Op::mul:
      return add(mul(derive(a[0]), a[1]), mul(a[0], derive(a[1])));
    case Op::div:
      return div(sub(mul(derive(a[0]), a[1]), mul(a[0], derive(a[1]))), mul(a[1], a[1]));
    case Op::pow: {
      if (!depends_on_x(*a[1])) {
        auto reduced = make(Op::pow, {a[0], sub(a[1], constant(1.0))});
        return mul(mul(a[1], reduced), derive(a[0]));
      }
      auto inner = add(mul(derive(a[1]), make(Op::log, {a[0]})), div(mul(a[1], derive(a[0])), a[0]));
      return mul(n, inner);
    }
    case Op::neg:
      return neg(derive(a[0]));
    case Op::exp:
      return mul(n, derive(a[0]));
    case Op::log:
      return div(derive(a[0]), a[0]);
    case Op::sqrt:
      return div(derive(a[0]), mul(constant(2.0), n));
    case Op::abs: {
      // |u| = max(u, -u)
      auto du = derive(a[0]);
      auto neg_u = neg(a[0]);
      auto neg_du = neg(du);
      return make(Op::select_max, {a[0], neg_u, du, neg_du, du, neg_du});
    }
    case Op::min:
    case Op::max: {
      auto da = derive(a[0]);
      auto db = derive(a[1]);
      const Op sel = n->op == Op::min ? Op::select_min : Op::select_max;
      return make(sel, {a[0], a[1], da, db, da, db});
    }
    case Op::select_min:
    case Op::select_max:
      return make(n->op, {a[0], a[1], a[2], a[3], derive(a[4]), derive(a[5])});
  }
  return constant(0.0);
}

inline std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline const char* function_name(Op op) {
  switch (op) {
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::sqrt: return "sqrt";
    case Op::abs: return "abs";
    case Op::min: return "min";
    case Op::max: return "max";
    case Op::select_min: return "select_min";
    case Op::select_max: return "select_max";
    default: return "?";
  }
}

inline void format(const Node& n, std::string& out) {
  auto binary = [&](const char* sym) {
    out += '(';
    format(*n.args[0], out);
    out += sym;
    format(*n.args[1], out);
    out += ')';
  };
  switch (n.op) {
    case Op::constant:
      if (n.value < 0.0) {
        out += "(-" + format_number(-n.value) + ")";
      } else {
        out += format_number(n.value);
      }
      return;
    case Op::variable: out += 'x'; return;
    case Op::add: binary("+"); return;
    case Op::sub: binary("-"); return;
    case Op::mul: binary("*"); return;
    case Op::div: binary("/"); return;
    case Op::pow: binary("^"); return;
    case Op::neg:
      out += "(-";
      format(*n.args[0], out);
      out += ')';
      return;
    default: {
      out += function_name(n.op);
      out += '(';
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i) out += ',';
        format(*n.args[i], out);
      }
      out += ')';
      return;
    }
  }
}

inline bool equal(const Node& a, const Node& b) {
  if (a.op != b.op || a.args.size() != b.args.size()) return false;
  if (a.op == Op::constant && a.value != b.value) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!equal(*a.args[i], *b.args[i])) return false;
  return true;
}

class Parser {
public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr parse() {
    skip_ws();
    if (pos_ >= text_.size()) throw SyntaxError(pos_, "empty expression");
    auto root = expression();
    skip_ws();
    if (pos_ < text_.size()) throw SyntaxError(pos_, "unexpected '" + std::string(1, text_[pos_]) + "'");
    return root;
  }

private:
  std::string_view text_;
  std::size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' ||
                                   text_[pos_] == '\r'))
      ++pos_;
  }
  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) throw SyntaxError(pos_, std::string("expected '") + c + "'");
  }

  NodePtr expression() {
    auto lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = make(Op::add, {lhs, term()});
      } else if (accept('-')) {
        lhs = make(Op::sub, {lhs, term()});
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    auto lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = make(Op::mul, {lhs, unary()});
      } else if (accept('/')) {
        lhs = make(Op::div, {lhs, unary()});
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Op::neg, {unary()});
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    auto base = primary();
    if (accept('^')) return make(Op::pow, {base, unary()});
    return base;
  }

  NodePtr primary() {
    skip_ws();
    if (pos_ >= text_.size()) throw SyntaxError(pos_, "expected operand, found end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      auto inner = expression();
      expect(')');
      return inner;
    }
    if ((c >= '0' && c <= '9') || c == '.') return number();
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_') return identifier();
    throw SyntaxError(pos_, "expected operand, found '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    const std::size_t start = pos_;
    double v = 0.0;
    auto res = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
    if (res.ec != std::errc() || !std::isfinite(v)) throw SyntaxError(start, "malformed number");
    pos_ = static_cast<std::size_t>(res.ptr - text_.data());
    return constant(v);
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string_view name = text_.substr(start, pos_ - start);
    if (name == "x") return variable();

    struct Fn {
      std::string_view name;
      Op op;
      int arity;
    };
    static constexpr std::array<Fn, 7> fns{{{"exp", Op::exp, 1},
                                            {"log", Op::log, 1},
                                            {"sqrt", Op::sqrt, 1},
                                            {"abs", Op::abs, 1},
                                            {"min", Op::min, 2},
                                            {"max", Op::max, 2},
                                            {"pow", Op::pow, 2}}};
    for (const auto& fn : fns) {
      if (fn.name != name) continue;
      expect('(');
      std::vector<NodePtr> args{expression()};
      for (int i = 1; i < fn.arity; ++i) {
        expect(',');
        args.push_back(expression());
      }
      expect(')');
      return make(fn.op, std::move(args));
    }
    throw SyntaxError(start, "unknown identifier '" + std::string(name) + "'");
  }
};

inline void collect_ties(const NodePtr& n, std::vector<NodePtr>& out) {
  if (n->op == Op::min || n->op == Op::max) out.push_back(make(Op::sub, {n->args[0], n->args[1]}));
  if (n->op == Op::abs) out.push_back(n->args[0]);
  for (const auto& c : n->args) collect_ties(c, out);
}

} // namespace expr_detail

/// Parsed, immutable expression in the variable x.
class Expression {
public:
  Expression() : root_(expr_detail::constant(0.0)) {}
  explicit Expression(expr_detail::NodePtr root) : root_(std::move(root)) {}

  static Expression constant(double v) { return Expression(expr_detail::constant(v)); }

  /// Strict evaluation; a derivative evaluated exactly at a branch tie raises KinkError.
  double operator()(double x) const { return expr_detail::eval(*root_, x, nullptr); }
  double eval(double x) const { return (*this)(x); }
  /// One-sided evaluation: ties in derivative branches resolve to the limit from `side`.
  double eval(double x, Side side) const { return expr_detail::eval(*root_, x, &side); }

  bool depends_on_x() const { return expr_detail::depends_on_x(*root_); }
  const expr_detail::Node& root() const { return *root_; }
  const expr_detail::NodePtr& root_ptr() const { return root_; }

  /// Functions whose zeros are the branch changes of every min/max/abs in the tree.
  std::vector<Expression> tie_functions() const {
    std::vector<expr_detail::NodePtr> nodes;
    expr_detail::collect_ties(root_, nodes);
    std::vector<Expression> out;
    out.reserve(nodes.size());
    for (auto& n : nodes) out.emplace_back(std::move(n));
    return out;
  }

private:
  expr_detail::NodePtr root_;
};

inline Expression parse(std::string_view text) { return Expression(expr_detail::Parser(text).parse()); }

/// Symbolic derivative. min/max/abs differentiate branchwise.
inline Expression differentiate(const Expression& e) { return Expression(expr_detail::derive(e.root_ptr())); }

/// Fully parenthesised text that parses back to the same tree.
inline std::string format(const Expression& e) {
  std::string out;
  expr_detail::format(e.root(), out);
  return out;
}

inline bool structurally_equal(const Expression& a, const Expression& b) {
  return expr_detail::equal(a.root(), b.root());
}

} // namespace ostop
