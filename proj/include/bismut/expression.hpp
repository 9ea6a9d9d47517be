#pragma once

// Tiny arithmetic-expression language used for the conformal factor of
// conformal_plane models and for user-supplied test functions.
//
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := '-' unary | '+' unary | primary
//   primary:= number | identifier | call | '(' expr ')'
//   call   := ('pow' | 'sin' | 'cos' | 'exp') '(' expr [',' expr] ')'
//
// Identifiers resolve either to a variable slot or to a named parameter
// (substituted as a constant). Expressions are immutable DAGs and can be
// differentiated symbolically.

#include <bismut/errors.hpp>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bismut {

class Expr {
public:
  enum class Op { constant, variable, add, sub, mul, div, neg, pow, sin, cos, exp, log };

  Expr() : node_(make_const(0.0)) {}
  static Expr constant(double c) { return Expr(make_const(c)); }
  static Expr variable(int slot) {
    auto n = std::make_shared<Node>();
    n->op = Op::variable;
    n->slot = slot;
    return Expr(std::move(n));
  }

  /// Parse `text`. `variables[i]` names slot i; `params` are constants.
  static Expr parse(std::string_view text, const std::vector<std::string>& variables,
                    const std::map<std::string, double>& params = {});

  double eval(std::span<const double> vars) const { return eval_node(*node_, vars); }

  /// Symbolic partial derivative with respect to variable `slot`.
  Expr diff(int slot) const { return Expr(diff_node(node_, slot)); }

  bool is_constant() const { return node_->op == Op::constant; }
  double constant_value() const { return node_->value; }

  friend Expr operator+(const Expr& a, const Expr& b) { return Expr(add(a.node_, b.node_)); }
  friend Expr operator-(const Expr& a, const Expr& b) { return Expr(sub(a.node_, b.node_)); }
  friend Expr operator*(const Expr& a, const Expr& b) { return Expr(mul(a.node_, b.node_)); }
  friend Expr operator/(const Expr& a, const Expr& b) { return Expr(div(a.node_, b.node_)); }

private:
  struct Node;
  using NodePtr = std::shared_ptr<const Node>;
  struct Node {
    Op op = Op::constant;
    double value = 0.0;
    int slot = -1;
    NodePtr a, b;
  };

  explicit Expr(NodePtr n) : node_(std::move(n)) {}

  static NodePtr make_const(double c) {
    auto n = std::make_shared<Node>();
    n->value = c;
    return n;
  }
  static NodePtr make(Op op, NodePtr a, NodePtr b = nullptr) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
  }
  static bool is_const(const NodePtr& n, double c) {
    return n->op == Op::constant && n->value == c;
  }

  // Builders with light constant folding so derivative trees stay small.
  static NodePtr add(NodePtr a, NodePtr b) {
    if (is_const(a, 0.0)) return b;
    if (is_const(b, 0.0)) return a;
    if (a->op == Op::constant && b->op == Op::constant) return make_const(a->value + b->value);
    return make(Op::add, std::move(a), std::move(b));
  }
  static NodePtr sub(NodePtr a, NodePtr b) {
    if (is_const(b, 0.0)) return a;
    if (is_const(a, 0.0)) return neg(std::move(b));
    if (a->op == Op::constant && b->op == Op::constant) return make_const(a->value - b->value);
    return make(Op::sub, std::move(a), std::move(b));
  }
  static NodePtr mul(NodePtr a, NodePtr b) {
    if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
    if (is_const(a, 1.0)) return b;
    if (is_const(b, 1.0)) return a;
    if (a->op == Op::constant && b->op == Op::constant) return make_const(a->value * b->value);
    return make(Op::mul, std::move(a), std::move(b));
  }
  static NodePtr div(NodePtr a, NodePtr b) {
    if (is_const(a, 0.0)) return make_const(0.0);
    if (is_const(b, 1.0)) return a;
    if (a->op == Op::constant && b->op == Op::constant) return make_const(a->value / b->value);
    return make(Op::div, std::move(a), std::move(b));
  }
  static NodePtr neg(NodePtr a) {
    if (a->op == Op::constant) return make_const(-a->value);
    if (a->op == Op::neg) return a->a;
    return make(Op::neg, std::move(a));
  }
  static NodePtr unary(Op op, NodePtr a) {
    if (a->op == Op::constant) {
      const double x = a->value;
      switch (op) {
        case Op::sin: return make_const(std::sin(x));
        case Op::cos: return make_const(std::cos(x));
        case Op::exp: return make_const(std::exp(x));
        case Op::log: return make_const(std::log(x));
        default: break;
      }
    }
    return make(op, std::move(a));
  }
  static NodePtr power(NodePtr a, NodePtr b) {
    if (is_const(b, 0.0)) return make_const(1.0);
    if (is_const(b, 1.0)) return a;
    if (a->op == Op::constant && b->op == Op::constant)
      return make_const(std::pow(a->value, b->value));
    return make(Op::pow, std::move(a), std::move(b));
  }

  static double eval_node(const Node& n, std::span<const double> v) {
    switch (n.op) {
      case Op::constant: return n.value;
      case Op::variable: return v[static_cast<std::size_t>(n.slot)];
      case Op::add: return eval_node(*n.a, v) + eval_node(*n.b, v);
      case Op::sub: return eval_node(*n.a, v) - eval_node(*n.b, v);
      case Op::mul: return eval_node(*n.a, v) * eval_node(*n.b, v);
      case Op::div: return eval_node(*n.a, v) / eval_node(*n.b, v);
      case Op::neg: return -eval_node(*n.a, v);
      case Op::pow: return ipow_or_pow(eval_node(*n.a, v), *n.b, v);
      case Op::sin: return std::sin(eval_node(*n.a, v));
      case Op::cos: return std::cos(eval_node(*n.a, v));
      case Op::exp: return std::exp(eval_node(*n.a, v));
      case Op::log: return std::log(eval_node(*n.a, v));
    }
    return 0.0;
  }

  static double ipow_or_pow(double base, const Node& e, std::span<const double> v) {
    if (e.op == Op::constant) {
      const double p = e.value;
      if (p == std::floor(p) && std::abs(p) <= 16) {
        double r = 1.0;
        const int k = static_cast<int>(std::abs(p));
        for (int i = 0; i < k; ++i) r *= base;
        return p < 0 ? 1.0 / r : r;
      }
      return std::pow(base, p);
    }
    return std::pow(base, eval_node(e, v));
  }

  static NodePtr diff_node(const NodePtr& n, int s) {
    switch (n->op) {
      case Op::constant: return make_const(0.0);
      case Op::variable: return make_const(n->slot == s ? 1.0 : 0.0);
      case Op::add: return add(diff_node(n->a, s), diff_node(n->b, s));
      case Op::sub: return sub(diff_node(n->a, s), diff_node(n->b, s));
      case Op::mul:
        return add(mul(diff_node(n->a, s), n->b), mul(n->a, diff_node(n->b, s)));
      case Op::div: {
        // (a/b)' = a'/b - a b' / b^2
        auto da = diff_node(n->a, s);
        auto db = diff_node(n->b, s);
        return sub(div(da, n->b), div(mul(n->a, db), mul(n->b, n->b)));
      }
      case Op::neg: return neg(diff_node(n->a, s));
      case Op::sin: return mul(unary(Op::cos, n->a), diff_node(n->a, s));
      case Op::cos: return neg(mul(unary(Op::sin, n->a), diff_node(n->a, s)));
      case Op::exp: return mul(n, diff_node(n->a, s));
      case Op::log: return div(diff_node(n->a, s), n->a);
      case Op::pow: {
        auto da = diff_node(n->a, s);
        if (n->b->op == Op::constant) {
          const double p = n->b->value;
          return mul(mul(make_const(p), power(n->a, make_const(p - 1.0))), da);
        }
        // d a^b = a^b (b' log a + b a'/a)
        auto db = diff_node(n->b, s);
        return mul(n, add(mul(db, unary(Op::log, n->a)), div(mul(n->b, da), n->a)));
      }
    }
    return make_const(0.0);
  }

  class Parser;
  NodePtr node_;
};

class Expr::Parser {
public:
  Parser(std::string_view text, const std::vector<std::string>& vars,
         const std::map<std::string, double>& params)
      : s_(text), vars_(vars), params_(params) {}

  NodePtr parse_all() {
    auto n = parse_expr();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
    return n;
  }

private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ValidationError("expression error at offset " + std::to_string(pos_) + ": " + msg +
                          " in \"" + std::string(s_) + "\"");
  }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  NodePtr parse_expr() {
    auto lhs = parse_term();
    for (;;) {
      if (accept('+')) lhs = add(lhs, parse_term());
      else if (accept('-')) lhs = sub(lhs, parse_term());
      else return lhs;
    }
  }
  NodePtr parse_term() {
    auto lhs = parse_unary();
    for (;;) {
      if (accept('*')) lhs = mul(lhs, parse_unary());
      else if (accept('/')) lhs = div(lhs, parse_unary());
      else return lhs;
    }
  }
  NodePtr parse_unary() {
    if (accept('-')) return neg(parse_unary());
    if (accept('+')) return parse_unary();
    return parse_primary();
  }
  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (accept('(')) {
      auto n = parse_expr();
      expect(')');
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
        ++pos_;
      const std::string name(s_.substr(start, pos_ - start));
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == '(') return parse_call(name);
      for (std::size_t i = 0; i < vars_.size(); ++i)
        if (vars_[i] == name) return variable(static_cast<int>(i)).node_;
      if (auto it = params_.find(name); it != params_.end()) return make_const(it->second);
      fail("unknown identifier '" + name + "'");
    }
    fail(std::string("unexpected character '") + c + "'");
  }
  NodePtr parse_number() {
    const std::string tail(s_.substr(pos_));
    char* end = nullptr;
    const double v = std::strtod(tail.c_str(), &end);
    if (end == tail.c_str()) fail("bad number");
    pos_ += static_cast<std::size_t>(end - tail.c_str());
    return make_const(v);
  }
  NodePtr parse_call(const std::string& name) {
    expect('(');
    auto a = parse_expr();
    if (name == "pow") {
      expect(',');
      auto b = parse_expr();
      expect(')');
      return power(a, b);
    }
    expect(')');
    if (name == "sin") return unary(Op::sin, a);
    if (name == "cos") return unary(Op::cos, a);
    if (name == "exp") return unary(Op::exp, a);
    fail("unknown function '" + name + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  const std::vector<std::string>& vars_;
  const std::map<std::string, double>& params_;
};

inline Expr Expr::parse(std::string_view text, const std::vector<std::string>& variables,
                        const std::map<std::string, double>& params) {
  Parser p(text, variables, params);
  return Expr(p.parse_all());
}

/// Parse an expression over ambient coordinates. Slot i is named "x{i+1}";
/// the first three slots also answer to "x", "y", "z" unless a parameter
/// of that name shadows them.
inline Expr coordinate_expr(std::string_view text, int ambient_dim,
                            const std::map<std::string, double>& params = {}) {
  std::vector<std::string> names;
  for (int i = 0; i < ambient_dim; ++i) names.push_back("x" + std::to_string(i + 1));
  static const char* const alias[] = {"x", "y", "z"};
  std::string rewritten;
  rewritten.reserve(text.size() + 8);
  for (std::size_t i = 0; i < text.size();) {
    const char c = text[i];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_'))
        ++j;
      std::string tok(text.substr(i, j - i));
      for (int a = 0; a < 3 && a < ambient_dim; ++a)
        if (tok == alias[a] && !params.contains(tok)) tok = "x" + std::to_string(a + 1);
      rewritten += tok;
      i = j;
    } else {
      rewritten += c;
      ++i;
    }
  }
  return Expr::parse(rewritten, names, params);
}

} // namespace bismut
