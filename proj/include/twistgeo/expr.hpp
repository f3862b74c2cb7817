#pragma once

// Scalar expression language used for metric entries, scale functions,
// torsion components, and vector fields.  Grammar (documented in README):
//
//   expr   := term (('+' | '-') term)*
//   term   := factor (('*' | '/') factor)*
//   factor := ('-' | '+')? base ('^' ('-')? number)?
//   base   := number | ident | '(' expr ')' | func '(' expr ')'
//   func   := exp | log | sin | cos | sqrt
//   number := digit+ ('.' digit*)? (('e'|'E') ('+'|'-')? digit+)?
//
// Exponents are constant numbers.  Parse and binding errors carry byte
// offsets into the source string.

#include "twistgeo/poly.hpp"

#include <Eigen/Dense>

#include <cctype>
#include <cmath>
#include <string>
#include <vector>

namespace twistgeo {

struct ParseError : std::runtime_error {
  size_t offset;
  ParseError(const std::string& msg, size_t off)
      : std::runtime_error(msg + " (offset " + std::to_string(off) + ")"), offset(off) {}
};

struct BindError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ExprOp { Const, Var, Add, Sub, Mul, Div, Neg, Pow, Exp, Log, Sin, Cos, Sqrt };

struct ExprNode {
  ExprOp op;
  double cval = 0.0;  // Const value, or Pow exponent
  int var = -1;       // Var slot in the scope
  int a = -1, b = -1; // child indices
};

class Expr {
public:
  Expr() = default;

  static Expr parse(const std::string& src, const std::vector<std::string>& scope) {
    Expr e;
    e.src_ = src;
    e.scope_ = scope;
    Parser p{src, scope, e.nodes_};
    e.root_ = p.parse_expr();
    p.skip_ws();
    if (p.pos != src.size()) throw ParseError("unexpected trailing input", p.pos);
    e.uses_.assign(scope.size(), false);
    for (const auto& n : e.nodes_)
      if (n.op == ExprOp::Var) e.uses_[static_cast<size_t>(n.var)] = true;
    return e;
  }

  const std::string& source() const { return src_; }
  const std::vector<std::string>& scope() const { return scope_; }
  bool valid() const { return root_ >= 0; }
  bool uses(int slot) const { return uses_[static_cast<size_t>(slot)]; }
  bool uses_any(int lo, int hi) const {  // [lo, hi)
    for (int s = lo; s < hi; ++s)
      if (uses_[static_cast<size_t>(s)]) return true;
    return false;
  }

  double eval(const Eigen::VectorXd& vars) const {
    return eval_node<double>(root_, [&](int slot) { return vars[slot]; },
                             [](double v) { return v; });
  }

  // Evaluate over jet scalars; vars[i] must share one basis.
  TruncPoly eval_poly(const std::vector<TruncPoly>& vars) const {
    auto basis = vars.at(0).basis();
    return eval_node<TruncPoly>(
        root_, [&](int slot) { return vars[static_cast<size_t>(slot)]; },
        [&](double v) { return TruncPoly::constant(basis, v); });
  }

private:
  template <class T, class VarFn, class ConstFn>
  T eval_node(int idx, const VarFn& var, const ConstFn& cnst) const {
    const ExprNode& n = nodes_[static_cast<size_t>(idx)];
    switch (n.op) {
      case ExprOp::Const: return cnst(n.cval);
      case ExprOp::Var: return var(n.var);
      case ExprOp::Add: return eval_node<T>(n.a, var, cnst) + eval_node<T>(n.b, var, cnst);
      case ExprOp::Sub: return eval_node<T>(n.a, var, cnst) - eval_node<T>(n.b, var, cnst);
      case ExprOp::Mul: return eval_node<T>(n.a, var, cnst) * eval_node<T>(n.b, var, cnst);
      case ExprOp::Div: return eval_node<T>(n.a, var, cnst) / eval_node<T>(n.b, var, cnst);
      case ExprOp::Neg: return -eval_node<T>(n.a, var, cnst);
      case ExprOp::Pow: {
        using std::pow;
        return pow(eval_node<T>(n.a, var, cnst), n.cval);
      }
      case ExprOp::Exp: {
        using std::exp;
        return exp(eval_node<T>(n.a, var, cnst));
      }
      case ExprOp::Log: {
        using std::log;
        T v = eval_node<T>(n.a, var, cnst);
        check_positive(v, "log");
        return log(v);
      }
      case ExprOp::Sin: {
        using std::sin;
        return sin(eval_node<T>(n.a, var, cnst));
      }
      case ExprOp::Cos: {
        using std::cos;
        return cos(eval_node<T>(n.a, var, cnst));
      }
      case ExprOp::Sqrt: {
        using std::sqrt;
        T v = eval_node<T>(n.a, var, cnst);
        check_positive(v, "sqrt");
        return sqrt(v);
      }
    }
    throw std::logic_error("unreachable");
  }

  static void check_positive(double v, const char* what) {
    if (v <= 0.0) throw DomainError(std::string(what) + " of non-positive value");
  }
  static void check_positive(const TruncPoly&, const char*) {}  // TruncPoly ops check themselves

  struct Parser {
    const std::string& s;
    const std::vector<std::string>& scope;
    std::vector<ExprNode>& nodes;
    size_t pos = 0;

    void skip_ws() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool eat(char c) {
      skip_ws();
      if (pos < s.size() && s[pos] == c) { ++pos; return true; }
      return false;
    }
    char peek() {
      skip_ws();
      return pos < s.size() ? s[pos] : '\0';
    }
    int add(ExprNode n) {
      nodes.push_back(n);
      return static_cast<int>(nodes.size()) - 1;
    }

    int parse_expr() {
      int lhs = parse_term();
      for (;;) {
        if (eat('+')) lhs = add({ExprOp::Add, 0, -1, lhs, parse_term()});
        else if (eat('-')) lhs = add({ExprOp::Sub, 0, -1, lhs, parse_term()});
        else return lhs;
      }
    }

    int parse_term() {
      int lhs = parse_factor();
      for (;;) {
        if (eat('*')) lhs = add({ExprOp::Mul, 0, -1, lhs, parse_factor()});
        else if (eat('/')) lhs = add({ExprOp::Div, 0, -1, lhs, parse_factor()});
        else return lhs;
      }
    }

    int parse_factor() {
      bool neg = false;
      skip_ws();
      if (peek() == '-') { ++pos; neg = true; }
      else if (peek() == '+') ++pos;
      int b = parse_base();
      if (eat('^')) {
        double sign = eat('-') ? -1.0 : 1.0;
        skip_ws();
        size_t at = pos;
        double num = parse_number_token(at);
        b = add({ExprOp::Pow, sign * num, -1, b, -1});
      }
      return neg ? add({ExprOp::Neg, 0, -1, b, -1}) : b;
    }

    int parse_base() {
      skip_ws();
      if (pos >= s.size()) throw ParseError("unexpected end of expression", pos);
      char c = s[pos];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        size_t at = pos;
        return add({ExprOp::Const, parse_number_token(at), -1, -1, -1});
      }
      if (c == '(') {
        ++pos;
        int e = parse_expr();
        if (!eat(')')) throw ParseError("expected ')'", pos);
        return e;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        size_t start = pos;
        while (pos < s.size() &&
               (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
          ++pos;
        std::string name = s.substr(start, pos - start);
        ExprOp fn;
        if (name == "exp") fn = ExprOp::Exp;
        else if (name == "log") fn = ExprOp::Log;
        else if (name == "sin") fn = ExprOp::Sin;
        else if (name == "cos") fn = ExprOp::Cos;
        else if (name == "sqrt") fn = ExprOp::Sqrt;
        else {
          for (size_t i = 0; i < scope.size(); ++i)
            if (scope[i] == name) return add({ExprOp::Var, 0, static_cast<int>(i), -1, -1});
          throw BindError("unknown identifier '" + name + "' at offset " + std::to_string(start) +
                          " (scope: " + join(scope) + ")");
        }
        if (!eat('(')) throw ParseError("expected '(' after function name", pos);
        int a = parse_expr();
        if (!eat(')')) throw ParseError("expected ')'", pos);
        return add({fn, 0, -1, a, -1});
      }
      throw ParseError(std::string("unexpected character '") + c + "'", pos);
    }

    // number := digit+ ('.' digit*)? (('e'|'E') ('+'|'-')? digit+)?
    double parse_number_token(size_t& at) {
      pos = at;
      size_t start = pos;
      bool any = false;
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) { ++pos; any = true; }
      if (pos < s.size() && s[pos] == '.') {
        ++pos;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) { ++pos; any = true; }
      }
      if (!any) throw ParseError("expected number", start);
      if (pos < s.size() && (s[pos] == 'e' || s[pos] == 'E')) {
        size_t mark = pos;
        ++pos;
        if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) ++pos;
        if (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
          while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
        } else {
          pos = mark;  // 'e' belonged to something else
        }
      }
      return std::stod(s.substr(start, pos - start));
    }

    static std::string join(const std::vector<std::string>& v) {
      std::string out;
      for (size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
      return out;
    }
  };

  std::vector<ExprNode> nodes_;
  int root_ = -1;
  std::string src_;
  std::vector<std::string> scope_;
  std::vector<bool> uses_;
};

}  // namespace twistgeo
