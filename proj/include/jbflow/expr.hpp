#pragma once

#include <cctype>
#include <cstdio>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "jbflow/blocks.hpp"
#include "jbflow/jet.hpp"

namespace jbflow {

struct parse_error : std::runtime_error {
  parse_error(const std::string& msg, std::size_t offset)
      : std::runtime_error(msg + " at offset " + std::to_string(offset)), offset(offset) {}
  std::size_t offset;
};

struct bind_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Immutable expression tree.  Coordinates are written either as a flat
/// index ("u3") or as in-block index and block label ("u2_1", meaning 2(1)).
class Expr {
public:
  enum class Kind { Number, Param, Coord, Neg, Add, Sub, Mul, Div, Pow, Call };

  Kind kind;
  double number = 0.0;
  std::string name;          // parameter or function name
  int ci = 0, calpha = 0;    // coordinate indices; calpha == 0 means flat form
  std::vector<ExprPtr> args; // children

  static ExprPtr make_number(double v) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Number;
    e->number = v;
    return e;
  }
  static ExprPtr make_param(std::string n) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Param;
    e->name = std::move(n);
    return e;
  }
  static ExprPtr make_coord(int i, int alpha) {  // alpha == 0: flat index i
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Coord;
    e->ci = i;
    e->calpha = alpha;
    return e;
  }
  static ExprPtr make(Kind k, std::vector<ExprPtr> ch, std::string nm = {}) {
    auto e = std::make_shared<Expr>();
    e->kind = k;
    e->name = std::move(nm);
    e->args = std::move(ch);
    return e;
  }

  bool is_number(double v) const { return kind == Kind::Number && number == v; }
};

namespace detail {

inline bool is_coord_name(const std::string& s, int& i, int& alpha) {
  if (s.size() < 2 || s[0] != 'u' || !std::isdigit(static_cast<unsigned char>(s[1]))) return false;
  std::size_t p = 1;
  long a = 0;
  while (p < s.size() && std::isdigit(static_cast<unsigned char>(s[p]))) a = a * 10 + (s[p++] - '0');
  if (p == s.size()) {
    i = int(a);
    alpha = 0;
    return true;
  }
  if (s[p] != '_') return false;
  ++p;
  if (p == s.size()) return false;
  long b = 0;
  while (p < s.size() && std::isdigit(static_cast<unsigned char>(s[p]))) b = b * 10 + (s[p++] - '0');
  if (p != s.size()) return false;
  i = int(a);
  alpha = int(b);
  return true;
}

inline const std::set<std::string>& builtin_functions() {
  static const std::set<std::string> fns = {"sin", "cos", "exp", "log", "sqrt", "abs", "pow"};
  return fns;
}

class Parser {
public:
  explicit Parser(const std::string& src) : s_(src) {}

  ExprPtr run() {
    skip_ws();
    if (pos_ >= s_.size()) throw parse_error("empty expression", 0);
    ExprPtr e = parse_expr();
    skip_ws();
    if (pos_ < s_.size()) throw parse_error("trailing input", pos_);
    return e;
  }

private:
  ExprPtr parse_expr() {
    ExprPtr e = parse_term();
    for (;;) {
      skip_ws();
      if (accept('+'))
        e = Expr::make(Expr::Kind::Add, {e, parse_term()});
      else if (accept('-'))
        e = Expr::make(Expr::Kind::Sub, {e, parse_term()});
      else
        return e;
    }
  }
  ExprPtr parse_term() {
    ExprPtr e = parse_factor();
    for (;;) {
      skip_ws();
      if (accept('*'))
        e = Expr::make(Expr::Kind::Mul, {e, parse_factor()});
      else if (accept('/'))
        e = Expr::make(Expr::Kind::Div, {e, parse_factor()});
      else
        return e;
    }
  }
  ExprPtr parse_factor() {
    ExprPtr b = parse_base();
    skip_ws();
    if (accept('^')) return Expr::make(Expr::Kind::Pow, {b, parse_factor()});
    return b;
  }
  ExprPtr parse_base() {
    skip_ws();
    if (pos_ >= s_.size()) throw parse_error("unexpected end of input", pos_);
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      ExprPtr e = parse_expr();
      expect(')');
      return e;
    }
    if (c == '-') {
      ++pos_;
      // ^ binds tighter than unary minus: -u1^2 == -(u1^2)
      return Expr::make(Expr::Kind::Neg, {parse_factor()});
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      std::string id = parse_ident();
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == '(') {
        if (!builtin_functions().count(id)) throw parse_error("unknown function '" + id + "'", start);
        ++pos_;
        std::vector<ExprPtr> args{parse_expr()};
        skip_ws();
        while (accept(',')) args.push_back(parse_expr());
        expect(')');
        const std::size_t arity = id == "pow" ? 2 : 1;
        if (args.size() != arity)
          throw parse_error("function '" + id + "' takes " + std::to_string(arity) + " argument(s)", start);
        return Expr::make(Expr::Kind::Call, std::move(args), id);
      }
      int i, alpha;
      if (is_coord_name(id, i, alpha)) return Expr::make_coord(i, alpha);
      return Expr::make_param(id);
    }
    throw parse_error(std::string("unexpected character '") + c + "'", pos_);
  }
  ExprPtr parse_number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t mark = pos_++;
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      } else {
        pos_ = mark;  // 'e' was the start of an identifier, not an exponent
      }
    }
    if (pos_ == start || (pos_ == start + 1 && s_[start] == '.'))
      throw parse_error("malformed number", start);
    return Expr::make_number(std::stod(s_.substr(start, pos_ - start)));
  }
  std::string parse_ident() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      ++pos_;
    return s_.substr(start, pos_ - start);
  }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    skip_ws();
    if (!accept(c)) throw parse_error(std::string("expected '") + c + "'", pos_);
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline ExprPtr parse(const std::string& src) { return detail::Parser(src).run(); }

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // trim to the shortest representation that round-trips
  for (int prec = 1; prec < 17; ++prec) {
    char probe[40];
    std::snprintf(probe, sizeof probe, "%.*g", prec, v);
    if (std::stod(probe) == v) return probe;
  }
  return buf;
}

namespace detail {
inline int precedence(Expr::Kind k) {
  switch (k) {
    case Expr::Kind::Add:
    case Expr::Kind::Sub: return 1;
    case Expr::Kind::Mul:
    case Expr::Kind::Div: return 2;
    case Expr::Kind::Neg: return 3;
    case Expr::Kind::Pow: return 4;
    default: return 5;
  }
}
}  // namespace detail

inline std::string print(const ExprPtr& e) {
  using K = Expr::Kind;
  const int p = detail::precedence(e->kind);
  auto child = [&](const ExprPtr& c, bool needs_paren) {
    std::string s = print(c);
    return needs_paren ? "(" + s + ")" : s;
  };
  switch (e->kind) {
    case K::Number: return format_number(e->number);
    case K::Param: return e->name;
    case K::Coord:
      return e->calpha == 0 ? "u" + std::to_string(e->ci)
                            : "u" + std::to_string(e->ci) + "_" + std::to_string(e->calpha);
    case K::Neg: return "-" + child(e->args[0], detail::precedence(e->args[0]->kind) < p);
    case K::Pow:
      return child(e->args[0], detail::precedence(e->args[0]->kind) <= p) + "^" +
             child(e->args[1], detail::precedence(e->args[1]->kind) < p);
    case K::Call: {
      std::string s = e->name + "(" + print(e->args[0]);
      for (std::size_t i = 1; i < e->args.size(); ++i) s += ", " + print(e->args[i]);
      return s + ")";
    }
    default: {
      const char* op = e->kind == K::Add ? " + " : e->kind == K::Sub ? " - " : e->kind == K::Mul ? "*" : "/";
      return child(e->args[0], detail::precedence(e->args[0]->kind) < p) + op +
             child(e->args[1], detail::precedence(e->args[1]->kind) <= p);
    }
  }
}

/// Global evaluation context: the block structure fixing coordinates plus the
/// named run parameters.
struct ExprEnv {
  BlockStructure bs;
  std::map<std::string, double> params;

  int resolve(const Expr& coord) const {
    if (coord.calpha == 0) {
      if (coord.ci < 1 || coord.ci > bs.n())
        throw bind_error("coordinate u" + std::to_string(coord.ci) + " out of range for n=" + std::to_string(bs.n()));
      return coord.ci;
    }
    return bs.flat_index({coord.ci, coord.calpha});
  }
};

/// Validates that every identifier resolves against the environment.
inline void bind_check(const ExprPtr& e, const ExprEnv& env) {
  switch (e->kind) {
    case Expr::Kind::Coord: env.resolve(*e); return;
    case Expr::Kind::Param:
      if (!env.params.count(e->name)) throw bind_error("unknown variable '" + e->name + "'");
      return;
    default:
      for (const auto& a : e->args) bind_check(a, env);
  }
}

namespace detail {
// 0^0 == 1; negative base needs an integer exponent.
inline double pow_eval_impl(double b, double p) {
  if (b == 0.0 && p == 0.0) return 1.0;
  if (b == 0.0 && p < 0.0) throw domain_error("zero base with negative exponent");
  if (b < 0.0 && p != std::floor(p)) throw domain_error("negative base with non-integer exponent");
  return std::pow(b, p);
}
}  // namespace detail

inline double pow_eval(double b, double p) { return detail::pow_eval_impl(b, p); }
inline Jet pow_eval(const Jet& b, const Jet& p) { return pow(b, p); }

using std::abs;
using std::cos;
using std::exp;
using std::log;
using std::sin;
using std::sqrt;

/// Evaluates over any field-like scalar (double, Jet) given per-coordinate
/// values coords[0..n-1].
template <class T>
T evaluate(const ExprPtr& e, const ExprEnv& env, const std::vector<T>& coords) {
  using K = Expr::Kind;
  switch (e->kind) {
    case K::Number: return T(e->number);
    case K::Param: {
      auto it = env.params.find(e->name);
      if (it == env.params.end()) throw bind_error("unknown variable '" + e->name + "'");
      return T(it->second);
    }
    case K::Coord: return coords[env.resolve(*e) - 1];
    case K::Neg: return -evaluate(e->args[0], env, coords);
    case K::Add: return evaluate(e->args[0], env, coords) + evaluate(e->args[1], env, coords);
    case K::Sub: return evaluate(e->args[0], env, coords) - evaluate(e->args[1], env, coords);
    case K::Mul: return evaluate(e->args[0], env, coords) * evaluate(e->args[1], env, coords);
    default: break;
  }
  try {
    if (e->kind == K::Div) {
      T num = evaluate(e->args[0], env, coords);
      T den = evaluate(e->args[1], env, coords);
      if (scalar_value(den) == 0.0) throw domain_error("division by zero");
      return num / den;
    }
    if (e->kind == K::Pow) return pow_eval(evaluate(e->args[0], env, coords), evaluate(e->args[1], env, coords));
    // Call
    if (e->name == "pow")
      return pow_eval(evaluate(e->args[0], env, coords), evaluate(e->args[1], env, coords));
    T a = evaluate(e->args[0], env, coords);
    if (e->name == "sin") return sin(a);
    if (e->name == "cos") return cos(a);
    if (e->name == "exp") return exp(a);
    if (e->name == "log") {
      if (scalar_value(a) <= 0.0) throw domain_error("log of non-positive value " + std::to_string(scalar_value(a)));
      return log(a);
    }
    if (e->name == "sqrt") {
      if (scalar_value(a) < 0.0) throw domain_error("sqrt of negative value " + std::to_string(scalar_value(a)));
      return sqrt(a);
    }
    if (e->name == "abs") return abs(a);
    throw bind_error("unknown function '" + e->name + "'");
  } catch (const domain_error& err) {
    throw domain_error(std::string(err.what()) + " in '" + print(e) + "'");
  }
}

// ---------------------------------------------------------------------------
// Symbolic differentiation with constant folding.

namespace smart {

inline ExprPtr num(double v) { return Expr::make_number(v); }

inline ExprPtr neg(ExprPtr a) {
  if (a->kind == Expr::Kind::Number) return num(-a->number);
  if (a->kind == Expr::Kind::Neg) return a->args[0];
  return Expr::make(Expr::Kind::Neg, {std::move(a)});
}
inline ExprPtr add(ExprPtr a, ExprPtr b) {
  if (a->kind == Expr::Kind::Number && b->kind == Expr::Kind::Number) return num(a->number + b->number);
  if (a->is_number(0)) return b;
  if (b->is_number(0)) return a;
  return Expr::make(Expr::Kind::Add, {std::move(a), std::move(b)});
}
inline ExprPtr sub(ExprPtr a, ExprPtr b) {
  if (a->kind == Expr::Kind::Number && b->kind == Expr::Kind::Number) return num(a->number - b->number);
  if (b->is_number(0)) return a;
  if (a->is_number(0)) return neg(std::move(b));
  return Expr::make(Expr::Kind::Sub, {std::move(a), std::move(b)});
}
inline ExprPtr mul(ExprPtr a, ExprPtr b) {
  if (a->kind == Expr::Kind::Number && b->kind == Expr::Kind::Number) return num(a->number * b->number);
  if (a->is_number(0) || b->is_number(0)) return num(0);
  if (a->is_number(1)) return b;
  if (b->is_number(1)) return a;
  return Expr::make(Expr::Kind::Mul, {std::move(a), std::move(b)});
}
inline ExprPtr div(ExprPtr a, ExprPtr b) {
  if (a->kind == Expr::Kind::Number && b->kind == Expr::Kind::Number && b->number != 0)
    return num(a->number / b->number);
  if (a->is_number(0)) return num(0);
  if (b->is_number(1)) return a;
  return Expr::make(Expr::Kind::Div, {std::move(a), std::move(b)});
}
inline ExprPtr pw(ExprPtr a, ExprPtr b) {
  if (a->kind == Expr::Kind::Number && b->kind == Expr::Kind::Number)
    return num(detail::pow_eval_impl(a->number, b->number));
  return Expr::make(Expr::Kind::Pow, {std::move(a), std::move(b)});
}
inline ExprPtr call(const std::string& name, std::vector<ExprPtr> args) {
  return Expr::make(Expr::Kind::Call, std::move(args), name);
}

}  // namespace smart

/// Constant folding only; the tree is otherwise preserved.
inline ExprPtr fold(const ExprPtr& e) {
  using K = Expr::Kind;
  switch (e->kind) {
    case K::Number:
    case K::Param:
    case K::Coord: return e;
    case K::Neg: return smart::neg(fold(e->args[0]));
    case K::Add: return smart::add(fold(e->args[0]), fold(e->args[1]));
    case K::Sub: return smart::sub(fold(e->args[0]), fold(e->args[1]));
    case K::Mul: return smart::mul(fold(e->args[0]), fold(e->args[1]));
    case K::Div: return smart::div(fold(e->args[0]), fold(e->args[1]));
    case K::Pow: return smart::pw(fold(e->args[0]), fold(e->args[1]));
    case K::Call: {
      std::vector<ExprPtr> as;
      for (const auto& a : e->args) as.push_back(fold(a));
      return smart::call(e->name, std::move(as));
    }
  }
  return e;
}

/// Exact symbolic derivative with respect to the coordinate of flat index
/// `var` (1-based).
inline ExprPtr differentiate(const ExprPtr& e, const ExprEnv& env, int var) {
  using K = Expr::Kind;
  using namespace smart;
  switch (e->kind) {
    case K::Number:
    case K::Param: return num(0);
    case K::Coord: return num(env.resolve(*e) == var ? 1 : 0);
    case K::Neg: return neg(differentiate(e->args[0], env, var));
    case K::Add: return add(differentiate(e->args[0], env, var), differentiate(e->args[1], env, var));
    case K::Sub: return sub(differentiate(e->args[0], env, var), differentiate(e->args[1], env, var));
    case K::Mul:
      return add(mul(differentiate(e->args[0], env, var), e->args[1]),
                 mul(e->args[0], differentiate(e->args[1], env, var)));
    case K::Div: {
      auto da = differentiate(e->args[0], env, var);
      auto db = differentiate(e->args[1], env, var);
      return div(sub(mul(std::move(da), e->args[1]), mul(e->args[0], std::move(db))),
                 mul(e->args[1], e->args[1]));
    }
    case K::Pow:
    case K::Call: {
      if (e->kind == K::Call && e->name != "pow") {
        auto da = differentiate(e->args[0], env, var);
        const auto& a = e->args[0];
        if (e->name == "sin") return mul(call("cos", {a}), std::move(da));
        if (e->name == "cos") return neg(mul(call("sin", {a}), std::move(da)));
        if (e->name == "exp") return mul(call("exp", {a}), std::move(da));
        if (e->name == "log") return div(std::move(da), a);
        if (e->name == "sqrt") return div(std::move(da), mul(num(2), call("sqrt", {a})));
        if (e->name == "abs") return mul(div(a, call("abs", {a})), std::move(da));
        throw bind_error("unknown function '" + e->name + "'");
      }
      const auto& a = e->args[0];
      const auto& b = e->args[1];
      auto da = differentiate(a, env, var);
      auto db = differentiate(b, env, var);
      auto make_pow = [&](ExprPtr base, ExprPtr ex) {
        return e->kind == K::Pow ? pw(std::move(base), std::move(ex))
                                 : call("pow", {std::move(base), std::move(ex)});
      };
      if (db->is_number(0))  // b effectively constant: d(a^b) = b a^(b-1) da
        return mul(mul(b, make_pow(a, sub(b, num(1)))), std::move(da));
      // general: a^b (db log a + b da / a)
      return mul(make_pow(a, b), add(mul(std::move(db), call("log", {a})), div(mul(b, std::move(da)), a)));
    }
  }
  return smart::num(0);
}

/// Coordinate variables syntactically present after constant folding,
/// reported as flat indices (1-based).
inline std::set<int> free_variables(const ExprPtr& e, const ExprEnv& env) {
  std::set<int> out;
  auto scan = [&](auto&& self, const ExprPtr& x) -> void {
    if (x->kind == Expr::Kind::Coord) {
      out.insert(env.resolve(*x));
      return;
    }
    for (const auto& a : x->args) self(self, a);
  };
  scan(scan, fold(e));
  return out;
}

/// Coordinate jets for a point: each coordinate seeded as its own variable.
inline std::vector<Jet> seed_coords(const std::vector<double>& p, int order) {
  std::vector<Jet> c;
  c.reserve(p.size());
  for (std::size_t k = 0; k < p.size(); ++k)
    c.push_back(Jet::variable(p[k], int(p.size()), order, int(k)));
  return c;
}

/// Evaluates value, gradient and Hessian by evaluating the symbolically
/// differentiated trees, so the derivatives are exact up to roundoff.
inline Jet eval_jet(const ExprPtr& e, const ExprEnv& env, const std::vector<double>& p, int order) {
  if (order < 0 || order > 2) throw std::invalid_argument("jet order must be 0, 1 or 2");
  const int n = env.bs.n();
  if (int(p.size()) != n) throw std::invalid_argument("eval_jet: point length must equal n");
  Jet out = Jet::constant(evaluate(e, env, p), n, order);
  if (order >= 1) {
    std::vector<ExprPtr> d1(n);
    for (int j = 0; j < n; ++j) {
      d1[j] = differentiate(e, env, j + 1);
      out.grad_ref(j) = evaluate(d1[j], env, p);
    }
    if (order == 2)
      for (int j = 0; j < n; ++j)
        for (int k = j; k < n; ++k) {
          const double v = evaluate(differentiate(d1[j], env, k + 1), env, p);
          out.hess_ref(j, k) = v;
          out.hess_ref(k, j) = v;
        }
  }
  return out;
}

}  // namespace jbflow
