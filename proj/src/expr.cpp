#include "mslab/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <set>

namespace mslab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_integer(double x) { return std::isfinite(x) && std::floor(x) == x && std::abs(x) < 1e6; }

// Sign of a value known to be real; zero counts as positive.
int real_sign(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::PosInf:
      return 1;
    case Value::Kind::NegInf:
      return -1;
    default:
      return v.real() < 0.0 ? -1 : 1;
  }
}

Value signed_inf(int sign) { return sign < 0 ? Value::neg_inf() : Value::pos_inf(); }

bool is_zero(const Value& v) { return v.finite() && v.complex() == Complex(0.0, 0.0); }

}  // namespace

Value::Value(double x) : Value(Complex(x, 0.0)) {}

Value::Value(Complex z) : z_(z) {
  if (std::isfinite(z.real()) && std::isfinite(z.imag())) return;
  z_ = Complex(0.0, 0.0);
  if (std::isinf(z.real()) && std::isfinite(z.imag()))
    kind_ = z.real() > 0 ? Kind::PosInf : Kind::NegInf;
  else
    kind_ = Kind::Undefined;
}

Complex Value::complex() const {
  switch (kind_) {
    case Kind::Finite:
      return z_;
    case Kind::PosInf:
      return {kInf, 0.0};
    case Kind::NegInf:
      return {-kInf, 0.0};
    case Kind::Undefined:
      break;
  }
  return {kNaN, kNaN};
}

bool Value::is_real(double rel_tol) const {
  if (infinite()) return true;
  if (!finite()) return false;
  return std::abs(z_.imag()) <= rel_tol * std::max(std::abs(z_.real()), 1e-300) || z_.imag() == 0.0;
}

Value operator+(const Value& a, const Value& b) {
  if (a.is_undefined() || b.is_undefined()) return Value::undefined();
  if (a.infinite() && b.infinite()) return a.kind() == b.kind() ? a : Value::undefined();
  if (a.infinite()) return a;
  if (b.infinite()) return b;
  return Value(a.complex() + b.complex());
}

Value operator-(const Value& a) {
  switch (a.kind()) {
    case Value::Kind::PosInf:
      return Value::neg_inf();
    case Value::Kind::NegInf:
      return Value::pos_inf();
    case Value::Kind::Undefined:
      return a;
    case Value::Kind::Finite:
      break;
  }
  return Value(-a.complex());
}

Value operator-(const Value& a, const Value& b) { return a + (-b); }

Value operator*(const Value& a, const Value& b) {
  if (a.is_undefined() || b.is_undefined()) return Value::undefined();
  if (a.finite() && b.finite()) return Value(a.complex() * b.complex());
  const Value& inf = a.infinite() ? a : b;
  const Value& other = a.infinite() ? b : a;
  if (other.infinite()) return signed_inf(real_sign(inf) * real_sign(other));
  if (is_zero(other) || !other.is_real()) return Value::undefined();
  return signed_inf(real_sign(inf) * real_sign(other));
}

Value operator/(const Value& a, const Value& b) {
  if (a.is_undefined() || b.is_undefined()) return Value::undefined();
  if (b.infinite()) return a.finite() ? Value(0.0) : Value::undefined();
  if (is_zero(b)) {
    if (is_zero(a) || !a.is_real()) return Value::undefined();
    return signed_inf(real_sign(a));
  }
  if (a.infinite()) {
    if (!b.is_real()) return Value::undefined();
    return signed_inf(real_sign(a) * real_sign(b));
  }
  return Value(a.complex() / b.complex());
}

Value pow(const Value& base, double c) {
  if (base.is_undefined()) return base;
  if (c == 0.0) return Value(1.0);
  const bool integral = is_integer(c);
  if (base.infinite()) {
    if (c < 0.0) return Value(0.0);
    if (base.kind() == Value::Kind::PosInf) return base;
    if (!integral) return Value::undefined();
    return static_cast<long long>(c) % 2 == 0 ? Value::pos_inf() : Value::neg_inf();
  }
  const Complex z = base.complex();
  if (z == Complex(0.0, 0.0)) {
    if (c > 0.0) return Value(0.0);
    if (integral && static_cast<long long>(c) % 2 != 0) return Value::undefined();
    return Value::pos_inf();
  }
  if (integral) {
    long long k = static_cast<long long>(std::abs(c));
    Complex acc(1.0, 0.0);
    Complex sq = z;
    while (k > 0) {
      if (k & 1) acc *= sq;
      sq *= sq;
      k >>= 1;
    }
    if (c < 0.0) return Value(1.0) / Value(acc);
    return Value(acc);
  }
  if (!base.is_real() || z.real() < 0.0) return Value::undefined();
  return Value(std::pow(z.real(), c));
}

Value log(const Value& x) {
  if (x.is_undefined() || x.kind() == Value::Kind::NegInf) return Value::undefined();
  if (x.kind() == Value::Kind::PosInf) return x;
  if (!x.is_real() || x.real() < 0.0) return Value::undefined();
  if (x.real() == 0.0) return Value::neg_inf();
  return Value(std::log(x.real()));
}

Value exp(const Value& x) {
  switch (x.kind()) {
    case Value::Kind::PosInf:
      return x;
    case Value::Kind::NegInf:
      return Value(0.0);
    case Value::Kind::Undefined:
      return x;
    case Value::Kind::Finite:
      break;
  }
  const Complex z = x.complex();
  if (z.imag() == 0.0) return Value(std::exp(z.real()));
  return Value(std::exp(z));
}

namespace {

// Total order on real extended values; returns nullopt-like flag via bool.
bool real_less(const Value& a, const Value& b) {
  auto rank = [](const Value& v) {
    if (v.kind() == Value::Kind::NegInf) return -1;
    if (v.kind() == Value::Kind::PosInf) return 1;
    return 0;
  };
  if (rank(a) != rank(b)) return rank(a) < rank(b);
  if (rank(a) != 0) return false;
  return a.real() < b.real();
}

}  // namespace

Value min(const Value& a, const Value& b) {
  if (!a.is_real() || !b.is_real()) return Value::undefined();
  return real_less(b, a) ? (b.finite() ? Value(b.real()) : b) : (a.finite() ? Value(a.real()) : a);
}

Value max(const Value& a, const Value& b) {
  if (!a.is_real() || !b.is_real()) return Value::undefined();
  return real_less(a, b) ? (b.finite() ? Value(b.real()) : b) : (a.finite() ? Value(a.real()) : a);
}

Value abs2(const Value& x) {
  if (x.is_undefined()) return x;
  if (x.infinite()) return Value::pos_inf();
  return Value(std::norm(x.complex()));
}

Value conj(const Value& x) {
  if (!x.finite()) return x;
  return Value(std::conj(x.complex()));
}

Value re(const Value& x) {
  if (!x.finite()) return x;
  return Value(x.complex().real());
}

Value im(const Value& x) {
  if (x.is_undefined()) return x;
  if (x.infinite()) return Value(0.0);
  return Value(x.complex().imag());
}

// ---------------------------------------------------------------------------
// Expr

namespace {

std::shared_ptr<const Node> make_node(Op op, std::vector<std::shared_ptr<const Node>> args) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->args = std::move(args);
  return n;
}

Value eval_node(const Node& n, const Point& z, const Params& params) {
  switch (n.op) {
    case Op::Coord:
      if (n.coord >= static_cast<std::size_t>(z.size()))
        throw EvalError("coordinate z" + std::to_string(n.coord + 1) + " used at a point of dimension " +
                        std::to_string(z.size()));
      return Value(z[static_cast<Eigen::Index>(n.coord)]);
    case Op::Literal:
      return Value(n.literal);
    case Op::Param: {
      auto it = params.find(n.name);
      if (it == params.end()) throw EvalError("unbound parameter '" + n.name + "'");
      return Value(it->second);
    }
    case Op::Neg:
      return -eval_node(*n.args[0], z, params);
    case Op::Add:
      return eval_node(*n.args[0], z, params) + eval_node(*n.args[1], z, params);
    case Op::Sub:
      return eval_node(*n.args[0], z, params) - eval_node(*n.args[1], z, params);
    case Op::Mul:
      return eval_node(*n.args[0], z, params) * eval_node(*n.args[1], z, params);
    case Op::Div:
      return eval_node(*n.args[0], z, params) / eval_node(*n.args[1], z, params);
    case Op::Pow:
      return pow(eval_node(*n.args[0], z, params), n.exponent);
    case Op::Log:
      return log(eval_node(*n.args[0], z, params));
    case Op::Exp:
      return exp(eval_node(*n.args[0], z, params));
    case Op::Min:
      return min(eval_node(*n.args[0], z, params), eval_node(*n.args[1], z, params));
    case Op::Max:
      return max(eval_node(*n.args[0], z, params), eval_node(*n.args[1], z, params));
    case Op::Abs2:
      return abs2(eval_node(*n.args[0], z, params));
    case Op::Conj:
      return conj(eval_node(*n.args[0], z, params));
    case Op::Re:
      return re(eval_node(*n.args[0], z, params));
    case Op::Im:
      return im(eval_node(*n.args[0], z, params));
  }
  return Value::undefined();
}

bool nodes_equal(const Node& a, const Node& b) {
  if (a.op != b.op || a.args.size() != b.args.size()) return false;
  switch (a.op) {
    case Op::Coord:
      return a.coord == b.coord;
    case Op::Literal:
      return a.literal == b.literal;
    case Op::Param:
      return a.name == b.name;
    case Op::Pow:
      if (a.exponent != b.exponent) return false;
      break;
    default:
      break;
  }
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (a.args[i] != b.args[i] && !nodes_equal(*a.args[i], *b.args[i])) return false;
  return true;
}

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  std::string s(buf);
  return x < 0 ? "(" + s + ")" : s;
}

const char* function_name(Op op) {
  switch (op) {
    case Op::Log:
      return "log";
    case Op::Exp:
      return "exp";
    case Op::Min:
      return "min";
    case Op::Max:
      return "max";
    case Op::Abs2:
      return "abs2";
    case Op::Conj:
      return "conj";
    case Op::Re:
      return "re";
    case Op::Im:
      return "im";
    default:
      return "?";
  }
}

void print_node(const Node& n, std::string& out) {
  auto binary = [&](const char* sym) {
    out += '(';
    print_node(*n.args[0], out);
    out += sym;
    print_node(*n.args[1], out);
    out += ')';
  };
  switch (n.op) {
    case Op::Coord:
      out += "z" + std::to_string(n.coord + 1);
      return;
    case Op::Literal:
      if (n.literal.imag() == 0.0) {
        out += format_number(n.literal.real());
      } else {
        char buf[96];
        std::snprintf(buf, sizeof buf, "complex(%.17g, %.17g)", n.literal.real(), n.literal.imag());
        out += buf;
      }
      return;
    case Op::Param:
      out += n.name;
      return;
    case Op::Neg:
      out += "(-";
      print_node(*n.args[0], out);
      out += ')';
      return;
    case Op::Add:
      return binary(" + ");
    case Op::Sub:
      return binary(" - ");
    case Op::Mul:
      return binary(" * ");
    case Op::Div:
      return binary(" / ");
    case Op::Pow:
      out += '(';
      print_node(*n.args[0], out);
      out += ")^";
      out += format_number(n.exponent);
      return;
    default:
      out += function_name(n.op);
      out += '(';
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i) out += ", ";
        print_node(*n.args[i], out);
      }
      out += ')';
      return;
  }
}

void collect(const Node& n, std::size_t& arity, std::set<std::string>& params) {
  if (n.op == Op::Coord) arity = std::max(arity, n.coord + 1);
  if (n.op == Op::Param) params.insert(n.name);
  for (const auto& a : n.args) collect(*a, arity, params);
}

}  // namespace

Expr::Expr() : Expr(constant(0.0)) {}

Expr::Expr(std::shared_ptr<const Node> root) : root_(std::move(root)) {}

Expr Expr::constant(Complex c) {
  auto n = std::make_shared<Node>();
  n->op = Op::Literal;
  n->literal = c;
  return Expr(std::move(n));
}

Expr Expr::coordinate(std::size_t zero_based) {
  auto n = std::make_shared<Node>();
  n->op = Op::Coord;
  n->coord = zero_based;
  return Expr(std::move(n));
}

Expr Expr::parameter(std::string name) {
  auto n = std::make_shared<Node>();
  n->op = Op::Param;
  n->name = std::move(name);
  return Expr(std::move(n));
}

std::size_t Expr::arity() const {
  std::size_t a = 0;
  std::set<std::string> p;
  collect(*root_, a, p);
  return a;
}

std::vector<std::string> Expr::parameters() const {
  std::size_t a = 0;
  std::set<std::string> p;
  collect(*root_, a, p);
  return {p.begin(), p.end()};
}

bool Expr::is_constant() const { return arity() == 0 && parameters().empty(); }

Value Expr::eval(const Point& z, const Params& params) const { return eval_node(*root_, z, params); }

std::string Expr::to_string() const {
  std::string out;
  print_node(*root_, out);
  return out;
}

bool operator==(const Expr& a, const Expr& b) { return a.root_ == b.root_ || nodes_equal(*a.root_, *b.root_); }

Expr operator+(const Expr& a, const Expr& b) { return Expr(make_node(Op::Add, {a.node(), b.node()})); }
Expr operator-(const Expr& a, const Expr& b) { return Expr(make_node(Op::Sub, {a.node(), b.node()})); }
Expr operator-(const Expr& a) {
  if (a.root().op == Op::Literal) return Expr::constant(-a.root().literal);
  return Expr(make_node(Op::Neg, {a.node()}));
}
Expr operator*(const Expr& a, const Expr& b) { return Expr(make_node(Op::Mul, {a.node(), b.node()})); }
Expr operator/(const Expr& a, const Expr& b) { return Expr(make_node(Op::Div, {a.node(), b.node()})); }
Expr pow(const Expr& base, double exponent) {
  auto n = std::make_shared<Node>();
  n->op = Op::Pow;
  n->exponent = exponent;
  n->args = {base.node()};
  return Expr(std::move(n));
}
Expr log(const Expr& x) { return Expr(make_node(Op::Log, {x.node()})); }
Expr exp(const Expr& x) { return Expr(make_node(Op::Exp, {x.node()})); }
Expr min(const Expr& a, const Expr& b) { return Expr(make_node(Op::Min, {a.node(), b.node()})); }
Expr max(const Expr& a, const Expr& b) { return Expr(make_node(Op::Max, {a.node(), b.node()})); }
Expr abs2(const Expr& x) { return Expr(make_node(Op::Abs2, {x.node()})); }
Expr conj(const Expr& x) { return Expr(make_node(Op::Conj, {x.node()})); }
Expr re(const Expr& x) { return Expr(make_node(Op::Re, {x.node()})); }
Expr im(const Expr& x) { return Expr(make_node(Op::Im, {x.node()})); }

// ---------------------------------------------------------------------------
// Parser: recursive descent over the grammar in docs/grammar.md.

ParseError::ParseError(const std::string& what, std::size_t position)
    : std::runtime_error(what + " at position " + std::to_string(position)), position_(position) {}

namespace {

class Parser {
 public:
  Parser(std::string_view text, const ParseOptions& options) : s_(text), opt_(options) {}

  Expr run() {
    Expr e = expression();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

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

  Expr expression() {
    Expr lhs = term();
    for (;;) {
      if (accept('+'))
        lhs = lhs + term();
      else if (accept('-'))
        lhs = lhs - term();
      else
        return lhs;
    }
  }

  Expr term() {
    Expr lhs = unary();
    for (;;) {
      if (accept('*'))
        lhs = lhs * unary();
      else if (accept('/'))
        lhs = lhs / unary();
      else
        return lhs;
    }
  }

  Expr unary() {
    if (accept('+')) return unary();
    if (accept('-')) {
      Expr operand = unary();
      // Negation folds into numeric literals so printed literals re-parse
      // to the same tree.
      return -operand;
    }
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (accept('^')) {
      const std::size_t at = pos_;
      double e = exponent();
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == '^') {
        pos_ = at;
        fail("chained powers need parentheses");
      }
      return pow(base, e);
    }
    return base;
  }

  double exponent() {
    skip_ws();
    const std::size_t at = pos_;
    Expr e = unary_exponent();
    if (!e.is_constant() || e.root().literal.imag() != 0.0) {
      pos_ = at;
      fail("non-constant exponent");
    }
    return e.root().literal.real();
  }

  // Exponents: signed number, or a parenthesised expression that folds to a
  // real constant.
  Expr unary_exponent() {
    if (accept('+')) return unary_exponent();
    if (accept('-')) {
      Expr e = unary_exponent();
      return Expr::constant(-e.root().literal);
    }
    skip_ws();
    const std::size_t at = pos_;
    Expr e = (pos_ < s_.size() && s_[pos_] == '(') ? (expect('('), paren_rest()) : primary();
    Value v;
    if (!e.is_constant()) {
      pos_ = at;
      fail("non-constant exponent");
    }
    v = e.eval(Point());
    if (!v.finite() || v.imag() != 0.0) {
      pos_ = at;
      fail("non-constant exponent");
    }
    return Expr::constant(v.real());
  }

  Expr paren_rest() {
    Expr e = expression();
    expect(')');
    return e;
  }

  Expr primary() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      return paren_rest();
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  Expr number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < s_.size() && (s_[p] == '+' || s_[p] == '-')) ++p;
      if (p < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p]))) {
        pos_ = p;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      }
    }
    const std::string token(s_.substr(start, pos_ - start));
    char* end = nullptr;
    const double x = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size()) {
      pos_ = start;
      fail("malformed number '" + token + "'");
    }
    if (pos_ < s_.size() && s_[pos_] == 'i' &&
        (pos_ + 1 == s_.size() || !std::isalnum(static_cast<unsigned char>(s_[pos_ + 1])))) {
      ++pos_;
      return Expr::constant(Complex(0.0, x));
    }
    return Expr::constant(x);
  }

  Expr identifier() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    const std::string id(s_.substr(start, pos_ - start));
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == '(') {
      ++pos_;
      return call(id, start);
    }
    if (id == "i") return Expr::constant(Complex(0.0, 1.0));
    if (id == "pi") return Expr::constant(std::numbers::pi);
    if (id.size() >= 2 && id[0] == 'z' && std::all_of(id.begin() + 1, id.end(), [](char ch) {
          return std::isdigit(static_cast<unsigned char>(ch));
        })) {
      const unsigned long k = std::stoul(id.substr(1));
      if (k == 0) {
        pos_ = start;
        fail("coordinates are numbered from z1");
      }
      if (opt_.dimension != 0 && k > opt_.dimension) {
        pos_ = start;
        fail("coordinate " + id + " exceeds dimension " + std::to_string(opt_.dimension));
      }
      return Expr::coordinate(k - 1);
    }
    if (opt_.restrict_parameters &&
        std::find(opt_.allowed_parameters.begin(), opt_.allowed_parameters.end(), id) ==
            opt_.allowed_parameters.end()) {
      pos_ = start;
      fail("unknown identifier '" + id + "'");
    }
    return Expr::parameter(id);
  }

  Expr call(const std::string& fname, std::size_t at) {
    std::vector<Expr> args;
    if (!accept(')')) {
      do {
        args.push_back(expression());
      } while (accept(','));
      expect(')');
    }
    auto want = [&](std::size_t n) {
      if (args.size() != n) {
        pos_ = at;
        fail(fname + " takes " + std::to_string(n) + " argument(s)");
      }
    };
    if (fname == "log") return want(1), log(args[0]);
    if (fname == "exp") return want(1), exp(args[0]);
    if (fname == "abs2") return want(1), abs2(args[0]);
    if (fname == "conj") return want(1), conj(args[0]);
    if (fname == "re") return want(1), re(args[0]);
    if (fname == "im") return want(1), im(args[0]);
    if (fname == "min") return want(2), min(args[0], args[1]);
    if (fname == "max") return want(2), max(args[0], args[1]);
    if (fname == "complex") {
      want(2);
      if (args[0].root().op != Op::Literal || args[1].root().op != Op::Literal ||
          args[0].root().literal.imag() != 0.0 || args[1].root().literal.imag() != 0.0) {
        pos_ = at;
        fail("complex() takes two real numeric literals");
      }
      return Expr::constant(Complex(args[0].root().literal.real(), args[1].root().literal.real()));
    }
    pos_ = at;
    fail("unknown function '" + fname + "'");
  }

  std::string_view s_;
  const ParseOptions& opt_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse_expr(std::string_view text, const ParseOptions& options) { return Parser(text, options).run(); }

}  // namespace mslab
