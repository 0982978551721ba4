#ifndef MSLAB_EXPR_HPP
#define MSLAB_EXPR_HPP

#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace mslab {

using Complex = std::complex<double>;
using Point = Eigen::VectorXcd;
using Params = std::map<std::string, double, std::less<>>;

/// Extended complex value. Infinities are always real (signed); anything that
/// cannot be given a meaning (0*inf, log of a negative number, ...) is
/// Undefined. Evaluation never throws on domain errors, it returns a tag.
class Value {
 public:
  enum class Kind { Finite, PosInf, NegInf, Undefined };

  Value() = default;
  Value(double x);
  Value(Complex z);

  static Value pos_inf() { return Value(Kind::PosInf); }
  static Value neg_inf() { return Value(Kind::NegInf); }
  static Value undefined() { return Value(Kind::Undefined); }

  Kind kind() const { return kind_; }
  bool finite() const { return kind_ == Kind::Finite; }
  bool infinite() const { return kind_ == Kind::PosInf || kind_ == Kind::NegInf; }
  bool is_undefined() const { return kind_ == Kind::Undefined; }

  /// The complex payload; infinities map to (+-inf, 0), Undefined to NaN.
  Complex complex() const;
  /// Real part with the same conventions as complex().
  double real() const { return complex().real(); }
  double imag() const { return finite() ? z_.imag() : 0.0; }

  /// True when finite with an imaginary part negligible against the real part.
  bool is_real(double rel_tol = 1e-12) const;

  friend bool operator==(const Value&, const Value&) = default;

 private:
  explicit Value(Kind k) : kind_(k) {}
  Complex z_{0.0, 0.0};
  Kind kind_ = Kind::Finite;
};

Value operator+(const Value& a, const Value& b);
Value operator-(const Value& a);
Value operator-(const Value& a, const Value& b);
Value operator*(const Value& a, const Value& b);
Value operator/(const Value& a, const Value& b);
Value pow(const Value& base, double exponent);
Value log(const Value& x);
Value exp(const Value& x);
Value min(const Value& a, const Value& b);
Value max(const Value& a, const Value& b);
Value abs2(const Value& x);
Value conj(const Value& x);
Value re(const Value& x);
Value im(const Value& x);

enum class Op {
  Coord,
  Literal,
  Param,
  Neg,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
  Log,
  Exp,
  Min,
  Max,
  Abs2,
  Conj,
  Re,
  Im,
};

struct Node {
  Op op = Op::Literal;
  Complex literal{0.0, 0.0};
  double exponent = 1.0;  // Pow only
  std::size_t coord = 0;  // zero-based, Coord only
  std::string name;       // Param only
  std::vector<std::shared_ptr<const Node>> args;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvalPoint {
  Point coords;
  Params params;
};

/// Immutable expression tree. Copies share structure.
class Expr {
 public:
  Expr();  // literal 0
  explicit Expr(std::shared_ptr<const Node> root);

  static Expr constant(Complex c);
  static Expr coordinate(std::size_t zero_based);
  static Expr parameter(std::string name);

  const Node& root() const { return *root_; }
  std::shared_ptr<const Node> node() const { return root_; }

  /// Largest coordinate index used plus one (0 for coordinate-free expressions).
  std::size_t arity() const;
  std::vector<std::string> parameters() const;
  bool is_constant() const;

  Value eval(const Point& z, const Params& params = {}) const;
  Value eval(const EvalPoint& p) const { return eval(p.coords, p.params); }

  std::string to_string() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  std::shared_ptr<const Node> root_;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr pow(const Expr& base, double exponent);
Expr log(const Expr& x);
Expr exp(const Expr& x);
Expr min(const Expr& a, const Expr& b);
Expr max(const Expr& a, const Expr& b);
Expr abs2(const Expr& x);
Expr conj(const Expr& x);
Expr re(const Expr& x);
Expr im(const Expr& x);

struct ParseOptions {
  /// When set, identifiers that are neither coordinates nor built-in
  /// constants must appear in allowed_parameters.
  bool restrict_parameters = false;
  std::vector<std::string> allowed_parameters;
  /// When nonzero, coordinates beyond this dimension are rejected.
  std::size_t dimension = 0;
};

Expr parse_expr(std::string_view text, const ParseOptions& options = {});

}  // namespace mslab

#endif  // MSLAB_EXPR_HPP
