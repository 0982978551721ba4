#ifndef MSLAB_POLYNOMIAL_HPP
#define MSLAB_POLYNOMIAL_HPP

#include <map>
#include <string>
#include <vector>

#include "mslab/expr.hpp"

namespace mslab {

using MultiIndex = std::vector<int>;

/// Sparse complex polynomial in z1..zn: exponent tuple -> coefficient.
class Polynomial {
 public:
  explicit Polynomial(std::size_t dim = 1) : dim_(dim) {}

  static Polynomial constant(std::size_t dim, Complex c);
  static Polynomial monomial(const MultiIndex& alpha, Complex c = 1.0);

  /// Expands a parsed expression built from coordinates, literals, + - * and
  /// non-negative integer powers. Throws std::invalid_argument otherwise.
  static Polynomial from_expr(const Expr& e, std::size_t dim);
  static Polynomial parse(std::string_view text, std::size_t dim);

  std::size_t dim() const { return dim_; }
  const std::map<MultiIndex, Complex>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int degree() const;  // -1 for the zero polynomial
  /// Order of vanishing at the origin (smallest total degree), -1 if zero.
  int order() const;

  Complex coefficient(const MultiIndex& alpha) const;
  void add_term(const MultiIndex& alpha, Complex c);

  Complex eval(const Point& z) const;
  /// Evaluation in the shifted variable z - origin.
  Complex eval(const Point& z, const Point& origin) const;

  /// The polynomial w -> p(w + origin).
  Polynomial shifted(const Point& origin) const;

  Expr to_expr() const;
  std::string to_string() const { return to_expr().to_string(); }

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(Complex c, const Polynomial& a);
  friend bool operator==(const Polynomial& a, const Polynomial& b) = default;

 private:
  std::size_t dim_;
  std::map<MultiIndex, Complex> terms_;
};

/// Holomorphic section of the trivial rank-r bundle: r polynomial components.
struct Section {
  std::vector<Polynomial> components;

  static Section parse(const std::vector<std::string>& texts, std::size_t dim);
  static Section scalar(const Polynomial& p) { return Section{{p}}; }

  std::size_t rank() const { return components.size(); }
  std::size_t dim() const { return components.empty() ? 0 : components.front().dim(); }
  bool is_zero() const;
  int degree() const;
  Eigen::VectorXcd eval(const Point& z) const;
  Eigen::VectorXcd eval(const Point& z, const Point& origin) const;
  std::vector<std::string> to_strings() const;

  friend bool operator==(const Section&, const Section&) = default;
};

/// Componentwise f + s g; used for families F_j = F + G/j.
Section axpy(const Section& f, Complex s, const Section& g);

}  // namespace mslab

#endif  // MSLAB_POLYNOMIAL_HPP
