#include "mslab/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mslab {

Polynomial Polynomial::constant(std::size_t dim, Complex c) {
  Polynomial p(dim);
  p.add_term(MultiIndex(dim, 0), c);
  return p;
}

Polynomial Polynomial::monomial(const MultiIndex& alpha, Complex c) {
  Polynomial p(alpha.size());
  p.add_term(alpha, c);
  return p;
}

void Polynomial::add_term(const MultiIndex& alpha, Complex c) {
  if (alpha.size() != dim_) throw std::invalid_argument("monomial dimension mismatch");
  if (std::any_of(alpha.begin(), alpha.end(), [](int k) { return k < 0; }))
    throw std::invalid_argument("negative exponent in polynomial");
  auto [it, inserted] = terms_.try_emplace(alpha, c);
  if (!inserted) it->second += c;
  if (it->second == Complex(0.0, 0.0)) terms_.erase(it);
}

Complex Polynomial::coefficient(const MultiIndex& alpha) const {
  auto it = terms_.find(alpha);
  return it == terms_.end() ? Complex(0.0, 0.0) : it->second;
}

int Polynomial::degree() const {
  int d = -1;
  for (const auto& [alpha, c] : terms_) d = std::max(d, std::accumulate(alpha.begin(), alpha.end(), 0));
  return d;
}

int Polynomial::order() const {
  int d = -1;
  for (const auto& [alpha, c] : terms_) {
    const int k = std::accumulate(alpha.begin(), alpha.end(), 0);
    d = d < 0 ? k : std::min(d, k);
  }
  return d;
}

Complex Polynomial::eval(const Point& z) const {
  Complex sum(0.0, 0.0);
  for (const auto& [alpha, c] : terms_) {
    Complex term = c;
    for (std::size_t k = 0; k < dim_; ++k)
      for (int e = 0; e < alpha[k]; ++e) term *= z[static_cast<Eigen::Index>(k)];
    sum += term;
  }
  return sum;
}

Complex Polynomial::eval(const Point& z, const Point& origin) const { return eval(Point(z - origin)); }

Polynomial Polynomial::shifted(const Point& origin) const {
  if (origin.isZero()) return *this;
  Polynomial r(dim_);
  for (const auto& [alpha, c] : terms_) {
    Polynomial term = constant(dim_, c);
    for (std::size_t k = 0; k < dim_; ++k) {
      MultiIndex e(dim_, 0);
      e[k] = 1;
      Polynomial lin = monomial(e) + constant(dim_, origin[static_cast<Eigen::Index>(k)]);
      for (int j = 0; j < alpha[k]; ++j) term = term * lin;
    }
    r = r + term;
  }
  return r;
}

Expr Polynomial::to_expr() const {
  if (terms_.empty()) return Expr::constant(0.0);
  bool first = true;
  Expr sum;
  for (const auto& [alpha, c] : terms_) {
    Expr term = Expr::constant(c);
    bool unit = c == Complex(1.0, 0.0);
    for (std::size_t k = 0; k < dim_; ++k) {
      if (alpha[k] == 0) continue;
      Expr factor = alpha[k] == 1 ? Expr::coordinate(k) : pow(Expr::coordinate(k), alpha[k]);
      term = unit ? factor : term * factor;
      unit = false;
    }
    sum = first ? term : sum + term;
    first = false;
  }
  return sum;
}

Polynomial operator+(const Polynomial& a, const Polynomial& b) {
  if (a.dim_ != b.dim_) throw std::invalid_argument("polynomial dimension mismatch");
  Polynomial r = a;
  for (const auto& [alpha, c] : b.terms_) r.add_term(alpha, c);
  return r;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  if (a.dim_ != b.dim_) throw std::invalid_argument("polynomial dimension mismatch");
  Polynomial r(a.dim_);
  for (const auto& [x, cx] : a.terms_)
    for (const auto& [y, cy] : b.terms_) {
      MultiIndex s(a.dim_);
      for (std::size_t k = 0; k < a.dim_; ++k) s[k] = x[k] + y[k];
      r.add_term(s, cx * cy);
    }
  return r;
}

Polynomial operator*(Complex c, const Polynomial& a) {
  Polynomial r(a.dim_);
  for (const auto& [alpha, x] : a.terms_) r.add_term(alpha, c * x);
  return r;
}

Polynomial Polynomial::from_expr(const Expr& e, std::size_t dim) {
  const Node& n = e.root();
  auto arg = [&](std::size_t i) { return from_expr(Expr(n.args[i]), dim); };
  switch (n.op) {
    case Op::Literal:
      return constant(dim, n.literal);
    case Op::Coord: {
      if (n.coord >= dim) throw std::invalid_argument("coordinate beyond dimension in polynomial");
      MultiIndex alpha(dim, 0);
      alpha[n.coord] = 1;
      return monomial(alpha);
    }
    case Op::Neg:
      return Complex(-1.0, 0.0) * arg(0);
    case Op::Add:
      return arg(0) + arg(1);
    case Op::Sub:
      return arg(0) + Complex(-1.0, 0.0) * arg(1);
    case Op::Mul:
      return arg(0) * arg(1);
    case Op::Div: {
      const Node& d = *n.args[1];
      if (d.op != Op::Literal || d.literal == Complex(0.0, 0.0))
        throw std::invalid_argument("polynomial division only by nonzero constants");
      return (1.0 / d.literal) * arg(0);
    }
    case Op::Pow: {
      if (n.exponent < 0 || std::floor(n.exponent) != n.exponent || n.exponent > 64)
        throw std::invalid_argument("polynomial powers must be small non-negative integers");
      Polynomial base = arg(0);
      Polynomial r = constant(dim, 1.0);
      for (int k = 0; k < static_cast<int>(n.exponent); ++k) r = r * base;
      return r;
    }
    default:
      throw std::invalid_argument("expression is not a holomorphic polynomial: " + e.to_string());
  }
}

Polynomial Polynomial::parse(std::string_view text, std::size_t dim) {
  ParseOptions opt;
  opt.dimension = dim;
  return from_expr(parse_expr(text, opt), dim);
}

Section Section::parse(const std::vector<std::string>& texts, std::size_t dim) {
  Section s;
  for (const auto& t : texts) s.components.push_back(Polynomial::parse(t, dim));
  return s;
}

bool Section::is_zero() const {
  return std::all_of(components.begin(), components.end(), [](const Polynomial& p) { return p.is_zero(); });
}

int Section::degree() const {
  int d = -1;
  for (const auto& p : components) d = std::max(d, p.degree());
  return d;
}

Eigen::VectorXcd Section::eval(const Point& z) const {
  Eigen::VectorXcd v(static_cast<Eigen::Index>(components.size()));
  for (std::size_t i = 0; i < components.size(); ++i) v[static_cast<Eigen::Index>(i)] = components[i].eval(z);
  return v;
}

Eigen::VectorXcd Section::eval(const Point& z, const Point& origin) const { return eval(Point(z - origin)); }

std::vector<std::string> Section::to_strings() const {
  std::vector<std::string> out;
  for (const auto& p : components) out.push_back(p.to_string());
  return out;
}

Section axpy(const Section& f, Complex s, const Section& g) {
  if (f.rank() != g.rank()) throw std::invalid_argument("section rank mismatch");
  Section r;
  for (std::size_t i = 0; i < f.rank(); ++i) r.components.push_back(f.components[i] + s * g.components[i]);
  return r;
}

}  // namespace mslab
