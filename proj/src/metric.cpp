#include "mslab/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mslab/linalg.hpp"
#include "mslab/quadrature.hpp"
#include "mslab/special.hpp"

namespace mslab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kThresholdSlack = 1e-12;

Complex to_complex(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Finite:
      return v.complex();
    case Value::Kind::PosInf:
      return {kInf, 0.0};
    case Value::Kind::NegInf:
      return {-kInf, 0.0};
    case Value::Kind::Undefined:
      break;
  }
  return {kNaN, kNaN};
}

bool value_less(const Value& a, const Value& b) {
  auto rank = [](const Value& v) {
    switch (v.kind()) {
      case Value::Kind::NegInf:
        return 0;
      case Value::Kind::Finite:
        return 1;
      case Value::Kind::PosInf:
        return 2;
      case Value::Kind::Undefined:
        break;
    }
    return 3;
  };
  if (rank(a) != rank(b)) return rank(a) < rank(b);
  return rank(a) == 1 && a.real() < b.real();
}

Expr shifted_coordinate(std::size_t k, const Point& origin) {
  const Complex o = origin[static_cast<Eigen::Index>(k)];
  if (o == Complex(0.0, 0.0)) return Expr::coordinate(k);
  return Expr::coordinate(k) - Expr::constant(o);
}

}  // namespace

// ---------------------------------------------------------------------------
// MonomialWeights

MonomialWeights MonomialWeights::scalar(std::size_t dim, double a_radial, double c) {
  MonomialWeights w;
  w.origin = Point::Zero(static_cast<Eigen::Index>(dim));
  w.coeff = Eigen::VectorXd::Constant(1, c);
  w.axis = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(dim));
  w.radial = Eigen::VectorXd::Constant(1, a_radial);
  return w;
}

Value MonomialWeights::weight(std::size_t i, const Point& z) const {
  const auto row = static_cast<Eigen::Index>(i);
  Value w(coeff[row]);
  double norm2 = 0.0;
  for (Eigen::Index k = 0; k < origin.size(); ++k) {
    const double d2 = std::norm(z[k] - origin[k]);
    norm2 += d2;
    if (axis(row, k) != 0.0) w = w * pow(Value(d2), -axis(row, k));
  }
  if (radial[row] != 0.0) w = w * pow(Value(norm2), -radial[row]);
  return w;
}

Expr MonomialWeights::weight_expr(std::size_t i) const {
  const auto row = static_cast<Eigen::Index>(i);
  Expr w = Expr::constant(coeff[row]);
  Expr norm2;
  for (Eigen::Index k = 0; k < origin.size(); ++k) {
    const Expr d2 = abs2(shifted_coordinate(static_cast<std::size_t>(k), origin));
    norm2 = k == 0 ? d2 : norm2 + d2;
    if (axis(row, k) != 0.0) w = w * pow(d2, -axis(row, k));
  }
  if (radial[row] != 0.0) w = w * pow(norm2, -radial[row]);
  return w;
}

bool MonomialWeights::integrable(std::size_t i, const MultiIndex& alpha) const {
  const auto row = static_cast<Eigen::Index>(i);
  if (alpha.size() != dim()) throw std::invalid_argument("multi-index dimension mismatch");
  double total = static_cast<double>(dim()) - radial[row];
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    const double e = alpha[k] - axis(row, static_cast<Eigen::Index>(k));
    if (!(e > -1.0 + kThresholdSlack)) return false;
    total += e;
  }
  return total > kThresholdSlack;
}

MonomialWeights MonomialWeights::twisted(double beta) const {
  MonomialWeights w = *this;
  const Eigen::RowVectorXd col = axis.colwise().sum();
  w.axis = axis.rowwise() + beta * col;
  w.radial = radial.array() + beta * radial.sum();
  w.coeff = coeff * std::pow(coeff.prod(), beta);
  return w;
}

MonomialWeights MonomialWeights::normalized() const {
  MonomialWeights w = *this;
  const Eigen::RowVectorXd col = axis.colwise().sum();
  w.axis = axis.rowwise() - col;
  w.radial = radial.array() - radial.sum();
  w.coeff = coeff / coeff.prod();
  return w;
}

MonomialWeights MonomialWeights::scaled(double factor) const {
  MonomialWeights w = *this;
  w.coeff *= factor;
  return w;
}

// ---------------------------------------------------------------------------
// SingularMetric

SingularMetric::SingularMetric(std::size_t rank, std::size_t dim, std::vector<Expr> upper, Polydisc domain,
                               std::vector<Point> singular_points, Params params)
    : rank_(rank),
      dim_(dim),
      upper_(std::move(upper)),
      domain_(std::move(domain)),
      singular_points_(std::move(singular_points)),
      params_(std::move(params)) {
  if (rank_ == 0 || dim_ == 0) throw std::invalid_argument("metric rank and dimension must be positive");
  if (upper_.size() != rank_ * (rank_ + 1) / 2)
    throw std::invalid_argument("metric needs r(r+1)/2 upper-triangle entries");
  if (domain_.dim() != dim_) throw std::invalid_argument("metric domain dimension mismatch");
  for (const auto& e : upper_)
    if (e.arity() > dim_) throw std::invalid_argument("metric entry uses a coordinate beyond the dimension");
  for (const auto& p : singular_points_)
    if (static_cast<std::size_t>(p.size()) != dim_) throw std::invalid_argument("singular point dimension mismatch");
}

SingularMetric SingularMetric::identity(std::size_t rank, const Polydisc& domain) {
  std::vector<Expr> upper;
  for (std::size_t i = 0; i < rank; ++i)
    for (std::size_t j = i; j < rank; ++j) upper.push_back(Expr::constant(i == j ? 1.0 : 0.0));
  MonomialWeights w;
  w.origin = domain.center();
  w.coeff = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(rank));
  w.axis = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rank), static_cast<Eigen::Index>(domain.dim()));
  w.radial = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rank));
  SingularMetric h(rank, domain.dim(), std::move(upper), domain);
  h.monomial_ = w;
  return h;
}

SingularMetric SingularMetric::scalar(const Expr& weight, const Polydisc& domain, std::vector<Point> singular_points,
                                      Params params) {
  return SingularMetric(1, domain.dim(), {weight}, domain, std::move(singular_points), std::move(params));
}

SingularMetric SingularMetric::parse(std::size_t rank, const std::vector<std::vector<std::string>>& upper_rows,
                                     const Polydisc& domain, std::vector<Point> singular_points, Params params) {
  if (upper_rows.size() != rank) throw std::invalid_argument("metric needs one upper-triangle row per rank");
  ParseOptions opt;
  opt.dimension = domain.dim();
  opt.restrict_parameters = true;
  for (const auto& [name, value] : params) opt.allowed_parameters.push_back(name);
  std::vector<Expr> upper;
  for (std::size_t i = 0; i < rank; ++i) {
    if (upper_rows[i].size() != rank - i)
      throw std::invalid_argument("upper-triangle row " + std::to_string(i + 1) + " must have " +
                                  std::to_string(rank - i) + " entries");
    for (const auto& text : upper_rows[i]) upper.push_back(parse_expr(text, opt));
  }
  return SingularMetric(rank, domain.dim(), std::move(upper), domain, std::move(singular_points), std::move(params));
}

SingularMetric SingularMetric::monomial(const MonomialWeights& w, const Polydisc& domain) {
  const std::size_t r = w.rank();
  if (w.dim() != domain.dim()) throw std::invalid_argument("monomial weights dimension mismatch");
  std::vector<Expr> upper;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = i; j < r; ++j) upper.push_back(i == j ? w.weight_expr(i) : Expr::constant(0.0));
  SingularMetric h(r, domain.dim(), std::move(upper), domain, {w.origin});
  h.monomial_ = w;
  return h;
}

Expr SingularMetric::entry(std::size_t i, std::size_t j) const {
  if (i >= rank_ || j >= rank_) throw std::out_of_range("metric entry index");
  if (i > j) return conj(entry(j, i));
  const std::size_t offset = i * rank_ - i * (i - 1) / 2;
  return upper_[offset + (j - i)];
}

namespace {

Expr det_of(const std::vector<std::vector<Expr>>& m) {
  const std::size_t r = m.size();
  if (r == 1) return m[0][0];
  Expr sum;
  for (std::size_t c = 0; c < r; ++c) {
    std::vector<std::vector<Expr>> minor;
    for (std::size_t i = 1; i < r; ++i) {
      std::vector<Expr> row;
      for (std::size_t j = 0; j < r; ++j)
        if (j != c) row.push_back(m[i][j]);
      minor.push_back(row);
    }
    const Expr term = m[0][c] * det_of(minor);
    if (c == 0)
      sum = term;
    else
      sum = c % 2 == 0 ? sum + term : sum - term;
  }
  return sum;
}

}  // namespace

Expr SingularMetric::det_expr() const {
  std::vector<std::vector<Expr>> m(rank_, std::vector<Expr>(rank_));
  for (std::size_t i = 0; i < rank_; ++i)
    for (std::size_t j = 0; j < rank_; ++j) m[i][j] = entry(i, j);
  return det_of(m);
}

Expr SingularMetric::full_entry(std::size_t i, std::size_t j) const {
  Expr e = entry(i, j);
  if (det_power_ != 0.0) e = e * pow(re(det_expr()), det_power_);
  if (psi_) e = e * exp(-*psi_);
  return e;
}

SingularMetric SingularMetric::with_note(std::string note) const {
  SingularMetric h = *this;
  h.note_ = std::move(note);
  return h;
}

SingularMetric SingularMetric::with_domain(const Polydisc& domain) const {
  if (domain.dim() != dim_) throw std::invalid_argument("metric domain dimension mismatch");
  SingularMetric h = *this;
  h.domain_ = domain;
  return h;
}

SingularMetric SingularMetric::with_params(Params params) const {
  SingularMetric h = *this;
  h.params_ = std::move(params);
  return h;
}

SingularMetric SingularMetric::twisted(double beta, const std::optional<Expr>& psi) const {
  SingularMetric h = *this;
  const double r = static_cast<double>(rank_);
  h.det_power_ = det_power_ + beta * (1.0 + r * det_power_);
  std::optional<Expr> total;
  if (psi_ && 1.0 + r * beta != 0.0) total = Expr::constant(1.0 + r * beta) * *psi_;
  if (psi) total = total ? *total + *psi : *psi;
  h.psi_ = total;
  h.note_.clear();
  if (monomial_) {
    MonomialWeights w = monomial_->twisted(beta);
    if (psi) {
      if (psi->arity() == 0) {
        const Value c = psi->eval(Point(), params_);
        if (c.finite() && c.is_real())
          h.monomial_ = w.scaled(std::exp(-c.real()));
        else
          h.monomial_.reset();
      } else {
        h.monomial_.reset();
      }
    } else {
      h.monomial_ = w;
    }
  }
  return h;
}

SingularMetric SingularMetric::normalized() const {
  SingularMetric h = *this;
  const double r = static_cast<double>(rank_);
  h.det_power_ = det_power_ - 1.0 - r * det_power_;
  if (psi_ && rank_ > 1)
    h.psi_ = Expr::constant(1.0 - r) * *psi_;
  else
    h.psi_.reset();
  if (monomial_) h.monomial_ = monomial_->normalized();
  h.note_.clear();
  return h;
}

SingularMetric normalize(const SingularMetric& h) { return h.normalized(); }

SingularMetric twist(const SingularMetric& h, double beta, const std::optional<Expr>& psi) {
  if (!(beta >= 0.0)) throw std::invalid_argument("twist needs beta >= 0");
  return h.twisted(beta, psi);
}

// ---------------------------------------------------------------------------
// Pointwise evaluation

namespace {

PointMetric from_diagonal(const std::vector<Value>& diag, std::size_t r) {
  PointMetric m;
  m.values = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r));
  Value det(1.0);
  for (std::size_t i = 0; i < r; ++i) {
    m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = to_complex(diag[i]);
    det = det * diag[i];
    if (!diag[i].finite()) m.finite = false;
  }
  m.det = det;
  m.eigenvalues = diag;
  std::sort(m.eigenvalues.begin(), m.eigenvalues.end(), value_less);
  for (auto& e : m.eigenvalues)
    if (e.finite()) e = Value(e.real());
  return m;
}

}  // namespace

PointMetric metric_at(const SingularMetric& h, const Point& z) {
  if (static_cast<std::size_t>(z.size()) != h.dim()) throw std::invalid_argument("point dimension mismatch");
  const std::size_t r = h.rank();
  if (const auto& w = h.monomial_weights()) {
    std::vector<Value> diag(r);
    for (std::size_t i = 0; i < r; ++i) diag[i] = w->weight(i, z);
    return from_diagonal(diag, r);
  }

  const auto R = static_cast<Eigen::Index>(r);
  std::vector<Value> vals(r * r);
  bool finite = true, off_diag_zero = true;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = i; j < r; ++j) {
      Value v = h.entry(i, j).eval(z, h.params());
      if (i == j && v.finite()) v = Value(v.real());
      vals[i * r + j] = v;
      vals[j * r + i] = conj(v);
      if (!v.finite()) finite = false;
      if (i != j && !(v.finite() && v.complex() == Complex(0.0, 0.0))) off_diag_zero = false;
    }

  Value psi_factor(1.0);
  if (h.psi()) psi_factor = exp(-h.psi()->eval(z, h.params()));
  const double p = h.det_power();

  if (!finite) {
    if (off_diag_zero) {
      std::vector<Value> diag(r);
      Value d(1.0);
      for (std::size_t i = 0; i < r; ++i) d = d * vals[i * r + i];
      const Value factor = (p == 0.0 ? Value(1.0) : pow(d, p)) * psi_factor;
      for (std::size_t i = 0; i < r; ++i) diag[i] = vals[i * r + i] * factor;
      return from_diagonal(diag, r);
    }
    PointMetric m;
    m.finite = false;
    m.values.resize(R, R);
    bool any_inf = false;
    for (std::size_t k = 0; k < r * r; ++k) {
      m.values(static_cast<Eigen::Index>(k / r), static_cast<Eigen::Index>(k % r)) = to_complex(vals[k]);
      any_inf = any_inf || vals[k].kind() == Value::Kind::PosInf;
    }
    m.det = Value::undefined();
    m.eigenvalues.assign(r, Value::undefined());
    if (any_inf) m.eigenvalues.back() = Value::pos_inf();
    return m;
  }

  Eigen::MatrixXcd e(R, R);
  for (std::size_t k = 0; k < r * r; ++k) e(static_cast<Eigen::Index>(k / r), static_cast<Eigen::Index>(k % r)) = vals[k].complex();
  const Eigen::VectorXd lam = hermitian_eigenvalues<Complex>(e);
  double d = e.determinant().real();
  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  if (d < 0.0 && d > -1e-12 * std::pow(scale, static_cast<double>(r))) d = 0.0;
  const Value factor = (p == 0.0 ? Value(1.0) : pow(Value(d), p)) * psi_factor;

  PointMetric m;
  m.eigenvalues.resize(r);
  if (factor.finite() && factor.is_real()) {
    const double f = factor.real();
    m.values = e * f;
    for (std::size_t i = 0; i < r; ++i) m.eigenvalues[i] = Value(lam[static_cast<Eigen::Index>(i)] * f);
    m.det = Value(d * std::pow(f, static_cast<double>(r)));
    return m;
  }
  m.finite = false;
  m.values.resize(R, R);
  for (Eigen::Index i = 0; i < R; ++i)
    for (Eigen::Index j = 0; j < R; ++j) m.values(i, j) = to_complex(Value(e(i, j)) * factor);
  for (std::size_t i = 0; i < r; ++i) m.eigenvalues[i] = Value(lam[static_cast<Eigen::Index>(i)]) * factor;
  std::sort(m.eigenvalues.begin(), m.eigenvalues.end(), value_less);
  Value psi_r(1.0);
  for (std::size_t i = 0; i < r; ++i) psi_r = psi_r * psi_factor;
  m.det = pow(Value(d), 1.0 + static_cast<double>(r) * p) * psi_r;
  return m;
}

Value log_det(const SingularMetric& h, const Point& z) {
  const PointMetric m = metric_at(h, z);
  const Value& d = m.det;
  switch (d.kind()) {
    case Value::Kind::PosInf:
      return Value::neg_inf();
    case Value::Kind::NegInf:
    case Value::Kind::Undefined:
      return Value::undefined();
    case Value::Kind::Finite:
      break;
  }
  if (d.real() < 0.0) return Value::undefined();
  if (d.real() == 0.0) return Value::pos_inf();
  return Value(-std::log(d.real()));
}

PointMetric dual_of(const PointMetric& m) {
  if (!m.finite) throw std::domain_error("dual needs a finite metric value");
  for (const auto& e : m.eigenvalues)
    if (!(e.finite() && e.real() > 0.0)) throw std::domain_error("dual needs a positive definite metric value");
  PointMetric d;
  d.values = dual_matrix<Complex>(m.values);
  d.det = Value(1.0 / m.det.real());
  const std::size_t r = m.eigenvalues.size();
  d.eigenvalues.resize(r);
  for (std::size_t i = 0; i < r; ++i) d.eigenvalues[i] = Value(1.0 / m.eigenvalues[r - 1 - i].real());
  return d;
}

PointMetric dual_at(const SingularMetric& h, const Point& z) { return dual_of(metric_at(h, z)); }

// ---------------------------------------------------------------------------

FamilyMetric from_family(const std::vector<std::vector<Polynomial>>& family, int s, const Polydisc& domain,
                         std::vector<Point> singular_points) {
  if (family.empty()) throw std::invalid_argument("from_family needs a nonempty family");
  const std::size_t r = family.front().size();
  const std::size_t n = domain.dim();
  if (r == 0) throw std::invalid_argument("family members must have at least one component");
  for (const auto& f : family) {
    if (f.size() != r) throw std::invalid_argument("family members must all have rank r");
    for (const auto& p : f)
      if (p.dim() != n) throw std::invalid_argument("family polynomial dimension mismatch");
  }
  if (s < static_cast<int>(std::min(n, r)))
    throw std::invalid_argument("normalisation exponent s = " + std::to_string(s) +
                                " violates s >= min(n, r) = " + std::to_string(std::min(n, r)) +
                                ", required for H/(det H)^s to be Nakano semi-positive");
  std::vector<Expr> upper;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = i; j < r; ++j) {
      Expr sum;
      bool first = true;
      for (const auto& f : family) {
        if (f[i].is_zero() || f[j].is_zero()) continue;
        const Expr term = f[i].to_expr() * conj(f[j].to_expr());
        sum = first ? term : sum + term;
        first = false;
      }
      upper.push_back(sum);
    }
  SingularMetric raw(r, n, std::move(upper), domain, std::move(singular_points));
  SingularMetric normalized = raw.twisted(-static_cast<double>(s))
                                  .with_note("Nakano semi-positive: Gram family normalised with s >= min(n, r)");
  return {raw, normalized};
}

Value section_norm2(const SingularMetric& h, const Section& f, const Point& z) {
  if (f.rank() != h.rank()) throw std::invalid_argument("section rank does not match metric rank");
  const Eigen::VectorXcd fz = f.eval(z);
  if (fz.isZero(0.0)) return Value(0.0);
  const std::size_t r = h.rank();
  if (const auto& w = h.monomial_weights()) {
    double sum = 0.0;
    bool inf = false;
    for (std::size_t i = 0; i < r; ++i) {
      const Value wi = w->weight(i, z);
      if (wi.is_undefined()) return Value::undefined();
      if (wi.kind() == Value::Kind::PosInf) {
        inf = true;
        continue;
      }
      sum += wi.real() * std::norm(fz[static_cast<Eigen::Index>(i)]);
    }
    return inf ? Value::pos_inf() : Value(sum);
  }
  const PointMetric m = metric_at(h, z);
  if (!m.finite) {
    bool any_nan = false;
    for (Eigen::Index i = 0; i < m.values.rows(); ++i)
      for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
        const Complex v = m.values(i, j);
        if (std::isnan(v.real()) || std::isnan(v.imag())) any_nan = true;
        if (v.real() == kInf) return Value::pos_inf();
      }
    return any_nan ? Value::undefined() : Value::pos_inf();
  }
  const Complex s = fz.transpose() * m.values * fz.conjugate();
  return Value(std::max(0.0, s.real()));
}

// ---------------------------------------------------------------------------

PointMetric regularize(const SingularMetric& h, double eps, const Point& z, double tol) {
  if (!(eps > 0.0)) throw std::invalid_argument("regularize needs eps > 0");
  if (h.domain().boundary_distance(z) <= eps)
    throw std::invalid_argument("regularize: point is within eps of the domain boundary");
  const std::size_t r = h.rank(), n = h.dim();
  const auto R = static_cast<Eigen::Index>(r);
  const std::size_t m = 2 * r * r;
  const double scale = std::pow(eps, -2.0 * static_cast<double>(n));
  VectorField dual_entries = [&](const Point& y, double* out) {
    const PointMetric pm = metric_at(h, y);
    Eigen::MatrixXcd d;
    if (pm.finite) {
      d = dual_matrix<Complex>(pm.values);
    } else {
      // Diagonal singular values dualise to reciprocals (1/inf = 0).
      d = Eigen::MatrixXcd::Zero(R, R);
      for (Eigen::Index i = 0; i < R; ++i)
        for (Eigen::Index j = 0; j < R; ++j) {
          const Complex v = pm.values(i, j);
          if (i == j)
            d(i, i) = v.real() == kInf ? Complex(0.0, 0.0) : 1.0 / v;
          else if (v != Complex(0.0, 0.0))
            d(i, j) = Complex(kNaN, kNaN);
        }
    }
    const double weight = scale * mollifier_density((y - z).squaredNorm() / (eps * eps), n);
    for (std::size_t k = 0; k < r * r; ++k) {
      const Complex v = d(static_cast<Eigen::Index>(k / r), static_cast<Eigen::Index>(k % r)) * weight;
      out[2 * k] = v.real();
      out[2 * k + 1] = v.imag();
    }
  };
  QuadOptions opt;
  opt.tol = tol;
  opt.rel_tol = tol;
  const auto est = integrate_shell_vector(dual_entries, m, z, 0.0, eps, opt);
  Eigen::MatrixXcd moll(R, R);
  for (std::size_t k = 0; k < r * r; ++k)
    moll(static_cast<Eigen::Index>(k / r), static_cast<Eigen::Index>(k % r)) =
        Complex(est[2 * k].value, est[2 * k + 1].value);
  moll = 0.5 * (moll + moll.adjoint().eval());
  moll += eps * Eigen::MatrixXcd::Identity(R, R);
  PointMetric out;
  out.values = dual_matrix<Complex>(moll) * std::exp(-eps * z.squaredNorm());
  out.values = 0.5 * (out.values + out.values.adjoint().eval());
  const Eigen::VectorXd lam = hermitian_eigenvalues<Complex>(out.values);
  for (Eigen::Index i = 0; i < lam.size(); ++i) out.eigenvalues.emplace_back(lam[i]);
  out.det = Value(out.values.determinant().real());
  return out;
}

// ---------------------------------------------------------------------------

OrderReport check_order(const SingularMetric& a, const SingularMetric& b, const std::vector<Point>& samples) {
  if (a.rank() != b.rank() || a.dim() != b.dim()) throw std::invalid_argument("check_order needs matching metrics");
  OrderReport rep;
  for (const auto& z : samples) {
    const PointMetric ma = metric_at(a, z), mb = metric_at(b, z);
    auto pd = [](const PointMetric& m) {
      if (!m.finite) return false;
      return std::all_of(m.eigenvalues.begin(), m.eigenvalues.end(),
                         [](const Value& v) { return v.finite() && v.real() > 0.0; });
    };
    if (!pd(ma) || !pd(mb)) {
      ++rep.skipped;
      continue;
    }
    OrderSample s;
    s.point = z;
    const double scale = std::max({1.0, ma.values.cwiseAbs().maxCoeff(), mb.values.cwiseAbs().maxCoeff()});
    s.dominates = dominates<Complex>(ma.values, mb.values, 1e-10 * scale);
    const Eigen::MatrixXcd rev = reversal_matrix<Complex>(ma.values, mb.values);
    const double rscale = std::max(1.0, std::abs(ma.det.real()) * scale + std::abs(mb.det.real()) * scale);
    s.reversal = is_psd<Complex>(0.5 * (rev + rev.adjoint()), 1e-10 * rscale);
    rep.dominates = rep.dominates && s.dominates;
    rep.reversal = rep.reversal && s.reversal;
    rep.samples.push_back(s);
  }
  return rep;
}

// ---------------------------------------------------------------------------

double nakano_min_eigenvalue(const SingularMetric& h, const Point& z, double step) {
  const std::size_t n = h.dim(), r = h.rank();
  const double dist = h.domain().boundary_distance(z);
  if (step <= 0.0) step = 1e-3 * dist;
  if (dist <= 2.0 * step) throw std::invalid_argument("nakano_min_eigenvalue: stencil leaves the domain");
  for (const auto& p : h.singular_points())
    if ((p - z).norm() <= 2.0 * step) throw std::invalid_argument("nakano_min_eigenvalue: singular point in stencil");

  const auto R = static_cast<Eigen::Index>(r);
  auto H = [&](const Point& y) {
    const PointMetric m = metric_at(h, y);
    if (!m.finite) throw std::invalid_argument("nakano_min_eigenvalue: metric not finite in stencil");
    return Eigen::MatrixXcd(m.values);
  };
  // Real coordinates a = 2k (x_k), 2k+1 (y_k).
  auto shift = [&](Point y, std::size_t a, double s) {
    y[static_cast<Eigen::Index>(a / 2)] += (a % 2 == 0) ? Complex(s, 0.0) : Complex(0.0, s);
    return y;
  };
  const std::size_t D = 2 * n;
  const Eigen::MatrixXcd h0 = H(z);
  std::vector<Eigen::MatrixXcd> d1(D), hp(D), hm(D);
  for (std::size_t a = 0; a < D; ++a) {
    hp[a] = H(shift(z, a, step));
    hm[a] = H(shift(z, a, -step));
    d1[a] = (hp[a] - hm[a]) / (2.0 * step);
  }
  std::vector<std::vector<Eigen::MatrixXcd>> d2(D, std::vector<Eigen::MatrixXcd>(D));
  for (std::size_t a = 0; a < D; ++a) {
    d2[a][a] = (hp[a] - 2.0 * h0 + hm[a]) / (step * step);
    for (std::size_t b = a + 1; b < D; ++b) {
      const Eigen::MatrixXcd pp = H(shift(shift(z, a, step), b, step));
      const Eigen::MatrixXcd pm = H(shift(shift(z, a, step), b, -step));
      const Eigen::MatrixXcd mp = H(shift(shift(z, a, -step), b, step));
      const Eigen::MatrixXcd mm = H(shift(shift(z, a, -step), b, -step));
      d2[a][b] = (pp - pm - mp + mm) / (4.0 * step * step);
      d2[b][a] = d2[a][b];
    }
  }
  const Complex I(0.0, 1.0);
  std::vector<Eigen::MatrixXcd> dz(n), dzbar(n);
  for (std::size_t j = 0; j < n; ++j) {
    dz[j] = 0.5 * (d1[2 * j] - I * d1[2 * j + 1]);
    dzbar[j] = 0.5 * (d1[2 * j] + I * d1[2 * j + 1]);
  }
  const Eigen::MatrixXcd hinv = h0.inverse();
  const auto N = static_cast<Eigen::Index>(n * r);
  Eigen::MatrixXcd form(N, N), gram = Eigen::MatrixXcd::Zero(N, N);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) {
      const Eigen::MatrixXcd ddbar =
          0.25 * (d2[2 * j][2 * k] + d2[2 * j + 1][2 * k + 1] + I * (d2[2 * j][2 * k + 1] - d2[2 * j + 1][2 * k]));
      const Eigen::MatrixXcd theta = -ddbar + dz[j] * hinv * dzbar[k];
      form.block(static_cast<Eigen::Index>(j) * R, static_cast<Eigen::Index>(k) * R, R, R) = theta;
    }
  for (std::size_t j = 0; j < n; ++j) gram.block(static_cast<Eigen::Index>(j) * R, static_cast<Eigen::Index>(j) * R, R, R) = h0;
  form = 0.5 * (form + form.adjoint().eval());
  gram = 0.5 * (gram + gram.adjoint().eval());
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> es(form, gram, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

std::vector<Point> sample_points(const Polydisc& region, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Point> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(region.sample(rng));
  return out;
}

}  // namespace mslab
