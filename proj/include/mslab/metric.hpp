#ifndef MSLAB_METRIC_HPP
#define MSLAB_METRIC_HPP

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mslab/domain.hpp"
#include "mslab/expr.hpp"
#include "mslab/polynomial.hpp"

namespace mslab {

/// Diagonal weights w_i = c_i * prod_k |z_k - o_k|^{-2 a_ik} * |z - o|^{-2 b_i}.
/// Under such weights distinct monomials in z - o are orthogonal on
/// o-centred polydiscs and balls.
struct MonomialWeights {
  Point origin;
  Eigen::VectorXd coeff;   // c_i, length r
  Eigen::MatrixXd axis;    // a_ik, r x n
  Eigen::VectorXd radial;  // b_i, length r

  static MonomialWeights scalar(std::size_t dim, double a_radial, double coeff = 1.0);

  std::size_t rank() const { return static_cast<std::size_t>(coeff.size()); }
  std::size_t dim() const { return static_cast<std::size_t>(origin.size()); }

  Value weight(std::size_t i, const Point& z) const;
  Expr weight_expr(std::size_t i) const;

  /// |(z - o)^alpha|^2 w_i is integrable near o.
  bool integrable(std::size_t i, const MultiIndex& alpha) const;

  /// Weights of h (det h)^beta.
  MonomialWeights twisted(double beta) const;
  /// Weights of h / det h.
  MonomialWeights normalized() const;
  MonomialWeights scaled(double factor) const;
};

/// Hermitian metric on the trivial rank-r bundle over a polydisc:
///   H(z) = E(z) * (det E(z))^p * exp(-psi(z)),
/// with E stored as its upper triangle. Twists and normalisation only change
/// p and psi, so the matrix part stays as written.
class SingularMetric {
 public:
  SingularMetric(std::size_t rank, std::size_t dim, std::vector<Expr> upper, Polydisc domain,
                 std::vector<Point> singular_points = {}, Params params = {});

  static SingularMetric identity(std::size_t rank, const Polydisc& domain);
  static SingularMetric scalar(const Expr& weight, const Polydisc& domain, std::vector<Point> singular_points = {},
                               Params params = {});
  /// Entries given as rows of the upper triangle ("row i lists entries i..r-1").
  static SingularMetric parse(std::size_t rank, const std::vector<std::vector<std::string>>& upper_rows,
                              const Polydisc& domain, std::vector<Point> singular_points = {}, Params params = {});
  static SingularMetric monomial(const MonomialWeights& w, const Polydisc& domain);

  std::size_t rank() const { return rank_; }
  std::size_t dim() const { return dim_; }
  const Polydisc& domain() const { return domain_; }
  const std::vector<Point>& singular_points() const { return singular_points_; }
  const Params& params() const { return params_; }
  double det_power() const { return det_power_; }
  const std::optional<Expr>& psi() const { return psi_; }
  const std::optional<MonomialWeights>& monomial_weights() const { return monomial_; }

  /// Entry (i, j) of the matrix part E; the lower triangle is conj of the upper.
  Expr entry(std::size_t i, std::size_t j) const;
  /// Entry (i, j) of H as a single composed expression.
  Expr full_entry(std::size_t i, std::size_t j) const;
  /// det E as an expression (cofactor expansion).
  Expr det_expr() const;

  /// Free-form annotation, e.g. a positivity certificate carried by from_family.
  const std::string& note() const { return note_; }
  SingularMetric with_note(std::string note) const;
  SingularMetric with_domain(const Polydisc& domain) const;
  SingularMetric with_params(Params params) const;

  /// H(z) (det H(z))^beta exp(-psi(z)).
  SingularMetric twisted(double beta, const std::optional<Expr>& psi = std::nullopt) const;
  SingularMetric normalized() const;

 private:
  std::size_t rank_, dim_;
  std::vector<Expr> upper_;
  Polydisc domain_;
  std::vector<Point> singular_points_;
  Params params_;
  double det_power_ = 0.0;
  std::optional<Expr> psi_;
  std::optional<MonomialWeights> monomial_;
  std::string note_;
};

/// A metric evaluated at one point.
struct PointMetric {
  /// Matrix values; infinite entries hold +-inf, undefined ones NaN.
  Eigen::MatrixXcd values;
  Value det;
  std::vector<Value> eigenvalues;  // ascending
  bool finite = true;
};

PointMetric metric_at(const SingularMetric& h, const Point& z);
/// phi(z) = -log det h(z); Undefined where det < 0 or cannot be determined.
Value log_det(const SingularMetric& h, const Point& z);
/// Throws std::domain_error unless h(z) is finite and positive definite.
PointMetric dual_at(const SingularMetric& h, const Point& z);
PointMetric dual_of(const PointMetric& m);

SingularMetric normalize(const SingularMetric& h);
SingularMetric twist(const SingularMetric& h, double beta, const std::optional<Expr>& psi = std::nullopt);

struct FamilyMetric {
  SingularMetric raw;         // H = sum_a F_a F_a^*
  SingularMetric normalized;  // H / (det H)^s
};

/// family[a][i] is component i of the map F_a. Requires s >= min(n, r).
FamilyMetric from_family(const std::vector<std::vector<Polynomial>>& family, int s, const Polydisc& domain,
                         std::vector<Point> singular_points = {});

/// |F|^2_h(z) = sum_ij H_ij F_i conj(F_j). Exact zero sections give 0 even at
/// infinite entries; otherwise any infinite entry gives +inf.
Value section_norm2(const SingularMetric& h, const Section& f, const Point& z);

/// Mollified regularisation of a Griffiths semi-positive metric at z:
/// ((h^*) * rho_eps + eps Id)^* e^{-eps |z|^2}.
PointMetric regularize(const SingularMetric& h, double eps, const Point& z, double tol = 1e-9);

struct OrderSample {
  Point point;
  bool dominates = false;  // A - B PSD
  bool reversal = false;   // det(A) B - det(B) A PSD
};

struct OrderReport {
  std::vector<OrderSample> samples;
  std::size_t skipped = 0;
  bool dominates = true;
  bool reversal = true;
  bool verdict() const { return dominates && reversal; }
};

OrderReport check_order(const SingularMetric& a, const SingularMetric& b, const std::vector<Point>& samples);

/// Smallest eigenvalue of the Nakano form of the Chern curvature at z,
/// normalised by the metric on C^n (x) C^r. step <= 0 selects 1e-3 times the
/// distance to the boundary.
double nakano_min_eigenvalue(const SingularMetric& h, const Point& z, double step = 0.0);

/// Random points in the polydisc (uniform per factor).
std::vector<Point> sample_points(const Polydisc& region, std::size_t count, std::uint64_t seed);

}  // namespace mslab

#endif  // MSLAB_METRIC_HPP
