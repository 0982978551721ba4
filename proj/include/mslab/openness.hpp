#ifndef MSLAB_OPENNESS_HPP
#define MSLAB_OPENNESS_HPP

#include <optional>
#include <string>
#include <vector>

#include "mslab/domain.hpp"
#include "mslab/metric.hpp"
#include "mslab/polynomial.hpp"
#include "mslab/quadrature.hpp"

namespace mslab {

/// g_beta(t) = int_t^inf ds / (s e^{1 + (1+beta) s}) = e^{-1} E1((1+beta) t).
double g_beta(double beta, double t);

struct ThetaValue {
  double beta = 0.0;
  double value = 1.0;
  double quad_error = 0.0;
};

/// theta(beta) = 1 + int_0^inf (1 - e^{-g_beta(t)}) e^t dt.
ThetaValue theta(double beta, double tol = 1e-8);
/// 1 + (1/(1+beta)) int_0^inf (1 - e^{-g_0(t)}) e^{t/(1+beta)} dt.
ThetaValue theta_alternate(double beta, double tol = 1e-8);
/// |theta(beta) - theta_alternate(beta)|, both at tolerance tol.
double theta_identity_residual(double beta, double tol = 1e-8);

// ---------------------------------------------------------------------------
// Membership and exponents.

struct MembershipProbe {
  double beta = 0.0;
  IntegrabilityVerdict integrability;
  bool member = false;
};

struct MembershipOptions {
  double rho0 = 0.0;  // <= 0 selects half the distance from o to the boundary
  int levels = 24;
  IntegrabilityOptions integrability;
};

/// Integrability of |F|^2 for h (det h)^beta near o. Indeterminate verdicts
/// are resolved by the sign of the tail slope.
MembershipProbe membership(const SingularMetric& h, const Section& f, const Point& o, double beta,
                           const MembershipOptions& opt = {});

struct ExponentBracket {
  double lo = 0.0;
  double hi = 0.0;
  int iterations = 0;
  int indeterminate_hits = 0;
  bool unbounded = false;   // member at beta_max
  bool not_member = false;  // F not in E(h)_o; bracket is [0, 0]
};

struct ExponentOptions {
  double resolution = 0.02;
  double beta_max = 16.0;
  MembershipOptions membership;
};

/// Bisection on beta for sup{beta >= 0 : F in E(h (det h)^beta)_o}.
ExponentBracket singularity_exponent(const SingularMetric& h, const Section& f, const Point& o,
                                     const ExponentOptions& opt = {});

// ---------------------------------------------------------------------------
// Capacities on the monomial-model class.

enum class GramMethod { Auto, Analytic, Quadrature };

struct ProjectionOracleConfig {
  int max_degree = -1;  // < 0 selects deg F + 1
  GramMethod method = GramMethod::Auto;
  QuadOptions quad = [] {
    QuadOptions q;
    q.tol = 1e-14;
    q.rel_tol = 1e-9;
    return q;
  }();
};

/// inf of int_U |G|^2_{h/det h} over G in F + m, m the monomial submodule
/// E(h (det h)^beta)_o. Needs a metric carrying monomial weights centred at o;
/// anything else throws std::invalid_argument (see capacity_upper_bound).
IntegralEstimate capacity_C(const SingularMetric& h, const Section& f, double beta, const Polydisc& region,
                            const Point& o, const ProjectionOracleConfig& cfg = {});

/// The same infimum over region intersected with {-log det h < -t}.
IntegralEstimate capacity_sublevel(const SingularMetric& h, const Section& f, double beta, const Polydisc& region,
                                   const Point& o, double t, const ProjectionOracleConfig& cfg = {});

/// int_U |F|^2_{h/det h}, an upper bound for the capacity of any metric.
IntegralEstimate capacity_upper_bound(const SingularMetric& h, const Section& f, const Polydisc& region,
                                      const QuadOptions& opt = {});

/// Monomials (z - o)^alpha e_i of total degree <= max_degree lying in
/// E(h (det h)^beta)_o, as (component, alpha) pairs.
std::vector<std::pair<std::size_t, MultiIndex>> module_basis(const SingularMetric& h, double beta, int max_degree);

struct GSample {
  double t = 0.0;
  double value = 0.0;
  double abs_error = 0.0;
};

struct GCurve {
  double beta = 0.0;
  std::vector<GSample> samples;
  Polydisc region;
};

/// G_beta(t) = C_{F,beta}(region intersected with {phi < -t}) on an increasing grid.
GCurve g_curve(const SingularMetric& h, const Section& f, double beta, const Point& o, const Polydisc& region,
               const std::vector<double>& t_grid, const ProjectionOracleConfig& cfg = {});

struct SlackRow {
  double t = 0.0;
  double slack = 0.0;
  double allowance = 0.0;
};

struct SlackReport {
  std::vector<SlackRow> rows;
  bool passed = true;
  /// Smallest slack over rows with t >= 0.05 (+inf if none).
  double min_slack_away_from_zero = 0.0;
};

/// Slack G(t) - G(0)(1 - e^{-g_beta(t)}) at every sample.
SlackReport lower_bound_check(const GCurve& curve);

/// max(0, LHS - RHS) over grid points t, where LHS is the trapezoid integral
/// on [t, t_last] of the forward-difference quotient -(G(s+B) - G(s))/B over
/// G - G(s), and RHS = log(G / (G - G(t))).
double differential_inequality_check(const GCurve& curve, double G);

// ---------------------------------------------------------------------------

struct EffectivenessReport {
  double beta = 0.0;
  double theta_beta = 0.0;
  double energy = 0.0;
  double capacity_plus = 0.0;
  double ratio = 0.0;
  bool predicted_member = false;
  bool observed_member = false;
  ExponentBracket exponent;

  bool sound() const { return !predicted_member || observed_member; }
};

struct EffectivenessOptions {
  double resolution = 1e-3;  // C_{F,c+} is evaluated at c_hi + resolution
  ExponentOptions exponent;
  ProjectionOracleConfig oracle;
  double theta_tol = 1e-8;
};

/// Throws std::invalid_argument if int_D |F|^2_h is infinite.
EffectivenessReport effectiveness_verdict(const SingularMetric& h, const Section& f, const Point& o,
                                          const Polydisc& region, double beta, const EffectivenessOptions& opt = {});

/// First beta in the ascending grid with verdict Converges. Throws if F is
/// not in E(h)_o.
std::optional<double> strong_openness_search(const SingularMetric& h, const Section& f, const Point& o,
                                             std::vector<double> beta_grid, const MembershipOptions& opt = {});

}  // namespace mslab

#endif  // MSLAB_OPENNESS_HPP
