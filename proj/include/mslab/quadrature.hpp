#ifndef MSLAB_QUADRATURE_HPP
#define MSLAB_QUADRATURE_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "mslab/domain.hpp"
#include "mslab/expr.hpp"

namespace mslab {

enum class QuadStatus { Converged, MaxCellsReached, DivergenceSuspected };
std::string to_string(QuadStatus s);

struct IntegralEstimate {
  double value = 0.0;  // +inf when divergence is suspected
  double abs_error = 0.0;
  long cells_used = 0;
  QuadStatus status = QuadStatus::Converged;

  bool infinite() const { return std::isinf(value); }
};

struct QuadOptions {
  double tol = 1e-6;      // absolute
  double rel_tol = 0.0;   // accepted error is max(tol, rel_tol * |value|)
  long max_cells = 2'000'000;
  int jobs = 0;           // 0 selects default_jobs()
  /// Declared singular points. A point at the region center triggers dyadic
  /// shell refinement; others are handled by plain adaptivity.
  std::vector<Point> singular_points;
};

/// Pointwise integrand returning an extended real (Undefined is treated as
/// +inf and forces refinement).
using ScalarField = std::function<Value(const Point&)>;
/// Vector integrand: writes m real components to out.
using VectorField = std::function<void(const Point&, double* out)>;

// ---------------------------------------------------------------------------
// Box cubature in parameter space (Genz-Malik 7/5 rule, global adaptivity).

struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

using BoxIntegrand = std::function<void(const double* u, double* out)>;
using BoxMask = std::function<bool(const double* u)>;

struct CubatureOptions {
  double tol = 1e-8;
  double rel_tol = 0.0;
  long max_cells = 2'000'000;
  int jobs = 0;
};

struct CubatureResult {
  std::vector<double> value;
  std::vector<double> error;  // includes mask ambiguity
  long cells = 0;
  QuadStatus status = QuadStatus::Converged;
};

/// Integrates an m-component integrand over a box (dimension >= 2). With a
/// mask, the integrand is multiplied by the mask indicator and cells where the
/// indicator is not constant on the rule nodes carry their unmasked mass as
/// extra error until that ambiguity is below a tenth of the tolerance.
CubatureResult cubature(const BoxIntegrand& f, std::size_t m, const Box& box, const CubatureOptions& opt,
                        const BoxMask& mask = {});

// ---------------------------------------------------------------------------
// Regions in C^n.

IntegralEstimate integrate(const ScalarField& f, const Polydisc& region, const QuadOptions& opt = {});

/// Integral over region restricted to {phi < -t}.
IntegralEstimate integrate_sublevel(const ScalarField& f, const ScalarField& phi, double t, const Polydisc& region,
                                    const QuadOptions& opt = {});

/// Vector-valued integral over region, optionally restricted to {phi < -t}.
std::vector<IntegralEstimate> integrate_vector(const VectorField& f, std::size_t m, const Polydisc& region,
                                               const QuadOptions& opt, const ScalarField& phi = {},
                                               double t = 0.0);

/// Integral over the spherical shell r_in <= |z - center| <= r_out (r_in may be 0).
IntegralEstimate integrate_shell(const ScalarField& f, const Point& center, double r_in, double r_out,
                                 const QuadOptions& opt = {});
std::vector<IntegralEstimate> integrate_shell_vector(const VectorField& f, std::size_t m, const Point& center,
                                                     double r_in, double r_out, const QuadOptions& opt);

// ---------------------------------------------------------------------------
// Integrability near a point.

enum class Integrability { Converges, Diverges, Indeterminate };
std::string to_string(Integrability v);

struct AnnulusRow {
  int level = 0;
  double inner_radius = 0.0;
  double outer_radius = 0.0;
  double integral = 0.0;
  double error = 0.0;
  double running_sum = 0.0;
};

struct IntegrabilityVerdict {
  Integrability verdict = Integrability::Indeterminate;
  std::vector<AnnulusRow> annuli;
  /// Least-squares slope of log2 I_j against j over all levels.
  double decay_slope = 0.0;
  /// Same slope fitted on the inner half of the levels only.
  double tail_slope = 0.0;
};

struct IntegrabilityOptions {
  double slope_margin = 0.05;
  double growth_factor = 1e6;
  double rel_tol = 1e-6;
  long max_cells_per_level = 200'000;
  int jobs = 0;
};

/// Dyadic annuli I_j over 2^{-j-1} rho0 <= |z - center| <= 2^{-j} rho0. Stops
/// early (with fewer annuli) once a level is infinite or, after 8 levels, the
/// running sum exceeds growth_factor * I_0.
IntegrabilityVerdict integrability_at(const ScalarField& f, const Point& center, double rho0, int levels,
                                      const IntegrabilityOptions& opt = {});

// ---------------------------------------------------------------------------

/// |int f e^{-phi} - (int f + int_0^inf (int_{phi<-t} f) e^t dt)| over region.
/// Throws std::invalid_argument if phi >= 0 is sampled or either side diverges.
double fubini_tail_residual(const ScalarField& f, const ScalarField& phi, const Polydisc& region,
                            const QuadOptions& opt = {});

/// Adaptive Gauss-Kronrod on [a, b] (b may be +inf).
IntegralEstimate integrate_1d(const std::function<double(double)>& f, double a, double b, double tol);

}  // namespace mslab

#endif  // MSLAB_QUADRATURE_HPP
