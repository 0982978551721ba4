#ifndef MSLAB_PSH_HPP
#define MSLAB_PSH_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mslab/domain.hpp"
#include "mslab/expr.hpp"
#include "mslab/quadrature.hpp"

namespace mslab {

enum class Confidence { High, Low };
std::string to_string(Confidence c);

struct LelongEstimate {
  double value = 0.0;
  std::vector<double> radii_used;
  std::vector<double> maxima;  // max of phi on each sphere
  double fit_residual = 0.0;   // RMS residual of the linear fit
  Confidence confidence = Confidence::High;
};

struct LelongOptions {
  int radii = 16;
  int directions = 64;  // circle points (n = 1) or sphere directions (n > 1)
  double low_confidence_residual = 0.05;
};

/// Slope of max_{|z-x|=r} phi against log r on a geometric ladder in
/// [r_min, r_max]. Normalised so that phi = c log|z| has value c.
LelongEstimate lelong_number(const ScalarField& phi, const Point& center, double r_min, double r_max,
                             const LelongOptions& opt = {});
LelongEstimate lelong_number(const Expr& phi, const Point& center, double r_min, double r_max,
                             const Params& params = {}, const LelongOptions& opt = {});

enum class SkodaVerdict { Guaranteed, NotGuaranteed };
std::string to_string(SkodaVerdict v);

/// Guaranteed iff value + 3 * residual < 2. Throws on Low confidence.
SkodaVerdict skoda_guarantee(const LelongEstimate& est);

struct CutoffParams {
  double t0 = 1.0;
  double B = 1.0;
};

/// b(t) = int_{-inf}^t (1/B) 1{-t0-B < s < -t0} ds.
double cutoff_b(double t, const CutoffParams& p);
/// chi(t) = (1/(t0+B)) int_0^t b(s) ds.
double cutoff_chi(double t, const CutoffParams& p);

/// (phi * rho_eps)(p) with the unit-mass bump c (1-|y|^2)^3 scaled to radius eps.
double mollify(const ScalarField& phi, double eps, const Point& p, const Polydisc& region, double tol = 1e-10);

/// Smallest truncation L with orthonormal-series tail below tail_tol on |z| <= radius.
int bergman_truncation(double a, int m, double radius = 0.9, double tail_tol = 1e-12);

/// phi_m(z) = (1/2m) log sum_{2am-1 < l <= L} |z|^{2l} (2l+2-4am)/(2 pi): the
/// Bergman approximant of phi = 2a log|z| on the unit disc.
double bergman_log(double a, int m, int L, Complex z);

struct ViolationReport {
  int trials = 0;
  int violations = 0;
  int skipped = 0;
  double worst_excess = 0.0;
  std::optional<Point> witness;
  bool passed() const { return violations == 0; }
};

/// Random circles in random complex lines; counts centre values exceeding the
/// 32-point circle mean by more than tol + the 16/32-point discrepancy.
ViolationReport submean_check(const ScalarField& g, const Polydisc& region, int trials, std::uint64_t seed,
                              double tol = 1e-6);

struct MeasureEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long samples = 0;
};

/// Monte Carlo measure of {|phi_j - phi| > delta} in region; phi_seq is
/// evaluated with the parameter j bound.
MeasureEstimate convergence_in_measure(const Expr& phi_seq, const Expr& phi, const Polydisc& region, double delta,
                                       int j, std::uint64_t seed, long samples = 200'000,
                                       const Params& params = {});

/// int_region |e^{phi - phi_j} - 1|^p. Throws std::invalid_argument naming a
/// witness if phi_j <= phi fails at a sample.
IntegralEstimate exp_gap_lp(const ScalarField& phi, const ScalarField& phi_j, double p, const Polydisc& region,
                            const QuadOptions& opt = {}, std::uint64_t seed = 7);

}  // namespace mslab

#endif  // MSLAB_PSH_HPP
