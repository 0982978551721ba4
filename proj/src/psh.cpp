#include "mslab/psh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "mslab/special.hpp"

namespace mslab {

std::string to_string(Confidence c) { return c == Confidence::High ? "High" : "Low"; }

std::string to_string(SkodaVerdict v) { return v == SkodaVerdict::Guaranteed ? "Guaranteed" : "NotGuaranteed"; }

namespace {

std::string point_string(const Point& z) {
  std::ostringstream os;
  os.precision(10);
  os << "(";
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    if (k) os << ", ";
    os << z[k].real() << (z[k].imag() < 0 ? "-" : "+") << std::abs(z[k].imag()) << "i";
  }
  os << ")";
  return os.str();
}

// Unit directions in C^n: a fixed pseudo-random set plus the coordinate axes.
std::vector<Point> sphere_directions(std::size_t n, int count) {
  std::vector<Point> dirs;
  if (n == 1) {
    for (int k = 0; k < count; ++k)
      dirs.push_back(Point::Constant(1, std::polar(1.0, 2.0 * std::numbers::pi * k / count)));
    return dirs;
  }
  for (std::size_t k = 0; k < n; ++k) {
    Point e = Point::Zero(static_cast<Eigen::Index>(n));
    e[static_cast<Eigen::Index>(k)] = 1.0;
    dirs.push_back(e);
  }
  std::mt19937_64 rng(0x1e10e9ULL);
  std::normal_distribution<double> g;
  const int total = count * static_cast<int>(n) * 4;
  for (int k = 0; k < total; ++k) {
    Point v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = Complex(g(rng), g(rng));
    dirs.push_back(v / v.norm());
  }
  return dirs;
}

}  // namespace

LelongEstimate lelong_number(const ScalarField& phi, const Point& center, double r_min, double r_max,
                             const LelongOptions& opt) {
  if (!(r_min > 0.0 && r_max > r_min)) throw std::invalid_argument("lelong_number needs 0 < r_min < r_max");
  if (opt.radii < 3) throw std::invalid_argument("lelong_number needs at least 3 radii");
  const std::vector<Point> dirs = sphere_directions(static_cast<std::size_t>(center.size()), opt.directions);
  LelongEstimate est;
  std::vector<double> x;
  for (int i = 0; i < opt.radii; ++i) {
    const double r = r_min * std::pow(r_max / r_min, static_cast<double>(i) / (opt.radii - 1));
    double best = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& d : dirs) {
      const Value v = phi(center + r * d);
      if (v.kind() == Value::Kind::PosInf) {
        best = std::numeric_limits<double>::infinity();
        any = true;
      } else if (v.finite()) {
        best = std::max(best, v.real());
        any = true;
      }
    }
    if (!any || !std::isfinite(best))
      throw std::invalid_argument("lelong_number: phi has no finite maximum on the sphere of radius " +
                                  std::to_string(r));
    est.radii_used.push_back(r);
    est.maxima.push_back(best);
    x.push_back(std::log(r));
  }
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += est.maxima[i];
    sxx += x[i] * x[i];
    sxy += x[i] * est.maxima[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double res = est.maxima[i] - (intercept + slope * x[i]);
    ss += res * res;
  }
  est.fit_residual = std::sqrt(ss / n);
  est.value = std::max(0.0, slope);
  est.confidence = est.fit_residual > opt.low_confidence_residual ? Confidence::Low : Confidence::High;
  return est;
}

LelongEstimate lelong_number(const Expr& phi, const Point& center, double r_min, double r_max, const Params& params,
                             const LelongOptions& opt) {
  return lelong_number([&](const Point& z) { return phi.eval(z, params); }, center, r_min, r_max, opt);
}

SkodaVerdict skoda_guarantee(const LelongEstimate& est) {
  if (est.confidence != Confidence::High)
    throw std::invalid_argument("skoda_guarantee refuses a low-confidence Lelong estimate");
  return est.value + 3.0 * est.fit_residual < 2.0 ? SkodaVerdict::Guaranteed : SkodaVerdict::NotGuaranteed;
}

namespace {

void check_cutoff(const CutoffParams& p) {
  if (!(p.t0 > 0.0) || !(p.B > 0.0 && p.B <= 1.0)) throw std::invalid_argument("cutoff needs t0 > 0 and B in (0, 1]");
}

// int_{-inf}^t b(s) ds relative to the left end of the window.
double b_integral(double t, const CutoffParams& p) {
  const double left = -p.t0 - p.B;
  if (t <= left) return 0.0;
  if (t <= -p.t0) return (t - left) * (t - left) / (2.0 * p.B);
  return p.B / 2.0 + (t + p.t0);
}

}  // namespace

double cutoff_b(double t, const CutoffParams& p) {
  check_cutoff(p);
  return std::clamp((t + p.t0 + p.B) / p.B, 0.0, 1.0);
}

double cutoff_chi(double t, const CutoffParams& p) {
  check_cutoff(p);
  return (b_integral(t, p) - b_integral(0.0, p)) / (p.t0 + p.B);
}

double mollify(const ScalarField& phi, double eps, const Point& p, const Polydisc& region, double tol) {
  if (!(eps > 0.0)) throw std::invalid_argument("mollify needs eps > 0");
  if (region.boundary_distance(p) <= eps) throw std::invalid_argument("mollify: point is within eps of the boundary");
  const std::size_t n = static_cast<std::size_t>(p.size());
  const double scale = std::pow(eps, -2.0 * static_cast<double>(n));
  ScalarField f = [&](const Point& z) {
    const double w = scale * mollifier_density((z - p).squaredNorm() / (eps * eps), n);
    if (w == 0.0) return Value(0.0);
    return phi(z) * Value(w);
  };
  QuadOptions opt;
  opt.tol = tol;
  opt.rel_tol = tol;
  const IntegralEstimate e = integrate_shell(f, p, 0.0, eps, opt);
  return e.value;
}

int bergman_truncation(double a, int m, double radius, double tail_tol) {
  if (!(a > 0.0) || m < 1) throw std::invalid_argument("bergman_truncation needs a > 0 and m >= 1");
  const double x = radius * radius;
  const double shift = 4.0 * a * m;
  // Terms |z|^{2l}(2l+2-4am)/(2pi) eventually decrease; sum backwards from far out.
  const int far = 20000;
  double tail = 0.0;
  int L = far;
  for (int l = far; l >= 0; --l) {
    if (2.0 * l + 2.0 - shift <= 0.0) break;
    tail += std::pow(x, l) * (2.0 * l + 2.0 - shift) / (2.0 * std::numbers::pi);
    if (tail >= tail_tol) break;
    L = l - 1;
  }
  return std::max(L, 1);
}

double bergman_log(double a, int m, int L, Complex z) {
  if (!(a > 0.0) || m < 1) throw std::invalid_argument("bergman_log needs a > 0 and m >= 1");
  const double x = std::norm(z);
  if (!(x < 1.0)) throw std::invalid_argument("bergman_log needs |z| < 1");
  if (L < bergman_truncation(a, m)) throw std::invalid_argument("bergman_log: truncation L too small for a 1e-12 tail");
  const double shift = 4.0 * a * m;
  double sum = 0.0;
  for (int l = 0; l <= L; ++l) {
    if (!(2.0 * l + 2.0 - shift > 0.0)) continue;  // l > 2am - 1
    sum += std::pow(x, l) * (2.0 * l + 2.0 - shift) / (2.0 * std::numbers::pi);
  }
  return std::log(sum) / (2.0 * m);
}

ViolationReport submean_check(const ScalarField& g, const Polydisc& region, int trials, std::uint64_t seed,
                              double tol) {
  ViolationReport rep;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss;
  const auto n = static_cast<Eigen::Index>(region.dim());
  for (int t = 0; t < trials; ++t) {
    ++rep.trials;
    const Point c = region.sample(rng);
    Point v(n);
    for (Eigen::Index k = 0; k < n; ++k) v[k] = Complex(gauss(rng), gauss(rng));
    v /= v.norm();
    const double r = 0.9 * region.boundary_distance(c) * u(rng);
    if (!(r > 0.0)) {
      ++rep.skipped;
      continue;
    }
    const Value gc = g(c);
    double s16 = 0.0, s32 = 0.0;
    bool ok = gc.is_real() || gc.infinite();
    for (int k = 0; k < 32 && ok; ++k) {
      const Value gv = g(c + std::polar(r, 2.0 * std::numbers::pi * k / 32.0) * v);
      if (!gv.finite() || !gv.is_real()) {
        ok = false;
        break;
      }
      s32 += gv.real();
      if (k % 2 == 0) s16 += gv.real();
    }
    if (!ok) {
      ++rep.skipped;
      continue;
    }
    if (gc.kind() == Value::Kind::NegInf) continue;
    if (gc.kind() == Value::Kind::PosInf) {
      ++rep.violations;
      if (!rep.witness) rep.witness = c;
      rep.worst_excess = std::numeric_limits<double>::infinity();
      continue;
    }
    const double mean = s32 / 32.0;
    const double quad_err = std::abs(mean - s16 / 16.0);
    const double excess = gc.real() - mean;
    if (excess > tol + quad_err) {
      ++rep.violations;
      if (!rep.witness) rep.witness = c;
    }
    rep.worst_excess = std::max(rep.worst_excess, excess);
  }
  return rep;
}

MeasureEstimate convergence_in_measure(const Expr& phi_seq, const Expr& phi, const Polydisc& region, double delta,
                                       int j, std::uint64_t seed, long samples, const Params& params) {
  if (!(delta > 0.0)) throw std::invalid_argument("convergence_in_measure needs delta > 0");
  if (samples < 1) throw std::invalid_argument("convergence_in_measure needs samples >= 1");
  Params with_j = params;
  with_j["j"] = static_cast<double>(j);
  std::mt19937_64 rng(seed);
  long hits = 0;
  for (long s = 0; s < samples; ++s) {
    const Point z = region.sample(rng);
    const Value d = phi_seq.eval(z, with_j) - phi.eval(z, with_j);
    if (d.infinite() || (d.finite() && std::abs(d.complex()) > delta)) ++hits;
  }
  const double frac = static_cast<double>(hits) / static_cast<double>(samples);
  MeasureEstimate m;
  m.samples = samples;
  m.value = region.volume() * frac;
  m.std_error = region.volume() * std::sqrt(frac * (1.0 - frac) / static_cast<double>(samples));
  return m;
}

IntegralEstimate exp_gap_lp(const ScalarField& phi, const ScalarField& phi_j, double p, const Polydisc& region,
                            const QuadOptions& opt, std::uint64_t seed) {
  if (!(p > 0.0)) throw std::invalid_argument("exp_gap_lp needs p > 0");
  std::mt19937_64 rng(seed);
  for (int s = 0; s < 2000; ++s) {
    const Point z = region.sample(rng);
    const Value a = phi(z), b = phi_j(z);
    if (!a.finite() || !b.finite()) continue;
    if (b.real() > a.real() + 1e-12 * (1.0 + std::abs(a.real())))
      throw std::invalid_argument("exp_gap_lp: phi_j <= phi fails at " + point_string(z));
  }
  ScalarField f = [&](const Point& z) {
    const Value d = phi(z) - phi_j(z);
    // Both sides -inf happens only on the (null) polar set.
    if (d.is_undefined()) return Value(0.0);
    if (d.kind() == Value::Kind::PosInf) return Value::pos_inf();
    if (d.kind() == Value::Kind::NegInf) return Value(1.0);
    return Value(std::pow(std::abs(std::expm1(d.real())), p));
  };
  return integrate(f, region, opt);
}

}  // namespace mslab
