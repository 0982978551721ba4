// Reference implementations used only by the tests, written independently of
// the library code paths they check.
#ifndef MSLAB_TESTS_ORACLES_HPP
#define MSLAB_TESTS_ORACLES_HPP

#include <cmath>
#include <functional>

namespace oracle {

/// E1 by its power series (x <= 1) or a modified-Lentz continued fraction.
inline double e1(double x) {
  constexpr double euler_gamma = 0.57721566490153286061;
  if (x <= 1.0) {
    double sum = 0.0, term = 1.0;
    for (int k = 1; k < 200; ++k) {
      term *= -x / k;
      const double add = -term / k;
      sum += add;
      if (std::abs(add) < 1e-18 * std::abs(sum)) break;
    }
    return -euler_gamma - std::log(x) + sum;
  }
  // E1(x) = e^{-x} / (x + 1 - 1/(x + 3 - 4/(x + 5 - ...)))
  const double tiny = 1e-300;
  double b = x + 1.0, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x);
}

inline double g(double beta, double t) { return std::exp(-1.0) * e1((1.0 + beta) * t); }

namespace detail {
inline double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                      double whole, double tol, int depth) {
  const double m = 0.5 * (a + b), lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm), right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  return simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

/// Adaptive Simpson on [a, b].
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return detail::simpson(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 60);
}

/// theta(beta) = 1 + int_0^inf (1 - e^{-g_beta(t)}) e^t dt by adaptive Simpson
/// after t = u^3, cut where the tail bound e^{-beta T}/(e beta (1+beta) T) < tol.
inline double theta(double beta, double tol = 1e-10) {
  double T = 1.0;
  while (std::exp(-beta * T) / (std::exp(1.0) * beta * (1.0 + beta) * T) > tol) T *= 1.25;
  const auto f = [beta](double u) {
    if (u <= 0.0) return 0.0;
    const double t = u * u * u;
    return -std::expm1(-g(beta, t)) * std::exp(t) * 3.0 * u * u;
  };
  const double U = std::cbrt(T);
  double sum = 0.0;
  const int panels = 64;
  for (int i = 0; i < panels; ++i)
    sum += adaptive_simpson(f, U * i / panels, U * (i + 1) / panels, tol / panels);
  return 1.0 + sum;
}

}  // namespace oracle

#endif  // MSLAB_TESTS_ORACLES_HPP
