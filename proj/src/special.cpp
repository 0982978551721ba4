#include "mslab/special.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/expint.hpp>

namespace mslab {

double expint_e1(double x) {
  if (!(x > 0.0)) throw std::domain_error("E1 needs a positive argument");
  return boost::math::expint(1, x);
}

double expint_e1_scaled(double x) {
  if (!(x > 0.0)) throw std::domain_error("E1 needs a positive argument");
  if (x < 600.0) return std::exp(x) * boost::math::expint(1, x);
  // Asymptotic series; at x >= 600 ten terms are far below rounding.
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k <= 10; ++k) {
    term *= -static_cast<double>(k) / x;
    sum += term;
  }
  return sum / x;
}

double mollifier_density(double norm2, std::size_t n) {
  if (norm2 >= 1.0) return 0.0;
  double c = 1.0;
  for (std::size_t k = 1; k <= n + 3; ++k) c *= static_cast<double>(k);
  c /= 6.0 * std::pow(std::numbers::pi, static_cast<double>(n));
  const double u = 1.0 - norm2;
  return c * u * u * u;
}

}  // namespace mslab
