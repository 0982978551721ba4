#ifndef MSLAB_SPECIAL_HPP
#define MSLAB_SPECIAL_HPP

#include <cstddef>

namespace mslab {

/// Exponential integral E1(x) = int_x^inf e^{-s}/s ds, x > 0.
double expint_e1(double x);

/// e^x E1(x), finite for all x > 0 (about 1/x for large x).
double expint_e1_scaled(double x);

/// Unit-mass bump c (1 - |x|^2)^3 on the unit ball of R^{2n}, evaluated at
/// |x|^2 = norm2 (zero outside the ball).
double mollifier_density(double norm2, std::size_t n);

}  // namespace mslab

#endif  // MSLAB_SPECIAL_HPP
