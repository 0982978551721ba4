#include "mslab/domain.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace mslab {

Polydisc::Polydisc(Point center, Eigen::VectorXd radii) : center_(std::move(center)), radii_(std::move(radii)) {
  if (center_.size() == 0) throw std::invalid_argument("polydisc dimension must be positive");
  if (center_.size() != radii_.size()) throw std::invalid_argument("polydisc center and radii differ in length");
  if ((radii_.array() <= 0.0).any() || !radii_.allFinite())
    throw std::invalid_argument("polydisc radii must be positive");
}

double Polydisc::volume() const {
  double v = 1.0;
  for (Eigen::Index k = 0; k < radii_.size(); ++k) v *= std::numbers::pi * radii_[k] * radii_[k];
  return v;
}

bool Polydisc::contains(const Point& z) const { return boundary_distance(z) > 0.0; }

double Polydisc::boundary_distance(const Point& z) const {
  if (z.size() != center_.size()) throw std::invalid_argument("point dimension does not match polydisc");
  double d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < radii_.size(); ++k) d = std::min(d, radii_[k] - std::abs(z[k] - center_[k]));
  return d;
}

Point Polydisc::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Point z(center_.size());
  for (Eigen::Index k = 0; k < center_.size(); ++k) {
    const double r = radii_[k] * std::sqrt(u(rng));
    const double t = 2.0 * std::numbers::pi * u(rng);
    z[k] = center_[k] + std::polar(r, t);
  }
  return z;
}

}  // namespace mslab
