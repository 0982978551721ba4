#ifndef MSLAB_DOMAIN_HPP
#define MSLAB_DOMAIN_HPP

#include <cstddef>
#include <random>

#include "mslab/expr.hpp"

namespace mslab {

/// Product of discs {|z_k - center_k| < radii_k}.
class Polydisc {
 public:
  Polydisc() : Polydisc(Point::Zero(1), Eigen::VectorXd::Ones(1)) {}
  Polydisc(Point center, Eigen::VectorXd radii);

  static Polydisc unit(std::size_t dim) { return Polydisc(Point::Zero(dim), Eigen::VectorXd::Ones(dim)); }
  static Polydisc centered(std::size_t dim, double radius) {
    return Polydisc(Point::Zero(dim), Eigen::VectorXd::Constant(dim, radius));
  }

  std::size_t dim() const { return static_cast<std::size_t>(center_.size()); }
  const Point& center() const { return center_; }
  const Eigen::VectorXd& radii() const { return radii_; }
  double min_radius() const { return radii_.minCoeff(); }
  double volume() const;

  bool contains(const Point& z) const;
  /// Distance from z to the boundary (negative outside).
  double boundary_distance(const Point& z) const;

  /// Uniform sample (each factor uniform on its disc).
  Point sample(std::mt19937_64& rng) const;

  friend bool operator==(const Polydisc&, const Polydisc&) = default;

 private:
  Point center_;
  Eigen::VectorXd radii_;
};

}  // namespace mslab

#endif  // MSLAB_DOMAIN_HPP
