#include <doctest.h>

#include <cmath>

#include "mslab/quadrature.hpp"

using namespace mslab;

namespace {

double r2(const Point& z) { return z.squaredNorm(); }

QuadOptions singular_at_origin(std::size_t dim, double tol) {
  QuadOptions q;
  q.tol = tol;
  q.singular_points.push_back(Point::Zero(static_cast<Eigen::Index>(dim)));
  return q;
}

}  // namespace

TEST_SUITE("quadrature") {
  TEST_CASE("area of the unit disc") {
    QuadOptions q;
    q.tol = 1e-10;
    const IntegralEstimate e = integrate([](const Point&) { return Value(1.0); }, Polydisc::unit(1), q);
    CHECK(e.status == QuadStatus::Converged);
    CHECK(std::abs(e.value - M_PI) <= 1e-10);
    CHECK(e.abs_error <= 1e-10);
  }

  TEST_CASE("volume of the unit bidisc") {
    QuadOptions q;
    q.tol = 1e-8;
    const IntegralEstimate e = integrate([](const Point&) { return Value(1.0); }, Polydisc::unit(2), q);
    CHECK(std::abs(e.value - M_PI * M_PI) <= 1e-8);
  }

  TEST_CASE("|z|^-1 over the unit disc") {
    const IntegralEstimate e =
        integrate([](const Point& z) { return Value(1.0 / std::sqrt(r2(z))); }, Polydisc::unit(1),
                  singular_at_origin(1, 1e-9));
    CHECK(e.status == QuadStatus::Converged);
    CHECK(std::abs(e.value - 2.0 * M_PI) <= 1e-8);
  }

  TEST_CASE("|z|^-2 over the unit disc diverges") {
    const IntegralEstimate e =
        integrate([](const Point& z) { return Value(1.0 / r2(z)); }, Polydisc::unit(1), singular_at_origin(1, 1e-8));
    CHECK(e.status == QuadStatus::DivergenceSuspected);
    CHECK(e.infinite());
  }

  TEST_CASE("sublevel sets") {
    const ScalarField one = [](const Point&) { return Value(1.0); };
    const ScalarField phi = [](const Point& z) { return Value(0.5 * std::log(r2(z))); };  // 2a log|z|, a = 1/2
    QuadOptions q = singular_at_origin(1, 1e-10);
    const IntegralEstimate full = integrate(one, Polydisc::unit(1), q);
    const IntegralEstimate all = integrate_sublevel(one, phi, -1.0, Polydisc::unit(1), q);
    CHECK(std::abs(all.value - full.value) <= 2e-10);
    const IntegralEstimate s1 = integrate_sublevel(one, phi, 1.0, Polydisc::unit(1), q);
    CHECK(std::abs(s1.value - M_PI * std::exp(-2.0)) <= 1e-9);
    const IntegralEstimate s20 = integrate_sublevel(one, phi, 20.0, Polydisc::unit(1), q);
    CHECK(s20.value <= 1e-9);
  }

  TEST_CASE("sublevel set in two variables") {
    const ScalarField one = [](const Point&) { return Value(1.0); };
    const ScalarField phi = [](const Point& z) { return Value(std::log(std::abs(z[0]) * std::abs(z[1]))); };
    QuadOptions q;
    q.tol = 1e-3;
    q.max_cells = 100'000;
    // {|z1 z2| < e^{-t}} in the unit bidisc has volume pi^2 e^{-2t} (1 + 2t)
    const double t = 0.5;
    const IntegralEstimate e = integrate_sublevel(one, phi, t, Polydisc::unit(2), q);
    const double err = std::abs(e.value - M_PI * M_PI * std::exp(-2.0 * t) * (1.0 + 2.0 * t));
    CHECK(err <= 1e-2);
    CHECK(err <= e.abs_error + q.tol);
    if (e.status == QuadStatus::Converged) CHECK(e.abs_error <= q.tol);
  }

  TEST_CASE("shell integrals") {
    QuadOptions q;
    q.tol = 1e-9;
    Point c = Point::Zero(2);
    const IntegralEstimate ball = integrate_shell([](const Point&) { return Value(1.0); }, c, 0.0, 1.0, q);
    CHECK(std::abs(ball.value - M_PI * M_PI / 2.0) <= 1e-8);
    // |z|^{-3} in C^2: 2 pi^2 int_0^1 r^{-3} r^3 dr = 2 pi^2
    const IntegralEstimate sing =
        integrate_shell([](const Point& z) { return Value(std::pow(r2(z), -1.5)); }, c, 0.0, 1.0, q);
    CHECK(std::abs(sing.value - 2.0 * M_PI * M_PI) <= 1e-7);
  }

  TEST_CASE("integrability verdicts") {
    const Point o1 = Point::Zero(1), o2 = Point::Zero(2);
    CHECK(integrability_at([](const Point& z) { return Value(std::pow(r2(z), -0.75)); }, o1, 0.5, 16).verdict ==
          Integrability::Converges);
    CHECK(integrability_at([](const Point& z) { return Value(std::pow(r2(z), -1.5)); }, o2, 0.5, 16).verdict ==
          Integrability::Converges);
    CHECK(integrability_at([](const Point& z) { return Value(std::pow(r2(z), -1.25)); }, o1, 0.5, 16).verdict ==
          Integrability::Diverges);
    // The boundary case has constant annulus integrals: never reported convergent.
    const IntegrabilityVerdict b = integrability_at([](const Point& z) { return Value(1.0 / r2(z)); }, o1, 0.5, 16);
    CHECK(b.verdict != Integrability::Converges);
    CHECK(std::abs(b.decay_slope) < 0.05);
    CHECK(std::abs(b.annuli.back().integral - 2.0 * M_PI * std::log(2.0)) < 1e-6);
  }

  TEST_CASE("fubini tail identity") {
    QuadOptions q = singular_at_origin(1, 1e-8);
    const ScalarField one = [](const Point&) { return Value(1.0); };
    const ScalarField zero = [](const Point&) { return Value(0.0); };
    const ScalarField constant = [](const Point&) { return Value(-0.7); };
    const ScalarField model = [](const Point& z) { return Value(0.5 * std::log(r2(z))); };
    CHECK(fubini_tail_residual(one, constant, Polydisc::unit(1), q) < q.tol);
    CHECK(fubini_tail_residual(zero, model, Polydisc::unit(1), q) == 0.0);
    CHECK(fubini_tail_residual(one, model, Polydisc::unit(1), q) < 5.0 * q.tol);
    const ScalarField positive = [](const Point&) { return Value(0.1); };
    CHECK_THROWS_AS(fubini_tail_residual(one, positive, Polydisc::unit(1), q), std::invalid_argument);
  }

  TEST_CASE("results do not depend on the worker count") {
    const ScalarField f = [](const Point& z) { return Value(std::pow(r2(z), -0.4) * (1.0 + z[0].real())); };
    QuadOptions q = singular_at_origin(1, 1e-10);
    q.jobs = 1;
    const IntegralEstimate a = integrate(f, Polydisc::unit(1), q);
    q.jobs = 4;
    const IntegralEstimate b = integrate(f, Polydisc::unit(1), q);
    CHECK(a.value == b.value);
    CHECK(a.abs_error == b.abs_error);
    CHECK(a.cells_used == b.cells_used);
  }

  TEST_CASE("one-dimensional integrals") {
    CHECK(integrate_1d([](double x) { return std::exp(-x); }, 0.0, INFINITY, 1e-12).value ==
          doctest::Approx(1.0).epsilon(1e-11));
    CHECK(integrate_1d([](double x) { return x * x; }, 0.0, 3.0, 1e-12).value == doctest::Approx(9.0));
  }

  TEST_CASE("vector integrals match scalar ones") {
    QuadOptions q;
    q.tol = 1e-10;
    const auto v = integrate_vector(
        [](const Point& z, double* out) {
          out[0] = 1.0;
          out[1] = r2(z);
        },
        2, Polydisc::unit(1), q);
    CHECK(std::abs(v[0].value - M_PI) < 1e-9);
    CHECK(std::abs(v[1].value - M_PI / 2.0) < 1e-9);
  }
}
