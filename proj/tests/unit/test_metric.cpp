#include <doctest.h>

#include <cmath>
#include <random>

#include "mslab/linalg.hpp"
#include "mslab/metric.hpp"

using namespace mslab;

namespace {

Point pt(Complex a) {
  Point p(1);
  p[0] = a;
  return p;
}

SingularMetric diag_metric(const std::string& a, const std::string& b, std::vector<Point> singular = {}) {
  return SingularMetric::parse(2, {{a, "0"}, {b}}, Polydisc::unit(1), std::move(singular));
}

Eigen::MatrixXcd random_pd(std::mt19937_64& rng, int r) {
  std::normal_distribution<double> n;
  Eigen::MatrixXcd a(r, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) a(i, j) = Complex(n(rng), n(rng));
  return a * a.adjoint() + 0.1 * Eigen::MatrixXcd::Identity(r, r);
}

}  // namespace

TEST_SUITE("metric") {
  TEST_CASE("scalar singular weight") {
    const SingularMetric h = SingularMetric::parse(1, {{"abs2(z1)^-0.5"}}, Polydisc::unit(1));
    const PointMetric m = metric_at(h, pt(0.25));
    CHECK(m.values(0, 0).real() == doctest::Approx(4.0));
    CHECK(m.det.real() == doctest::Approx(4.0));
  }

  TEST_CASE("identity at any point") {
    const SingularMetric h = SingularMetric::identity(3, Polydisc::unit(1));
    const PointMetric m = metric_at(h, pt({0.3, -0.1}));
    for (const auto& e : m.eigenvalues) CHECK(e.real() == doctest::Approx(1.0));
    CHECK(m.det.real() == doctest::Approx(1.0));
    CHECK(log_det(h, pt(0.7)).real() == doctest::Approx(0.0));
  }

  TEST_CASE("infinite eigenvalue at the singular point") {
    const SingularMetric h = diag_metric("abs2(z1)^-0.5", "1", {pt(0.0)});
    const PointMetric m = metric_at(h, pt(0.0));
    CHECK_FALSE(m.finite);
    CHECK(m.eigenvalues.back().kind() == Value::Kind::PosInf);
  }

  TEST_CASE("log det") {
    const SingularMetric h = SingularMetric::parse(1, {{"abs2(z1)^-0.5"}}, Polydisc::unit(1));
    // phi = 2a log|z| with a = 1/2
    CHECK(log_det(h, pt(0.5)).real() == doctest::Approx(std::log(0.5)));
    const SingularMetric d = diag_metric("abs2(z1)^-1", "abs2(z1)^-1");
    CHECK(log_det(d, pt(std::exp(-1.0))).real() == doctest::Approx(-4.0));
  }

  TEST_CASE("dual") {
    const SingularMetric h = diag_metric("2", "1");
    const PointMetric d = dual_at(h, pt(0.1));
    CHECK(d.values(0, 0).real() == doctest::Approx(0.5));
    CHECK(d.values(1, 1).real() == doctest::Approx(1.0));
    const SingularMetric s = SingularMetric::parse(1, {{"4"}}, Polydisc::unit(1));
    CHECK(dual_at(s, pt(0.1)).values(0, 0).real() == doctest::Approx(0.25));
    CHECK_THROWS_AS(dual_at(SingularMetric::parse(1, {{"abs2(z1)^-1"}}, Polydisc::unit(1)), pt(0.0)),
                    std::domain_error);
  }

  TEST_CASE("dual eigenvalues invert and the dual is an involution") {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 50; ++k) {
      const Eigen::MatrixXcd a = random_pd(rng, 3);
      const Eigen::VectorXd ea = hermitian_eigenvalues<Complex>(a);
      const Eigen::VectorXd ed = hermitian_eigenvalues<Complex>(dual_matrix<Complex>(a));
      for (int i = 0; i < 3; ++i) CHECK(ed[i] * ea[2 - i] == doctest::Approx(1.0).epsilon(1e-8));
      CHECK((dual_matrix<Complex>(dual_matrix<Complex>(a)) - a).cwiseAbs().maxCoeff() < 1e-8 * a.norm());
    }
  }

  TEST_CASE("normalize") {
    const SingularMetric s = SingularMetric::parse(1, {{"abs2(z1)^-0.7"}}, Polydisc::unit(1));
    CHECK(metric_at(normalize(s), pt(0.3)).values(0, 0).real() == doctest::Approx(1.0));
    const SingularMetric h = diag_metric("4", "1");
    const PointMetric m = metric_at(normalize(h), pt(0.2));
    CHECK(m.values(0, 0).real() == doctest::Approx(1.0));
    CHECK(m.values(1, 1).real() == doctest::Approx(0.25));
    // det homogeneity: det(h / det h) = det(h)^{1 - r}
    const SingularMetric g = SingularMetric::parse(3, {{"2 + abs2(z1)", "z1", "0.1"}, {"3", "conj(z1)"}, {"1.5"}},
                                                   Polydisc::unit(1));
    for (const Point& z : sample_points(Polydisc::unit(1), 30, 9)) {
      const double dg = metric_at(g, z).det.real();
      CHECK(metric_at(normalize(g), z).det.real() == doctest::Approx(std::pow(dg, -2.0)).epsilon(1e-8));
    }
  }

  TEST_CASE("twist") {
    const SingularMetric h = SingularMetric::parse(1, {{"abs2(z1)^-0.5"}}, Polydisc::unit(1));
    CHECK(metric_at(twist(h, 0.0), pt(0.4)).values(0, 0).real() == doctest::Approx(metric_at(h, pt(0.4)).values(0, 0).real()));
    CHECK(metric_at(twist(h, 1.0), pt(0.4)).values(0, 0).real() == doctest::Approx(1.0 / 0.16));
    const SingularMetric g = diag_metric("2 + abs2(z1)", "3");
    for (const Point& z : sample_points(Polydisc::unit(1), 20, 4)) {
      const double dg = metric_at(g, z).det.real();
      // det(h (det h)^b e^{-psi}) = det(h)^{1 + r b} e^{-r psi}
      const SingularMetric t = twist(g, 0.5, parse_expr("re(z1)"));
      CHECK(metric_at(t, z).det.real() ==
            doctest::Approx(std::pow(dg, 2.0) * std::exp(-2.0 * z[0].real())).epsilon(1e-8));
    }
  }

  TEST_CASE("from_family") {
    Polydisc d = Polydisc::unit(1);
    const FamilyMetric one = from_family({{Polynomial::parse("1", 1)}}, 1, d);
    CHECK(metric_at(one.normalized, pt(0.3)).values(0, 0).real() == doctest::Approx(1.0));
    const FamilyMetric f = from_family(
        {{Polynomial::parse("1", 1), Polynomial::parse("z1", 1)}, {Polynomial::parse("0", 1), Polynomial::parse("z1^2", 1)}},
        1, d);
    const Complex z(0.3, 0.4);
    const PointMetric m = metric_at(f.raw, pt(z));
    const double a = std::norm(z);
    CHECK(std::abs(m.values(0, 0) - 1.0) < 1e-14);
    CHECK(std::abs(m.values(0, 1) - std::conj(z)) < 1e-14);
    CHECK(std::abs(m.values(1, 0) - z) < 1e-14);
    CHECK(std::abs(m.values(1, 1) - (a + a * a)) < 1e-14);
    CHECK(m.det.real() == doctest::Approx(a * a));
    for (const Point& p : sample_points(d, 200, 5)) CHECK(metric_at(f.raw, p).eigenvalues.front().real() >= -1e-10);
    CHECK_THROWS_AS(from_family({{Polynomial::parse("1", 1), Polynomial::parse("z1", 1)}}, 0, d), std::invalid_argument);
  }

  TEST_CASE("section norms") {
    const SingularMetric h = SingularMetric::parse(1, {{"abs2(z1)^-0.5"}}, Polydisc::unit(1), {pt(0.0)});
    CHECK(section_norm2(h, Section::parse({"0"}, 1), pt(0.0)).real() == 0.0);
    CHECK(section_norm2(h, Section::parse({"1"}, 1), pt(0.25)).real() == doctest::Approx(4.0));
    CHECK(section_norm2(h, Section::parse({"1"}, 1), pt(0.0)).kind() == Value::Kind::PosInf);
    const SingularMetric id = SingularMetric::identity(2, Polydisc::centered(1, 3.0));
    CHECK(section_norm2(id, Section::parse({"z1", "1"}, 1), pt(2.0)).real() == doctest::Approx(5.0));
  }

  TEST_CASE("order checks") {
    Eigen::MatrixXd a(2, 2), b = Eigen::MatrixXd::Identity(2, 2);
    a << 2, 0, 0, 1;
    CHECK(dominates<double>(a, b));
    const Eigen::MatrixXd rev = reversal_matrix<double>(a, b);
    CHECK(rev(0, 0) == doctest::Approx(0.0));
    CHECK(rev(1, 1) == doctest::Approx(1.0));
    CHECK(is_psd<double>(rev));
    CHECK(dominates<double>(b, b));
    CHECK(is_psd<double>(reversal_matrix<double>(b, b)));

    std::mt19937_64 rng(17);
    for (int k = 0; k < 100; ++k) {
      const Eigen::MatrixXcd p = random_pd(rng, 3) * 0.3;
      const Eigen::MatrixXcd bb = random_pd(rng, 3);
      const Eigen::MatrixXcd s = psd_sqrt<Complex>(bb);
      const Eigen::MatrixXcd c = s * (Eigen::MatrixXcd::Identity(3, 3) + p) * s;
      const double scale = c.norm() * bb.norm() * bb.norm();
      CHECK(dominates<Complex>(c, bb, 1e-10 * c.norm()));
      CHECK(is_psd<Complex>(reversal_matrix<Complex>(c, bb), 1e-10 * scale));
    }

    const SingularMetric h = SingularMetric::parse(1, {{"abs2(z1)^-0.5"}}, Polydisc::unit(1));
    const OrderReport rep = check_order(twist(h, 0.5), h, sample_points(Polydisc::unit(1), 50, 1));
    CHECK(rep.verdict());
    CHECK_FALSE(check_order(h, twist(h, 0.5), sample_points(Polydisc::unit(1), 50, 1)).dominates);
  }

  TEST_CASE("regularisation increases as eps decreases") {
    const SingularMetric h = SingularMetric::parse(1, {{"abs2(z1)^-0.5"}}, Polydisc::unit(1), {pt(0.0)});
    const Point p = pt({0.3, 0.1});
    const double a = regularize(h, 0.2, p).values(0, 0).real();
    const double b = regularize(h, 0.1, p).values(0, 0).real();
    const double c = regularize(h, 0.05, p).values(0, 0).real();
    CHECK(a < b);
    CHECK(b < c);
    CHECK(c <= metric_at(h, p).values(0, 0).real() * (1.0 + 1e-9));
    const Polydisc inner = Polydisc::centered(1, 0.8);
    for (const Point& z : sample_points(inner, 20, 2)) {
      const double r1 = regularize(h, 0.1, z).values(0, 0).real();
      const double r05 = regularize(h, 0.05, z).values(0, 0).real();
      CHECK(r05 >= r1 - 1e-6);
    }
    const SingularMetric flat = SingularMetric::identity(1, Polydisc::unit(1));
    for (double eps : {0.2, 0.1, 0.05})
      CHECK(std::abs(regularize(flat, eps, p).values(0, 0).real() - 1.0) <= 3.0 * eps);
  }

  TEST_CASE("Nakano curvature") {
    const SingularMetric id = SingularMetric::identity(2, Polydisc::unit(1));
    CHECK(std::abs(nakano_min_eigenvalue(id, pt(0.2))) < 1e-6);
    const SingularMetric gauss = SingularMetric::parse(1, {{"exp(-abs2(z1))"}}, Polydisc::unit(1));
    CHECK(nakano_min_eigenvalue(gauss, pt({0.3, 0.2})) == doctest::Approx(1.0).epsilon(1e-4));
    const SingularMetric anti = SingularMetric::parse(1, {{"exp(abs2(z1))"}}, Polydisc::unit(1));
    CHECK(nakano_min_eigenvalue(anti, pt({0.3, 0.2})) == doctest::Approx(-1.0).epsilon(1e-4));

    // Line subbundle of the flat C^2 spanned by (1, z): curvature -1/(1+|z|^2)^2.
    const Complex w(0.3, -0.2);
    const SingularMetric line = SingularMetric::parse(1, {{"1 + abs2(z1)"}}, Polydisc::unit(1));
    CHECK(nakano_min_eigenvalue(line, pt(w)) == doctest::Approx(-1.0 / std::pow(1.0 + std::norm(w), 2)).epsilon(1e-4));
    const SingularMetric d2 = diag_metric("exp(-abs2(z1))", "exp(-2*abs2(z1))");
    CHECK(nakano_min_eigenvalue(d2, pt(w)) == doctest::Approx(1.0).epsilon(1e-4));

    // Two members in rank two give a flat metric; a third member makes the raw metric curved.
    Polydisc d = Polydisc::unit(1);
    auto P = [](const char* s) { return Polynomial::parse(s, 1); };
    const FamilyMetric flat = from_family({{P("1"), P("z1")}, {P("0"), P("z1^2")}}, 1, d);
    CHECK(std::abs(nakano_min_eigenvalue(flat.normalized, pt({0.7, 0.2}))) < 1e-5);
    const FamilyMetric f = from_family({{P("1"), P("0")}, {P("0"), P("1")}, {P("z1"), P("z1^2")}}, 1, d);
    for (const Point& z : sample_points(Polydisc::centered(1, 0.9), 30, 6)) {
      if (std::abs(z[0]) < 0.05) continue;
      CHECK(nakano_min_eigenvalue(f.normalized, z) >= -1e-6);
      CHECK(nakano_min_eigenvalue(f.raw, z) < -0.5);
    }
  }
}
