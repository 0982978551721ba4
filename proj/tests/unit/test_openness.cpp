#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "../common/oracles.hpp"
#include "mslab/openness.hpp"

using namespace mslab;

namespace {

constexpr double kPi = std::numbers::pi;

SingularMetric model(double a, double radius = 1.0, std::size_t dim = 1) {
  return SingularMetric::monomial(MonomialWeights::scalar(dim, a), Polydisc::centered(dim, radius));
}

Section sec(const std::string& text, std::size_t dim = 1) { return Section::parse({text}, dim); }

Point origin(std::size_t dim = 1) { return Point::Zero(static_cast<Eigen::Index>(dim)); }

GCurve closed_curve(double rate, double scale, int count, double t_last) {
  GCurve c;
  for (int i = 0; i < count; ++i) {
    const double t = t_last * i / (count - 1);
    c.samples.push_back({t, scale * std::exp(-rate * t), 0.0});
  }
  return c;
}

}  // namespace

TEST_SUITE("openness") {
  TEST_CASE("g_beta") {
    CHECK(g_beta(0.0, 1.0) == doctest::Approx(0.0807068).epsilon(1e-6));
    CHECK(g_beta(0.0, 1.0) == doctest::Approx(oracle::g(0.0, 1.0)).epsilon(1e-13));
    CHECK_THROWS_AS(g_beta(1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(g_beta(1.0, -1.0), std::invalid_argument);

    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
      const double beta = 5.0 * u(rng), t = 1e-3 + 4.0 * u(rng);
      const double v = g_beta(beta, t);
      CHECK(v > 0.0);
      CHECK(v <= std::exp(-1.0 - (1.0 + beta) * t) / ((1.0 + beta) * t) * (1.0 + 1e-12));
      CHECK(v == doctest::Approx(oracle::g(beta, t)).epsilon(1e-11));
    }
    // Direct quadrature of the defining integral.
    for (double t : {0.05, 0.5, 2.0}) {
      const double beta = 0.7;
      const double direct = oracle::adaptive_simpson(
          [&](double u) {
            if (u == 0.0) return 0.0;
            const double s = t / u;  // s in [t, inf)
            return std::exp(-1.0 - (1.0 + beta) * s) / u;
          },
          0.0, 1.0, 1e-13);
      CHECK(g_beta(beta, t) == doctest::Approx(direct).epsilon(1e-8));
    }
    for (double b = 0.0; b < 3.0; b += 0.25)
      for (double t = 0.1; t < 3.0; t += 0.2) {
        CHECK(g_beta(b + 0.25, t) < g_beta(b, t));
        CHECK(g_beta(b, t + 0.2) < g_beta(b, t));
      }
  }

  TEST_CASE("theta") {
    const ThetaValue t1 = theta(1.0, 1e-8);
    CHECK(t1.value >= 1.1);
    CHECK(t1.value <= 1.6);
    CHECK(t1.quad_error <= 1e-8);
    CHECK(t1.value == doctest::Approx(oracle::theta(1.0, 1e-10)).epsilon(1e-7));
    const double t100 = theta(100.0).value;
    CHECK(t100 > 1.0);
    CHECK(t100 < 1.02);
    CHECK(theta(0.1).value > t1.value);
    CHECK(t1.value > theta(10.0).value);
    for (double b : {0.05, 0.3, 3.0, 30.0})
      CHECK(theta(b, 1e-9).value == doctest::Approx(oracle::theta(b, 1e-10)).epsilon(1e-6));

    double prev = 1.0;
    for (int k = 1; k <= 4; ++k) {
      const double v = theta(std::pow(10.0, -k)).value;
      CHECK(v > prev);
      prev = v;
    }
    double last = std::numeric_limits<double>::infinity();
    for (double b = 0.05; b < 200.0; b *= 1.7) {
      const double v = theta(b).value;
      CHECK(v >= 1.0);
      CHECK(v < last);
      last = v;
    }
    CHECK(last < 1.01);
    CHECK_THROWS_AS(theta(0.0), std::invalid_argument);
    CHECK_THROWS_AS(theta(-1.0), std::invalid_argument);
  }

  TEST_CASE("theta substitution identity") {
    for (double b : {0.25, 1.0, 10.0}) CHECK(theta_identity_residual(b, 1e-6) < 3e-6);
    CHECK(theta_alternate(2.0, 1e-9).value == doctest::Approx(theta(2.0, 1e-9).value).epsilon(1e-8));
  }

  TEST_CASE("singularity exponent on monomial models") {
    const ExponentBracket b = singularity_exponent(model(0.5), sec("1"), origin());
    CHECK(b.lo <= 1.0);
    CHECK(b.hi >= 1.0);
    CHECK(b.hi - b.lo <= 0.02);
    CHECK_FALSE(b.not_member);

    const ExponentBracket b2 = singularity_exponent(model(2.0), sec("z1^3"), origin());
    CHECK(b2.lo <= 1.0);
    CHECK(b2.hi >= 1.0);
    CHECK(b2.hi - b2.lo <= 0.02);

    const ExponentBracket b3 = singularity_exponent(model(1.0), sec("z1"), origin());
    CHECK(b3.lo <= 1.0);
    CHECK(b3.hi >= 1.0);

    const ExponentBracket smooth = singularity_exponent(model(0.0), sec("1 + z1"), origin());
    CHECK(smooth.unbounded);
    CHECK(smooth.hi == doctest::Approx(16.0));

    const ExponentBracket out = singularity_exponent(model(1.5), sec("1"), origin());
    CHECK(out.not_member);
    CHECK(out.lo == 0.0);
    CHECK(out.hi == 0.0);
  }

  TEST_CASE("membership") {
    CHECK(membership(model(0.5), sec("1"), origin(), 0.5).member);
    CHECK_FALSE(membership(model(0.5), sec("1"), origin(), 1.5).member);
    CHECK_FALSE(membership(model(0.5), sec("1"), origin(), 1.0).member);
    CHECK(membership(model(0.5), sec("z1"), origin(), 2.5).member);
    CHECK(membership(model(1.0, 1.0, 2), sec("1", 2), origin(2), 0.5).member);
    CHECK_FALSE(membership(model(1.0, 1.0, 2), sec("1", 2), origin(2), 1.2).member);
  }

  TEST_CASE("capacity on monomial models") {
    const Polydisc disc = Polydisc::unit(1);
    for (double beta : {1.2, 2.0, 3.0}) {
      const IntegralEstimate c = capacity_C(model(0.5), sec("1"), beta, disc, origin());
      CHECK(c.value == doctest::Approx(kPi).epsilon(1e-8));
    }
    CHECK(capacity_C(model(0.5), sec("z1"), 2.0, disc, origin()).value == 0.0);
    CHECK(capacity_C(model(0.5), sec("1"), 0.5, disc, origin()).value == 0.0);

    // Only the part of F outside the module costs anything.
    const Polydisc small = Polydisc::centered(1, 0.7);
    const IntegralEstimate c = capacity_C(model(2.0, 0.7), sec("z1^2 + 3*z1^5"), 1.0, small, origin());
    CHECK(c.value == doctest::Approx(kPi * std::pow(0.7, 6) / 3.0).epsilon(1e-8));

    ProjectionOracleConfig quad;
    quad.method = GramMethod::Quadrature;
    CHECK(capacity_C(model(2.0, 0.7), sec("z1^2 + 3*z1^5"), 1.0, small, origin(), quad).value ==
          doctest::Approx(kPi * std::pow(0.7, 6) / 3.0).epsilon(1e-6));

    // Rank two: h = diag(|z|^{-1}, 1), so h / det h = diag(1, |z|).
    MonomialWeights w;
    w.origin = origin();
    w.coeff = Eigen::Vector2d(1.0, 1.0);
    w.axis = Eigen::MatrixXd::Zero(2, 1);
    w.radial = Eigen::Vector2d(0.5, 0.0);
    const SingularMetric h2 = SingularMetric::monomial(w, disc);
    const Section f2 = Section::parse({"1", "1"}, 1);
    CHECK(capacity_C(h2, f2, 1.5, disc, origin()).value == doctest::Approx(kPi).epsilon(1e-8));
    CHECK(capacity_C(h2, f2, 0.5, disc, origin()).value == 0.0);
    const auto basis = module_basis(h2, 1.5, 1);
    CHECK(basis.size() == 3);

    const SingularMetric generic = SingularMetric::parse(1, {{"abs2(z1)^-0.5"}}, disc, {origin()});
    CHECK_THROWS_AS(capacity_C(generic, sec("1"), 2.0, disc, origin()), std::invalid_argument);
    QuadOptions q;
    q.tol = 1e-8;
    CHECK(capacity_upper_bound(model(0.5), sec("1"), disc, q).value == doctest::Approx(kPi).epsilon(1e-7));
  }

  TEST_CASE("G-curve and its lower bound") {
    std::vector<double> ts{0.0};
    for (int i = 0; i < 49; ++i) ts.push_back(0.05 * std::pow(200.0, i / 48.0));
    const GCurve curve = g_curve(model(0.5), sec("1"), 2.0, origin(), Polydisc::unit(1), ts);
    REQUIRE(curve.samples.size() == ts.size());
    CHECK(curve.samples.front().value == doctest::Approx(capacity_C(model(0.5), sec("1"), 2.0, Polydisc::unit(1), origin()).value));
    for (std::size_t i = 0; i < curve.samples.size(); ++i) {
      const GSample& s = curve.samples[i];
      CHECK(s.value == doctest::Approx(kPi * std::exp(-2.0 * s.t)).epsilon(1e-6));
      if (i > 0) CHECK(s.value <= curve.samples[i - 1].value + 2 * s.abs_error);
    }
    const SlackReport rep = lower_bound_check(curve);
    CHECK(rep.passed);
    CHECK(rep.min_slack_away_from_zero > 0.0);
    for (const SlackRow& r : rep.rows) {
      if (r.t == 0.0) continue;
      const double closed = kPi * (std::exp(-2.0 * r.t) - 1.0 + std::exp(-oracle::g(2.0, r.t)));
      CHECK(r.slack == doctest::Approx(closed).epsilon(1e-5));
    }
    CHECK(rep.rows.front().slack == doctest::Approx(0.0));

    // Halving a: G = pi e^{-4t} once beta puts 1 outside the module.
    const GCurve half = g_curve(model(0.25), sec("1"), 4.0, origin(), Polydisc::unit(1), ts);
    for (const GSample& s : half.samples) CHECK(s.value == doctest::Approx(kPi * std::exp(-4.0 * s.t)).epsilon(1e-6));
    CHECK(lower_bound_check(half).passed);
  }

  TEST_CASE("differential inequality") {
    const GCurve model_curve = closed_curve(2.0, kPi, 200, 10.0);
    const double r200 = differential_inequality_check(model_curve, 2.0 * kPi);
    CHECK(r200 < 1e-3);
    const double r400 = differential_inequality_check(closed_curve(2.0, kPi, 400, 10.0), 2.0 * kPi);
    CHECK(r400 <= r200 + 1e-9);

    GCurve flat;
    for (int i = 0; i < 20; ++i) flat.samples.push_back({0.1 * i, 1.5, 0.0});
    CHECK(differential_inequality_check(flat, 2.0) == 0.0);
    CHECK_THROWS_AS(differential_inequality_check(model_curve, 3.0), std::invalid_argument);
  }

  TEST_CASE("effectiveness on the model") {
    const SingularMetric h = model(0.5);
    const Polydisc disc = Polydisc::unit(1);
    for (double beta : {0.5, 1.0, 2.0, 4.0}) {
      const EffectivenessReport r = effectiveness_verdict(h, sec("1"), origin(), disc, beta);
      CHECK(r.energy == doctest::Approx(2.0 * kPi).epsilon(1e-6));
      CHECK(r.capacity_plus == doctest::Approx(kPi).epsilon(1e-6));
      CHECK(r.ratio == doctest::Approx(2.0).epsilon(1e-6));
      CHECK(r.predicted_member == (r.theta_beta > r.ratio));
      CHECK(r.sound());
      CHECK(r.observed_member == (beta < 1.0));
    }
    CHECK(theta(1.0).value <= 2.0);
    CHECK_THROWS_AS(effectiveness_verdict(model(1.0), sec("1"), origin(), disc, 0.5), std::invalid_argument);
  }

  TEST_CASE("strong openness search") {
    std::vector<double> grid;
    for (int i = 1; i <= 9; ++i) grid.push_back(0.1 * i);
    CHECK(strong_openness_search(model(0.5), sec("1"), origin(), grid) == doctest::Approx(0.1));
    CHECK(strong_openness_search(model(0.5), sec("z1"), origin(), grid) == doctest::Approx(0.1));
    CHECK_THROWS_AS(strong_openness_search(model(1.5), sec("1"), origin(), grid), std::invalid_argument);
  }
}
