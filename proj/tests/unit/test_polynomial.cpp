#include <doctest.h>

#include "mslab/polynomial.hpp"

using namespace mslab;

TEST_SUITE("polynomial") {
  TEST_CASE("expansion") {
    const Polynomial p = Polynomial::parse("(z1 + z2)^2 - 2*z1*z2", 2);
    CHECK(p.terms().size() == 2);
    CHECK(p.coefficient({2, 0}) == Complex(1.0));
    CHECK(p.coefficient({0, 2}) == Complex(1.0));
    CHECK(p.degree() == 2);
    CHECK(p.order() == 2);
  }

  TEST_CASE("non-polynomial input is rejected") {
    CHECK_THROWS_AS(Polynomial::parse("conj(z1)", 1), std::invalid_argument);
    CHECK_THROWS_AS(Polynomial::parse("z1^0.5", 1), std::invalid_argument);
    CHECK_THROWS_AS(Polynomial::parse("log(z1)", 1), std::invalid_argument);
  }

  TEST_CASE("shift") {
    Point o(1);
    o[0] = Complex(0.5, -0.25);
    const Polynomial p = Polynomial::parse("z1^2 + 3", 1);
    const Polynomial q = p.shifted(o);
    Point w(1);
    w[0] = Complex(0.1, 0.2);
    CHECK(std::abs(q.eval(w) - p.eval(w + o)) < 1e-14);
    CHECK(std::abs(p.eval(w + o, o) - p.eval(w)) < 1e-14);
  }

  TEST_CASE("sections") {
    const Section f = Section::parse({"1", "z1"}, 1);
    const Section g = Section::parse({"z1", "0"}, 1);
    const Section h = axpy(f, 0.5, g);
    CHECK(h.rank() == 2);
    CHECK(h.components[0] == Polynomial::parse("1 + 0.5*z1", 1));
    CHECK(Section::parse({"0", "0"}, 1).is_zero());
    CHECK(Section::parse(f.to_strings(), 1) == f);
  }
}
