#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "twistgeo/expr.hpp"
#include "twistgeo/poly.hpp"

using twistgeo::BindError;
using twistgeo::DomainError;
using twistgeo::Expr;
using twistgeo::ParseError;
using twistgeo::PolyBasis;
using twistgeo::TruncPoly;

namespace {

Eigen::VectorXd pt(double a, double b) {
  Eigen::VectorXd x(2);
  x << a, b;
  return x;
}

}  // namespace

TEST_SUITE("expr") {

TEST_CASE("eval matches hand-computed arithmetic") {
  Expr e = Expr::parse("2*t+3*sin(s)-s/(1+t*t)", {"t", "s"});
  double t = 0.7, s = -0.3;
  double want = 2 * t + 3 * std::sin(s) - s / (1 + t * t);
  CHECK(e.eval(pt(t, s)) == doctest::Approx(want).epsilon(1e-15));
}

TEST_CASE("power takes a bare numeric exponent") {
  CHECK(Expr::parse("t^2", {"t"}).eval(Eigen::VectorXd::Constant(1, 1.3)) ==
        doctest::Approx(1.69).epsilon(1e-15));
  CHECK(Expr::parse("t^-2", {"t"}).eval(Eigen::VectorXd::Constant(1, 2.0)) ==
        doctest::Approx(0.25).epsilon(1e-15));
  CHECK(Expr::parse("(1+t*t)^0.5", {"t"}).eval(Eigen::VectorXd::Constant(1, 0.6)) ==
        doctest::Approx(std::sqrt(1.36)).epsilon(1e-15));
  CHECK(Expr::parse("t^2.5", {"t"}).eval(Eigen::VectorXd::Constant(1, 1.7)) ==
        doctest::Approx(std::pow(1.7, 2.5)).epsilon(1e-14));
  // a symbolic exponent is a parse error, not a lookup
  CHECK_THROWS_AS((void)Expr::parse("t^s", {"t", "s"}), ParseError);
}

TEST_CASE("unary minus and scientific notation") {
  CHECK(Expr::parse("-(t)+t", {"t"}).eval(Eigen::VectorXd::Constant(1, 5.0)) == 0.0);
  CHECK(Expr::parse("-(t*t)", {"t"}).eval(Eigen::VectorXd::Constant(1, 3.0)) == -9.0);
  CHECK(Expr::parse("1e-2*t", {"t"}).eval(Eigen::VectorXd::Constant(1, 4.0)) ==
        doctest::Approx(0.04).epsilon(1e-15));
  CHECK(Expr::parse("2.5e2", {}).eval(Eigen::VectorXd(0)) == 250.0);
}

TEST_CASE("parse and bind failures carry their own types") {
  CHECK_THROWS_AS((void)Expr::parse("t+", {"t"}), ParseError);
  CHECK_THROWS_AS((void)Expr::parse("(t", {"t"}), ParseError);
  CHECK_THROWS_AS((void)Expr::parse("t 3", {"t"}), ParseError);
  CHECK_THROWS_AS((void)Expr::parse("q+1", {"t"}), BindError);
  CHECK_THROWS_AS((void)Expr::parse("foo(t)", {"t"}), BindError);
}

TEST_CASE("domain guards fire during double evaluation") {
  Expr lg = Expr::parse("log(t)", {"t"});
  CHECK_THROWS_AS((void)lg.eval(Eigen::VectorXd::Constant(1, -1.0)), DomainError);
  Expr sq = Expr::parse("sqrt(t)", {"t"});
  CHECK_THROWS_AS((void)sq.eval(Eigen::VectorXd::Constant(1, -0.5)), DomainError);
}

TEST_CASE("uses_any reports exactly the bound slots") {
  Expr e = Expr::parse("t*y", {"t", "x", "y"});
  CHECK(e.uses(0));
  CHECK_FALSE(e.uses(1));
  CHECK(e.uses(2));
  CHECK(e.uses_any(0, 1));
  CHECK_FALSE(e.uses_any(1, 2));
  CHECK(e.uses_any(1, 3));
}

TEST_CASE("source round-trips through the parser") {
  std::vector<std::string> scope = {"t", "s"};
  Expr e = Expr::parse("exp(0.2*t)+s^2-sin(t*s)", scope);
  Expr e2 = Expr::parse(e.source(), scope);
  for (double t : {-0.7, 0.0, 1.3})
    for (double s : {-1.1, 0.4})
      CHECK(e.eval(pt(t, s)) == doctest::Approx(e2.eval(pt(t, s))).epsilon(1e-15));
}

TEST_CASE("eval_poly produces correct jets") {
  Expr e = Expr::parse("exp(0.2*t)*cos(s)", {"t", "s"});
  auto basis = PolyBasis::get(2, 3);
  double t0 = 0.5, s0 = -0.4;
  std::vector<TruncPoly> seeds = {TruncPoly::variable(basis, 0, t0),
                                  TruncPoly::variable(basis, 1, s0)};
  TruncPoly p = e.eval_poly(seeds);
  double f = std::exp(0.2 * t0) * std::cos(s0);
  CHECK(p.value() == doctest::Approx(f).epsilon(1e-14));
  CHECK(p.d1(0) == doctest::Approx(0.2 * f).epsilon(1e-14));
  CHECK(p.d1(1) == doctest::Approx(-std::exp(0.2 * t0) * std::sin(s0)).epsilon(1e-14));
  CHECK(p.d2(0, 0) == doctest::Approx(0.04 * f).epsilon(1e-14));
  CHECK(p.d2(0, 1) == doctest::Approx(-0.2 * std::exp(0.2 * t0) * std::sin(s0)).epsilon(1e-14));
  CHECK(p.d2(1, 1) == doctest::Approx(-f).epsilon(1e-14));
  CHECK(p.d3(1, 1, 1) == doctest::Approx(std::exp(0.2 * t0) * std::sin(s0)).epsilon(1e-13));
}

TEST_CASE("fractional powers propagate through jets") {
  Expr e = Expr::parse("(1+t*t)^0.25", {"t"});
  auto basis = PolyBasis::get(1, 2);
  double t0 = 0.8;
  TruncPoly p = e.eval_poly({TruncPoly::variable(basis, 0, t0)});
  double u = 1 + t0 * t0;
  CHECK(p.value() == doctest::Approx(std::pow(u, 0.25)).epsilon(1e-14));
  CHECK(p.d1(0) == doctest::Approx(0.25 * std::pow(u, -0.75) * 2 * t0).epsilon(1e-13));
}

}  // TEST_SUITE
