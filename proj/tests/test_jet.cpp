#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "twistgeo/jet.hpp"

using twistgeo::Expr;
using twistgeo::Jet3;

TEST_SUITE("jet") {

TEST_CASE("jet3 matches analytic derivatives of a mixed expression") {
  Expr e = Expr::parse("exp(0.3*t)*sin(x)+y^3", {"t", "x", "y"});
  Eigen::VectorXd v(3);
  v << 0.4, 1.1, -0.7;
  Jet3 j = twistgeo::jet3(e, v);

  double E = std::exp(0.3 * v[0]), S = std::sin(v[1]), C = std::cos(v[1]);
  CHECK(j.k == 3);
  CHECK(j.value == doctest::Approx(E * S + std::pow(v[2], 3)).epsilon(1e-14));
  CHECK(j.grad[0] == doctest::Approx(0.3 * E * S).epsilon(1e-14));
  CHECK(j.grad[1] == doctest::Approx(E * C).epsilon(1e-14));
  CHECK(j.grad[2] == doctest::Approx(3 * v[2] * v[2]).epsilon(1e-14));
  CHECK(j.hess(0, 0) == doctest::Approx(0.09 * E * S).epsilon(1e-14));
  CHECK(j.hess(0, 1) == doctest::Approx(0.3 * E * C).epsilon(1e-14));
  CHECK(j.hess(1, 1) == doctest::Approx(-E * S).epsilon(1e-14));
  CHECK(j.hess(2, 2) == doctest::Approx(6 * v[2]).epsilon(1e-14));
  CHECK(j.hess(1, 2) == 0.0);
  CHECK(j.d3(2, 2, 2) == doctest::Approx(6.0).epsilon(1e-13));
  CHECK(j.d3(0, 0, 1) == doctest::Approx(0.09 * E * C).epsilon(1e-13));
}

TEST_CASE("third derivatives are index-symmetric") {
  Expr e = Expr::parse("exp(t*x)", {"t", "x"});
  Eigen::VectorXd v(2);
  v << 0.6, -0.2;
  Jet3 j = twistgeo::jet3(e, v);
  int perms[6][3] = {{0, 0, 1}, {0, 1, 0}, {1, 0, 0}, {1, 1, 0}, {1, 0, 1}, {0, 1, 1}};
  CHECK(j.d3(perms[0][0], perms[0][1], perms[0][2]) ==
        doctest::Approx(j.d3(perms[1][0], perms[1][1], perms[1][2])).epsilon(1e-14));
  CHECK(j.d3(perms[1][0], perms[1][1], perms[1][2]) ==
        doctest::Approx(j.d3(perms[2][0], perms[2][1], perms[2][2])).epsilon(1e-14));
  CHECK(j.d3(perms[3][0], perms[3][1], perms[3][2]) ==
        doctest::Approx(j.d3(perms[4][0], perms[4][1], perms[4][2])).epsilon(1e-14));
  CHECK(j.d3(perms[4][0], perms[4][1], perms[4][2]) ==
        doctest::Approx(j.d3(perms[5][0], perms[5][1], perms[5][2])).epsilon(1e-14));
}

TEST_CASE("jet3 agrees with central finite differences") {
  Expr e = Expr::parse("log(2+t)*cos(x)+t*x*x", {"t", "x"});
  Eigen::VectorXd v(2);
  v << 0.9, 0.35;
  Jet3 j = twistgeo::jet3(e, v);
  for (int a = 0; a < 2; ++a) {
    CHECK(j.grad[a] == doctest::Approx(twistgeo::fd_partial(e, v, a)).epsilon(1e-8));
    for (int b = a; b < 2; ++b)
      CHECK(j.hess(a, b) == doctest::Approx(twistgeo::fd_partial2(e, v, a, b)).epsilon(1e-5));
  }
}

TEST_CASE("restricting wrt freezes the other slots") {
  Expr e = Expr::parse("t*t*x+x*x*y", {"t", "x", "y"});
  Eigen::VectorXd v(3);
  v << 1.2, 0.5, -0.8;
  Jet3 j = twistgeo::jet3(e, v, {1});  // only x varies
  CHECK(j.k == 1);
  CHECK(j.value == doctest::Approx(e.eval(v)).epsilon(1e-14));
  // df/dx = t^2 + 2xy
  CHECK(j.grad[0] == doctest::Approx(1.44 + 2 * 0.5 * -0.8).epsilon(1e-14));
  // d2f/dx2 = 2y
  CHECK(j.hess(0, 0) == doctest::Approx(-1.6).epsilon(1e-14));
  CHECK(j.d3(0, 0, 0) == 0.0);
}

TEST_CASE("wrt order controls gradient slot order") {
  Expr e = Expr::parse("t+2*x", {"t", "x"});
  Eigen::VectorXd v(2);
  v << 0.0, 0.0;
  Jet3 j = twistgeo::jet3(e, v, {1, 0});
  CHECK(j.grad[0] == doctest::Approx(2.0).epsilon(1e-15));  // slot follows wrt, not the scope
  CHECK(j.grad[1] == doctest::Approx(1.0).epsilon(1e-15));
}

}  // TEST_SUITE
