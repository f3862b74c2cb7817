#include <cmath>
#include <vector>

#include "doctest.h"
#include "twistgeo/poly.hpp"

using twistgeo::DomainError;
using twistgeo::PolyBasis;
using twistgeo::TruncPoly;

namespace {

// Compare every stored coefficient of two jets.
void check_jets_equal(const TruncPoly& a, const TruncPoly& b, double tol) {
  REQUIRE(a.basis() == b.basis());
  CHECK((a.coeffs() - b.coeffs()).cwiseAbs().maxCoeff() < tol);
}

}  // namespace

TEST_SUITE("poly") {

TEST_CASE("variable seeds carry exact derivatives") {
  auto basis = PolyBasis::get(2, 3);
  TruncPoly u = TruncPoly::variable(basis, 0, 1.5);
  TruncPoly v = TruncPoly::variable(basis, 1, -0.5);
  TruncPoly p = u * u * v;

  CHECK(p.value() == doctest::Approx(1.5 * 1.5 * -0.5).epsilon(1e-15));
  CHECK(p.d1(0) == doctest::Approx(2 * 1.5 * -0.5).epsilon(1e-15));
  CHECK(p.d1(1) == doctest::Approx(1.5 * 1.5).epsilon(1e-15));
  CHECK(p.d2(0, 0) == doctest::Approx(2 * -0.5).epsilon(1e-15));
  CHECK(p.d2(0, 1) == doctest::Approx(2 * 1.5).epsilon(1e-15));
  CHECK(p.d2(1, 1) == 0.0);
  CHECK(p.d3(0, 0, 1) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(p.d3(0, 1, 0) == doctest::Approx(2.0).epsilon(1e-15));  // symmetric
  CHECK(p.d3(0, 0, 0) == 0.0);
}

TEST_CASE("derivative() drops one order but matches d1") {
  auto basis = PolyBasis::get(1, 3);
  TruncPoly u = TruncPoly::variable(basis, 0, 0.7);
  TruncPoly p = twistgeo::exp(u);
  TruncPoly dp = p.derivative(0);
  CHECK(dp.value() == doctest::Approx(p.d1(0)).epsilon(1e-15));
  CHECK(dp.d1(0) == doctest::Approx(p.d2(0, 0)).epsilon(1e-15));
  CHECK(dp.d2(0, 0) == doctest::Approx(p.d3(0, 0, 0)).epsilon(1e-15));
}

TEST_CASE("transcendental identities hold to jet order") {
  auto basis = PolyBasis::get(2, 3);
  TruncPoly u = TruncPoly::variable(basis, 0, 0.8);
  TruncPoly v = TruncPoly::variable(basis, 1, -0.3);
  TruncPoly w = u + 0.5 * v;  // generic argument mixing both variables

  TruncPoly one = twistgeo::sin(w) * twistgeo::sin(w) + twistgeo::cos(w) * twistgeo::cos(w);
  check_jets_equal(one, TruncPoly::constant(basis, 1.0), 1e-14);

  check_jets_equal(twistgeo::exp(w) * twistgeo::exp(-w), TruncPoly::constant(basis, 1.0), 1e-14);
  check_jets_equal(twistgeo::log(twistgeo::exp(w)), w, 1e-14);

  TruncPoly pos = 2.0 + u;  // value 2.8 > 0
  check_jets_equal(twistgeo::sqrt(pos) * twistgeo::sqrt(pos), pos, 1e-14);
  check_jets_equal(pos * twistgeo::recip(pos), TruncPoly::constant(basis, 1.0), 1e-14);
  check_jets_equal(twistgeo::pow(pos, 1.5), twistgeo::exp(1.5 * twistgeo::log(pos)), 1e-13);
}

TEST_CASE("division is multiplication by the reciprocal") {
  auto basis = PolyBasis::get(2, 3);
  TruncPoly u = TruncPoly::variable(basis, 0, 1.2);
  TruncPoly v = 1.0 + TruncPoly::variable(basis, 1, 0.4);
  check_jets_equal((u * v) / v, u, 1e-13);
}

TEST_CASE("domain guards throw") {
  auto basis = PolyBasis::get(1, 2);
  TruncPoly neg = TruncPoly::variable(basis, 0, -2.0);
  TruncPoly zero = TruncPoly::variable(basis, 0, 0.0);
  CHECK_THROWS_AS((void)twistgeo::log(neg), DomainError);
  CHECK_THROWS_AS((void)twistgeo::sqrt(neg), DomainError);
  CHECK_THROWS_AS((void)twistgeo::recip(zero), DomainError);
  CHECK_THROWS_AS((void)(TruncPoly::constant(basis, 1.0) / zero), DomainError);
}

TEST_CASE("poly_matrix_inverse reproduces the identity in jets") {
  auto basis = PolyBasis::get(2, 2);
  TruncPoly u = TruncPoly::variable(basis, 0, 0.3);
  TruncPoly v = TruncPoly::variable(basis, 1, -0.2);
  std::vector<TruncPoly> m = {2.0 + u, v, v, 3.0 + u};
  std::vector<TruncPoly> inv = twistgeo::poly_matrix_inverse(m, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      TruncPoly e(basis);
      for (int k = 0; k < 2; ++k)
        e += m[static_cast<size_t>(i * 2 + k)] * inv[static_cast<size_t>(k * 2 + j)];
      check_jets_equal(e, TruncPoly::constant(basis, i == j ? 1.0 : 0.0), 1e-13);
    }
}

TEST_CASE("per-variable caps truncate high powers silently") {
  auto full = PolyBasis::get(2, 3);
  auto capped = PolyBasis::get(2, 3, {3, 1});
  CHECK(capped->size() < full->size());

  TruncPoly u = TruncPoly::variable(capped, 0, 0.5);
  TruncPoly v = TruncPoly::variable(capped, 1, 0.25);
  TruncPoly q = v * v;  // the v^2 monomial is outside the capped basis
  CHECK(q.value() == doctest::Approx(0.0625).epsilon(1e-15));
  CHECK(q.d1(1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(q.d2(1, 1) == 0.0);  // truncated, not 2

  TruncPoly m = u * u * v;  // fits: u capped at 3, v at 1
  CHECK(m.d3(0, 0, 1) == doctest::Approx(2.0).epsilon(1e-15));

  // seeding a variable whose cap is zero is a hard error
  auto cap0 = PolyBasis::get(2, 3, {3, 0});
  CHECK_THROWS_AS((void)TruncPoly::variable(cap0, 1, 1.0), std::invalid_argument);
}

TEST_CASE("deriv returns zero beyond the stored order") {
  auto basis = PolyBasis::get(1, 2);
  TruncPoly u = TruncPoly::variable(basis, 0, 0.4);
  TruncPoly p = twistgeo::exp(u);
  CHECK(p.d3(0, 0, 0) == 0.0);  // order-2 basis holds no third derivative
}

}  // TEST_SUITE
