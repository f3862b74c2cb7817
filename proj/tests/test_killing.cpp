#include "doctest.h"

#include "test_support.hpp"

#include "twistgeo/killing.hpp"

#include <cmath>

using twistgeo::DimensionError;
using twistgeo::PreconditionError;
using twistgeo::ProductSpec;
using twistgeo::SignatureError;
using twistgeo::VectorFieldSpec;

namespace {

Eigen::MatrixXd family_grid(const twistgeo::KillingFamily& fam, int per_axis = 3) {
  return twistgeo::grid_points(fam.spec.domain_box, per_axis);
}

}  // namespace

TEST_SUITE_BEGIN("killing");

TEST_CASE("constant-scale family is exact and reports zero separation constant") {
  Eigen::VectorXd alpha(2), trans(2);
  alpha << 0.3, -0.2;
  trans << 0.05, -0.15;
  auto fam = twistgeo::const_warp_killing_family(1.3, 0.4, 0.2, alpha, 0.1, trans, 0.7, 0.25);
  CHECK(fam.cf_constant == 0.0);
  CHECK(fam.spec.total_dim() == 4);

  auto r = twistgeo::killing_residual(fam.spec, fam.field, family_grid(fam));
  CHECK(r.max_abs < 1e-9);
  CHECK(r.worst_point.size() == 4);

  // 1-dimensional scaled factor: the rotation argument has no slot to act on.
  Eigen::VectorXd a1(1), t1(1);
  a1 << 0.5;
  t1 << 0.2;
  auto fam1 = twistgeo::const_warp_killing_family(0.8, -0.3, 0.6, a1, -0.4, t1, 0.0);
  auto r1 = twistgeo::killing_residual(fam1.spec, fam1.field, family_grid(fam1));
  CHECK(r1.max_abs < 1e-9);

  Eigen::VectorXd a3(3);
  a3.setZero();
  CHECK_THROWS_AS((void)twistgeo::const_warp_killing_family(1.0, 0, 0, a3, 0, a3, 0),
                  DimensionError);
  CHECK_THROWS_AS((void)twistgeo::const_warp_killing_family(-1.0, 0, 0, a1, 0, t1, 0),
                  PreconditionError);
}

TEST_CASE("linear-scale family: exact field, pinned separation constant, guarded inputs") {
  auto fam = twistgeo::linear_warp_killing_family(0.8, 0.9, {0.3, -0.1}, {0.25, 0.15}, 0.4, -0.2);
  CHECK(fam.cf_constant == doctest::Approx(-0.64).epsilon(1e-14));

  auto r = twistgeo::killing_residual(fam.spec, fam.field, family_grid(fam));
  CHECK(r.max_abs < 1e-9);

  // The s-axis multiplier rides at offset B/A; any other offset leaves a
  // visible (L_K g)_sx component proportional to mu3'.
  VectorFieldSpec wrong = fam.field;
  auto scope = fam.spec.all_coords();
  wrong.components[1] =
      twistgeo::Expr::parse("(0.25+t)*(0.25*exp(0.8*x)+0.15*exp(-0.8*x))+0.4", scope);
  auto rw = twistgeo::killing_residual(fam.spec, wrong, family_grid(fam));
  CHECK(rw.max_abs > 1e-2);

  CHECK_THROWS_AS((void)twistgeo::linear_warp_killing_family(0.0, 1.0, {1, 0}, {0, 0}, 0, 0),
                  PreconditionError);
  CHECK_THROWS_AS((void)twistgeo::linear_warp_killing_family(0.5, -0.1, {1, 0}, {0, 0}, 0, 0),
                  PreconditionError);
  CHECK_THROWS_AS((void)twistgeo::linear_warp_killing_family(-1.2, 1.0, {1, 0}, {0, 0}, 0, 0),
                  PreconditionError);
}

TEST_CASE("sinusoidal-scale family: exact field and phase guard") {
  auto fam = twistgeo::sin_warp_killing_family(0.9, 0.6, {0.2, -0.3});
  CHECK(fam.cf_constant == doctest::Approx(-0.81).epsilon(1e-14));
  auto r = twistgeo::killing_residual(fam.spec, fam.field, family_grid(fam, 5));
  CHECK(r.max_abs < 1e-9);

  CHECK_THROWS_AS((void)twistgeo::sin_warp_killing_family(0.0, 1.0, {1, 0}), PreconditionError);
  // a + p0 = 3.5 exits (0, pi): the scale would cross zero inside the box.
  CHECK_THROWS_AS((void)twistgeo::sin_warp_killing_family(3.0, 0.5, {1, 0}), PreconditionError);
}

TEST_CASE("static non-rotating family: exact, parallel, and guarded") {
  auto fam = twistgeo::static_nonrotating_killing_family(1.2, 0.8, 1.0, -1, {0.15, 0.25});
  CHECK(fam.cf_constant == doctest::Approx(-0.64).epsilon(1e-14));
  auto grid = family_grid(fam, 4);
  auto r = twistgeo::killing_residual(fam.spec, fam.field, grid);
  CHECK(r.max_abs < 1e-9);

  auto curl = twistgeo::curl_and_nonrotating(fam.spec, fam.field, grid);
  CHECK(curl.max_curl < 1e-9);
  CHECK(curl.max_nabla < 1e-8);
  CHECK(curl.is_parallel);

  CHECK_THROWS_AS((void)twistgeo::static_nonrotating_killing_family(0.0, 1, 1, 1, {1, 0}),
                  PreconditionError);
  CHECK_THROWS_AS((void)twistgeo::static_nonrotating_killing_family(1, 1, 1, 2, {1, 0}),
                  PreconditionError);
  // slope -2 drags the scale to -1 at t = 1.
  CHECK_THROWS_AS((void)twistgeo::static_nonrotating_killing_family(2, 1, 1, -1, {1, 0}),
                  PreconditionError);
}

TEST_CASE("fiber rotation is an isometry but not parallel") {
  Eigen::VectorXd z2 = Eigen::VectorXd::Zero(2);
  auto fam = twistgeo::const_warp_killing_family(1.3, 0, 0, z2, 0, z2, 1.0);
  auto grid = family_grid(fam);
  CHECK(twistgeo::killing_residual(fam.spec, fam.field, grid).max_abs < 1e-9);

  auto curl = twistgeo::curl_and_nonrotating(fam.spec, fam.field, grid);
  CHECK_FALSE(curl.is_parallel);
  // dK^flat in an orthonormal frame sees the bare rotation rate twice.
  CHECK(curl.max_curl == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("symmetry-breaker library fails visibly on every family chart") {
  Eigen::VectorXd alpha(2), trans(2);
  alpha << 0.3, -0.2;
  trans << 0.05, -0.15;
  std::vector<twistgeo::KillingFamily> fams;
  fams.push_back(twistgeo::const_warp_killing_family(1.3, 0.4, 0.2, alpha, 0.1, trans, 0.7));
  fams.push_back(
      twistgeo::linear_warp_killing_family(0.8, 0.9, {0.3, -0.1}, {0.25, 0.15}, 0.4, -0.2));
  fams.push_back(twistgeo::sin_warp_killing_family(0.9, 0.6, {0.2, -0.3}));
  for (const auto& fam : fams) {
    auto grid = family_grid(fam);
    auto lib = twistgeo::non_killing_library(fam.spec);
    REQUIRE(lib.size() == 5);
    for (const auto& K : lib) {
      auto r = twistgeo::killing_residual(fam.spec, K, grid);
      INFO(fam.note, " / ", K.name);
      CHECK(r.max_abs > 1e-2);
      CHECK(r.worst_point.size() == fam.spec.total_dim());
    }
  }
}

TEST_CASE("field support and the structured Lie split") {
  ProductSpec s = tgtest::warped_two_fibers();
  Eigen::VectorXd x(4);
  x << 0.2, -0.4, 0.3, 0.6;

  auto U = twistgeo::make_field(s, "swirl", {"0", "0", "z", "y*y"});
  CHECK(twistgeo::field_support(s, U) == std::vector<int>{2});
  auto LU = twistgeo::lie_derivative_metric(s, U, x);
  CHECK(LU.has_structured);
  CHECK(LU.block == 2);
  CHECK(LU.split_gap < 1e-12);

  auto X = twistgeo::make_field(s, "baseflow", {"t", "0", "0", "0"});
  CHECK(twistgeo::field_support(s, X) == std::vector<int>{0});
  auto LX = twistgeo::lie_derivative_metric(s, X, x);
  CHECK(LX.has_structured);
  CHECK(LX.block == 0);
  CHECK(LX.split_gap < 1e-12);

  // Crossing fields or factor fields with foreign coefficients get no split.
  auto M = twistgeo::make_field(s, "mixed", {"1", "x", "0", "0"});
  CHECK(twistgeo::field_support(s, M) == (std::vector<int>{0, 1}));
  CHECK_FALSE(twistgeo::lie_derivative_metric(s, M, x).has_structured);
  auto F = twistgeo::make_field(s, "foreign", {"0", "t*x", "0", "0"});
  CHECK_FALSE(twistgeo::lie_derivative_metric(s, F, x).has_structured);

  CHECK_THROWS_AS((void)twistgeo::make_field(s, "short", {"0", "0", "0"}), DimensionError);
}

TEST_CASE("conformal factor check separates conformal from shape-changing fields") {
  ProductSpec s = tgtest::warped_two_fibers();
  auto grid = twistgeo::grid_points(s.domain_box, 3);

  // x d_x on a flat line: L_U g = 2 g, rate one everywhere.
  auto U = twistgeo::make_field(s, "dilate_x", {"0", "x", "0", "0"});
  auto cc = twistgeo::conformal_factor_check(s, U, 0, grid);
  CHECK(cc.is_conformal);
  CHECK(cc.max_dev < 1e-12);
  for (Eigen::Index p = 0; p < cc.sigma.size(); ++p)
    CHECK(cc.sigma[p] == doctest::Approx(1.0).epsilon(1e-12));

  // y d_y on the curved second factor stretches the z-direction unevenly.
  auto V = twistgeo::make_field(s, "dilate_y", {"0", "0", "y", "0"});
  auto cv = twistgeo::conformal_factor_check(s, V, 1, grid);
  CHECK_FALSE(cv.is_conformal);
  CHECK(cv.max_dev > 1e-2);
  CHECK(cv.worst_point.size() == 4);

  CHECK_THROWS_AS((void)twistgeo::conformal_factor_check(s, U, 1, grid), PreconditionError);
  auto W = twistgeo::make_field(s, "crossbred", {"0", "t*x", "0", "0"});
  CHECK_THROWS_AS((void)twistgeo::conformal_factor_check(s, W, 0, grid), PreconditionError);
}

TEST_CASE("embedding gap vanishes exactly when the combined field is an isometry") {
  ProductSpec s;
  s.base.dim = 1;
  s.base.coords = {"t"};
  s.base.metric = {twistgeo::Expr::parse("-1", {"t"})};
  s.base.signature = {-1};
  twistgeo::FiberSpec F;
  F.name = "F";
  F.dim = 1;
  F.coords = {"x"};
  F.metric = {twistgeo::Expr::parse("1", {"x"})};
  s.fibers.push_back(F);
  s.warps.push_back(twistgeo::WarpFn{twistgeo::Expr::parse("exp(t)", {"t", "x"})});
  s.domain_box = tgtest::box({{-0.5, 0.5}, {-1.0, 1.0}});
  auto grid = twistgeo::grid_points(s.domain_box, 4);

  // d_t alone inflates the scale; -x d_x shrinks the factor at exactly the
  // compensating rate, so the sum is an isometry and the gap closes.
  auto X = twistgeo::make_field(s, "flow", {"1", "0"});
  auto U = twistgeo::make_field(s, "shrink", {"0", "-x"});
  CHECK(twistgeo::conformal_embedding_gap(s, X, U, 0, grid) < 1e-12);
  auto K = twistgeo::make_field(s, "combined", {"1", "-x"});
  CHECK(twistgeo::killing_residual(s, K, grid).max_abs < 1e-12);

  // Halving the compensation leaves rate 1 uncancelled.
  auto Uh = twistgeo::make_field(s, "halfshrink", {"0", "-0.5*x"});
  CHECK(twistgeo::conformal_embedding_gap(s, X, Uh, 0, grid) ==
        doctest::Approx(1.0).epsilon(1e-10));

  CHECK_THROWS_AS((void)twistgeo::conformal_embedding_gap(s, U, U, 0, grid), PreconditionError);
}

TEST_CASE("second-order shape condition on a factor") {
  ProductSpec s = tgtest::warped_two_fibers();
  auto grid = twistgeo::grid_points(s.domain_box, 3);

  auto mu_ok = twistgeo::Expr::parse("cos(x)", {"x"});
  CHECK(twistgeo::hessian_condition_residual(s, 0, mu_ok, 1.0, grid) < 1e-12);

  auto mu_bad = twistgeo::Expr::parse("x*x", {"x"});
  // Hess = 2 while -C mu = -x^2: off by 3 at the box corners.
  CHECK(twistgeo::hessian_condition_residual(s, 0, mu_bad, 1.0, grid) ==
        doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("residuals scale linearly with the field") {
  ProductSpec s = tgtest::warped_two_fibers();
  auto grid = twistgeo::grid_points(s.domain_box, 3);
  auto K = twistgeo::non_killing_library(s)[0];
  auto K2 = twistgeo::scale_field(s, K, 2.5);
  CHECK(K2.name == K.name + "_scaled");
  double r1 = twistgeo::killing_residual(s, K, grid).max_abs;
  double r2 = twistgeo::killing_residual(s, K2, grid).max_abs;
  CHECK(r2 == doctest::Approx(2.5 * r1).epsilon(1e-12));
}

TEST_CASE("separation-constant profile is flat on the closed-form families") {
  auto lin = twistgeo::linear_warp_killing_family(0.8, 0.9, {0.3, -0.1}, {0.25, 0.15}, 0.4, -0.2);
  auto pl = twistgeo::cf_profile(lin.spec);
  CHECK(pl.values.size() == 21);
  CHECK(pl.mean == doctest::Approx(lin.cf_constant).epsilon(1e-12));
  CHECK(pl.max_dev < 1e-10);

  auto sn = twistgeo::sin_warp_killing_family(0.9, 0.6, {0.2, -0.3});
  auto ps = twistgeo::cf_profile(sn.spec, 11);
  CHECK(ps.values.size() == 11);
  // Genuinely nonlinear scale, still a single separation constant.
  CHECK(ps.mean == doctest::Approx(sn.cf_constant).epsilon(1e-10));
  CHECK(ps.variance < 1e-20);

  auto st = twistgeo::static_nonrotating_killing_family(1.2, 0.8, 1.0, -1, {0.15, 0.25});
  auto pt = twistgeo::cf_profile(st.spec);
  CHECK(pt.mean == doctest::Approx(st.cf_constant).epsilon(1e-10));

  CHECK_THROWS_AS((void)twistgeo::cf_profile(lin.spec, 1), PreconditionError);

  ProductSpec bare;
  bare.base.dim = 1;
  bare.base.coords = {"t"};
  bare.base.metric = {twistgeo::Expr::parse("-1", {"t"})};
  bare.base.signature = {-1};
  bare.domain_box = tgtest::box({{0.0, 1.0}});
  CHECK_THROWS_AS((void)twistgeo::cf_profile(bare), PreconditionError);

  ProductSpec wrong = lin.spec;
  wrong.base.metric[0] = twistgeo::Expr::parse("1", wrong.base.coords);
  CHECK_THROWS_AS((void)twistgeo::cf_profile(wrong), SignatureError);
}

TEST_SUITE_END();
