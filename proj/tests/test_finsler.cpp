#include "doctest.h"

#include "twistgeo/finsler.hpp"
#include "twistgeo/sweep.hpp"

#include <cmath>
#include <random>

using twistgeo::DegenerateFundamentalTensor;
using twistgeo::DimensionError;
using twistgeo::Expr;
using twistgeo::FinslerFactor;
using twistgeo::PositivityLoss;
using twistgeo::PreconditionError;
using twistgeo::ProductFinslerSpec;

namespace {

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

Eigen::VectorXd vec4(double a, double b, double c, double d) {
  Eigen::VectorXd v(4);
  v << a, b, c, d;
  return v;
}

ProductFinslerSpec quartic_fiber_product(const std::string& twist) {
  return twistgeo::finsler_product("qp", twistgeo::euclidean_factor("b", 2),
                                   {twistgeo::quartic_factor("f", 2)}, {twist});
}

}  // namespace

TEST_SUITE_BEGIN("finsler");

TEST_CASE("flat factor: identity tensor, zero spray, zero third jets") {
  auto e = twistgeo::euclidean_factor("e", 2);
  auto x = vec2(0.3, -0.4), y = vec2(1.1, 0.7);

  auto ft = twistgeo::fundamental_tensor(e, x, y);
  CHECK((ft.g - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(twistgeo::spray_generic(e, x, y).cwiseAbs().maxCoeff() < 1e-12);
  auto bd = twistgeo::berwald_tensors(e, x, y);
  CHECK(max_abs(bd.B) < 1e-12);
  CHECK(bd.E.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(twistgeo::cartan_generic(e, x, y).max_abs() < 1e-12);

  auto nc = twistgeo::validate_norm(e, 50, 11);
  CHECK(nc.samples == 50);
  CHECK(nc.pass());
}

TEST_CASE("quartic-mean factor: homogeneous, direction-curved, still unbiased in y") {
  auto q = twistgeo::quartic_factor("q", 2);
  auto x = vec2(0.2, 0.1), y = vec2(1.1, 0.7);

  CHECK(twistgeo::validate_norm(q, 50, 5).pass());
  CHECK(twistgeo::homogeneity_check(q, x, y, 1.7).max_dev() < 1e-8);

  auto c = twistgeo::cartan_generic(q, x, y);
  CHECK(c.max_abs() > 0.1);                        // genuinely non-Riemannian
  CHECK(twistgeo::cartan_y_residual(c, y) < 1e-8); // but transverse to y

  // norm value matches the closed form
  CHECK(twistgeo::norm_value(q, x, y) ==
        doctest::Approx(std::pow(std::pow(1.1, 4) + std::pow(0.7, 4), 0.25)).epsilon(1e-14));
}

TEST_CASE("drift factor: valid norm, nonzero Cartan tensor, guarded construction") {
  auto r = twistgeo::randers_factor("r", 2, vec2(0.3, -0.2));
  auto x = vec2(0.0, 0.5), y = vec2(0.9, -1.0);
  CHECK(twistgeo::validate_norm(r, 50, 17).pass());
  CHECK(twistgeo::cartan_generic(r, x, y).max_abs() > 1e-3);

  CHECK_THROWS_AS((void)twistgeo::randers_factor("r", 2, Eigen::VectorXd::Ones(3)),
                  DimensionError);
  CHECK_THROWS_AS((void)twistgeo::randers_factor("r", 2, vec2(0.8, 0.7)), PreconditionError);
}

TEST_CASE("position-dependent quadratic factor reproduces its geodesic coefficients") {
  Eigen::MatrixX2d box(2, 2);
  box << 0.8, 1.2, -1.0, 1.0;
  auto f = twistgeo::riemannian_factor("r", 2, {"1", "0", "0", "rx1^2"}, box);
  auto x = vec2(1.05, 0.3), y = vec2(0.9, -0.6);

  // quadratic connection coefficients contracted twice with the direction
  std::vector<Expr> entries = {
      Expr::parse("1", {"rx1", "rx2"}), Expr::parse("0", {"rx1", "rx2"}),
      Expr::parse("0", {"rx1", "rx2"}), Expr::parse("rx1^2", {"rx1", "rx2"})};
  auto od = twistgeo::oracle_from_metric_poly(twistgeo::factor_metric_poly(entries, 2, x, 3), 2);
  Eigen::VectorXd pred = Eigen::VectorXd::Zero(2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        pred[i] += 0.5 * od.gamma[twistgeo::idx3(2, i, j, k)].value() * y[j] * y[k];
  CHECK((twistgeo::spray_generic(f, x, y) - pred).cwiseAbs().maxCoeff() < 1e-10);

  // quadratic norms have spray jets that stop at second order
  CHECK(max_abs(twistgeo::berwald_tensors(f, x, y).B) < 1e-10);

  CHECK_THROWS_AS((void)twistgeo::riemannian_factor("r", 2, {"1", "0", "0"}, box),
                  DimensionError);
}

TEST_CASE("product assembly: scoped twists, value, and guards") {
  auto ps = quartic_fiber_product("exp(0.2*bx1)");
  CHECK(ps.dim() == 4);
  CHECK(ps.factors() == 2);
  CHECK(ps.offset(1) == 2);

  auto x = vec4(0.3, -0.2, 0.1, 0.4);
  auto y = vec4(1.0, 0.5, 0.8, -1.1);
  double F0 = twistgeo::norm_value(ps.base, x.segment(0, 2), y.segment(0, 2));
  double F1 = twistgeo::norm_value(ps.fibers[0], x.segment(2, 2), y.segment(2, 2));
  double w = std::exp(0.2 * 0.3);
  CHECK(twistgeo::twist_value(ps, 0, x) == doctest::Approx(w).epsilon(1e-14));
  CHECK(twistgeo::norm_value(ps, x, y) ==
        doctest::Approx(std::sqrt(F0 * F0 + w * w * F1 * F1)).epsilon(1e-14));
  CHECK(twistgeo::validate_norm(ps, 30, 23).pass());
  CHECK(twistgeo::homogeneity_check(ps, x, y, 0.6).max_dev() < 1e-8);

  // coordinate collision and twist-count mismatches are construction errors
  CHECK_THROWS_AS((void)twistgeo::finsler_product("bad", twistgeo::euclidean_factor("b", 2),
                                                  {twistgeo::quartic_factor("b", 2)}, {"1"}),
                  PreconditionError);
  CHECK_THROWS_AS((void)twistgeo::finsler_product("bad", twistgeo::euclidean_factor("b", 2),
                                                  {twistgeo::quartic_factor("f", 2)}, {}),
                  DimensionError);
  CHECK_THROWS_AS((void)twistgeo::finsler_factor("bad", {"x1"}, {"y1", "y2"}, "y1", // mismatch
                                                 twistgeo::detail::unit_box(1)),
                  DimensionError);

  // a twist that crosses zero inside the box is caught at evaluation
  auto neg = twistgeo::finsler_product("neg", twistgeo::euclidean_factor("b", 2),
                                       {twistgeo::euclidean_factor("f", 2)}, {"bx1"});
  CHECK_THROWS_AS((void)twistgeo::norm_value(neg, vec4(-0.5, 0, 0, 0), y), PositivityLoss);
}

TEST_CASE("structured spray equals the generic spray on twisted products") {
  auto ps = quartic_fiber_product("exp(0.2*bx1)+0.1*fx1^2");
  std::mt19937_64 rng(91);
  for (int k = 0; k < 6; ++k) {
    auto [x, y] = twistgeo::sample_xy(ps, rng);
    Eigen::VectorXd a = twistgeo::spray_generic(ps, x, y);
    Eigen::VectorXd b = twistgeo::spray_structured(ps, x, y);
    double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    CHECK((a - b).cwiseAbs().maxCoeff() / scale < 1e-9);
  }
}

TEST_CASE("third direction jets distinguish the twist placements") {
  auto x = vec4(0.3, -0.2, 0.1, 0.4);
  auto y = vec4(1.0, 0.5, 0.8, -1.1);

  // base-position twist on a direction-curved fiber: mean jet balanced,
  // full jet visibly nonzero
  auto baseTw = quartic_fiber_product("exp(0.2*bx1)");
  auto bd = twistgeo::berwald_tensors(baseTw, x, y);
  CHECK(max_abs(bd.B) > 0.1);
  CHECK(bd.E.cwiseAbs().maxCoeff() < 1e-8);

  // fiber-position twist: the scaled fiber stays quadratic in its own jets
  auto fiberTw = quartic_fiber_product("1+0.2*fx1^2");
  auto fd = twistgeo::berwald_tensors(fiberTw, x, y);
  CHECK(max_abs(fd.B) < 1e-8);

  // everything quadratic: third jets vanish identically
  auto flat = twistgeo::finsler_product("flat", twistgeo::euclidean_factor("b", 2),
                                        {twistgeo::euclidean_factor("f", 2)},
                                        {"exp(0.2*bx1)"});
  auto ed = twistgeo::berwald_tensors(flat, x, y);
  CHECK(max_abs(ed.B) < 1e-10);
}

TEST_CASE("direction-curvature blocks: factor blocks scale, cross terms vanish") {
  auto ps = quartic_fiber_product("exp(0.2*bx1)");
  auto x = vec4(0.3, -0.2, 0.1, 0.4);
  auto y = vec4(1.0, 0.5, 0.8, -1.1);

  auto split = twistgeo::cartan_tensor(ps, x, y);
  CHECK(split.max_block_gap < 1e-10);
  CHECK(split.max_mixed < 1e-10);
  CHECK(split.generic.max_abs() > 0.1);
  CHECK(twistgeo::cartan_y_residual(split.generic, y) < 1e-8);

  auto flat = twistgeo::finsler_product("flat", twistgeo::euclidean_factor("b", 2),
                                        {twistgeo::euclidean_factor("f", 2)},
                                        {"exp(0.2*bx1)"});
  CHECK(twistgeo::cartan_generic(flat, x, y).max_abs() < 1e-12);
}

TEST_CASE("sampled structure predicates land where the construction says") {
  auto ps = quartic_fiber_product("exp(0.2*bx1)");
  auto rep = twistgeo::structure_predicates(ps, 6, 41);
  CHECK(rep.samples == 6);

  auto holds = [&](const char* name) {
    auto* r = rep.find(name);
    REQUIRE_MESSAGE(r != nullptr, name);
    INFO(name, " residual ", r->max_residual);
    return r->holds;
  };
  CHECK(holds("riemannian.b"));
  CHECK_FALSE(holds("riemannian.f"));
  CHECK(holds("minkowski.x_independent.b"));
  CHECK(holds("minkowski.x_independent.f"));
  CHECK(holds("berwald.base"));
  CHECK(holds("berwald.base_coupling.f"));   // flat base: no direction-varying inverse
  CHECK(holds("weak_berwald.base_trace.f"));
  CHECK(holds("weak_berwald.balance.f"));    // twist has no fiber-position dependence
  CHECK(holds("dually_flat.base"));
  CHECK_FALSE(holds("twist.base_independent.f"));
  CHECK(rep.find("no.such.predicate") == nullptr);

  // a witness accompanies every violated predicate
  auto* tw = rep.find("twist.base_independent.f");
  CHECK(tw->max_residual > 1e-3);
  CHECK(tw->witness_x.size() == 4);
  CHECK(tw->witness_y.size() == 4);

  // constant twist on flat factors: the fully structureless product
  auto flat = twistgeo::finsler_product("flat", twistgeo::euclidean_factor("b", 2),
                                        {twistgeo::euclidean_factor("f", 2)}, {"1.3"});
  auto fr = twistgeo::structure_predicates(flat, 5, 43);
  for (const auto& r : fr.results) {
    INFO(r.name);
    CHECK(r.holds);
  }
}

TEST_CASE("degenerate direction metrics are reported, not inverted") {
  auto bad = twistgeo::finsler_factor("a", {"ax1", "ax2"}, {"ay1", "ay2"}, "sqrt(ay1^2)",
                                      twistgeo::detail::unit_box(2));
  auto x = vec2(0.1, 0.2), y = vec2(1.2, 0.6);
  CHECK_THROWS_AS((void)twistgeo::fundamental_tensor(bad, x, y), DegenerateFundamentalTensor);
  CHECK_THROWS_AS((void)twistgeo::spray_generic(bad, x, y), DegenerateFundamentalTensor);
}

TEST_CASE("sampling respects the direction band and the position box") {
  auto q = twistgeo::quartic_factor("q", 3);
  std::mt19937_64 rng(7);
  for (int s = 0; s < 100; ++s) {
    auto [x, y] = twistgeo::sample_xy(q, rng);
    CHECK(x.cwiseAbs().maxCoeff() <= 1.0);
    double r = y.norm();
    CHECK(r >= 0.5);
    CHECK(r <= 2.0);
  }
  CHECK_THROWS_AS((void)twistgeo::sample_punctured(2, 3.0, 2.0, rng), PreconditionError);
}

TEST_CASE("randomized product specs are valid norms with agreeing sprays") {
  std::mt19937_64 rng(123);
  auto ps = twistgeo::random_finsler_spec(rng, 0);
  CHECK(twistgeo::validate_norm(ps, 20, 7).pass());
  std::mt19937_64 prng(55);
  for (int k = 0; k < 4; ++k) {
    auto [x, y] = twistgeo::sample_xy(ps, prng);
    Eigen::VectorXd a = twistgeo::spray_generic(ps, x, y);
    Eigen::VectorXd b = twistgeo::spray_structured(ps, x, y);
    CHECK((a - b).cwiseAbs().maxCoeff() / std::max(1.0, a.cwiseAbs().maxCoeff()) < 1e-8);
  }
}

TEST_SUITE_END();
