#include "doctest.h"

#include "test_support.hpp"

#include "twistgeo/einstein.hpp"

#include <cmath>

using twistgeo::DimensionError;
using twistgeo::Expr;
using twistgeo::PositivityLoss;
using twistgeo::PreconditionError;
using twistgeo::ProductSpec;
using twistgeo::TorsionLoc;
using twistgeo::WrongConnectionError;

namespace {

// worst |Ric - lambda g| of an unscaled factor chart over a small grid
double proportion_residual(const twistgeo::FiberSpec& f, double lambda) {
  Eigen::MatrixX2d box(f.dim, 2);
  for (int i = 0; i < f.dim; ++i) {
    box(i, 0) = 0.8;
    box(i, 1) = 1.2;
  }
  Eigen::MatrixXd pts = twistgeo::grid_points(box, 3);
  double worst = 0;
  for (Eigen::Index r = 0; r < pts.rows(); ++r) {
    Eigen::VectorXd x = pts.row(r);
    auto od = twistgeo::oracle_from_metric_poly(
        twistgeo::factor_metric_poly(f.metric, f.dim, x, 3), f.dim);
    worst = std::max(worst, (od.ricci - lambda * od.g).cwiseAbs().maxCoeff());
  }
  return worst;
}

ProductSpec carrier_example(const std::string& second_warp) {
  auto F1 = twistgeo::make_einstein_fiber(1, 0.0, "F1", {"x"});
  auto F2 = twistgeo::make_einstein_fiber(1, 0.0, "F2", {"y"});
  ProductSpec s = twistgeo::line_base_spec({F1, F2}, {"exp(0.7*t)", second_warp}, 0.0, 1.0);
  s.torsion.loc = TorsionLoc::Fiber;
  s.torsion.fiber = 1;
  s.torsion.components = {Expr::parse("1", s.fibers[1].coords)};
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("einstein");

TEST_CASE("model factors carry the requested Ricci proportion") {
  auto pos2 = twistgeo::make_einstein_fiber(2, 1.5);
  CHECK(proportion_residual(pos2, 1.5) < 1e-8);
  auto neg2 = twistgeo::make_einstein_fiber(2, -2.0);
  CHECK(proportion_residual(neg2, -2.0) < 1e-8);
  auto neg3 = twistgeo::make_einstein_fiber(3, -1.0, "G", {"a1", "a2", "a3"});
  CHECK(neg3.coords == (std::vector<std::string>{"a1", "a2", "a3"}));
  CHECK(proportion_residual(neg3, -1.0) < 1e-8);

  auto flat = twistgeo::make_einstein_fiber(1, 0.0);
  CHECK(flat.dim == 1);
  CHECK(proportion_residual(flat, 0.0) == 0.0);

  CHECK_THROWS_AS((void)twistgeo::make_einstein_fiber(1, 0.5), PreconditionError);
  CHECK_THROWS_AS((void)twistgeo::make_einstein_fiber(2, 1.0, "F", {"x"}), DimensionError);
}

TEST_CASE("line-base assembly: Lorentzian axis, scoped scales, base-carried field") {
  auto fib = twistgeo::make_einstein_fiber(2, 0.0);
  ProductSpec s = twistgeo::line_base_spec({fib}, {"exp(0.3*t)"}, -0.5, 1.5);
  CHECK(s.total_dim() == 3);
  CHECK(s.base.coords == std::vector<std::string>{"t"});
  CHECK(s.base.signature == std::vector<int>{-1});
  CHECK(s.torsion.loc == TorsionLoc::Base);
  CHECK(s.domain_box(0, 0) == -0.5);
  CHECK(s.domain_box(0, 1) == 1.5);
  CHECK(s.domain_box(1, 0) == 0.8);
  CHECK(s.domain_box(2, 1) == 1.2);
  auto rep = twistgeo::validate_spec(s);
  CHECK(rep.ok);
}

TEST_CASE("scale branches solve the second-order balance and make the chart Einstein") {
  for (double lambda : {0.1, 0.25, 0.6}) {
    Expr f = twistgeo::grw_einstein_solution(lambda, 1.0, 0.4);
    CHECK(twistgeo::linear2_residual(f, -1.0, lambda, 0.0) < 1e-12);
    auto fib = twistgeo::make_einstein_fiber(1, 0.0);
    ProductSpec s = twistgeo::line_base_spec({fib}, {f.source()}, 0.0, 1.0);
    auto er = twistgeo::einstein_residual(twistgeo::make_semisym_context(s), lambda, 5);
    INFO("lambda = ", lambda);
    CHECK(er.max_abs < 1e-9);
  }
  // the discriminant changes shape at 0.25: distinct roots, then a double root,
  // then a rotation factor
  Expr two = twistgeo::grw_einstein_solution(0.1, 1.0, 0.0);
  CHECK(two.source().find("cos") == std::string::npos);
  Expr osc = twistgeo::grw_einstein_solution(0.6, 1.0, 0.4);
  CHECK(osc.source().find("cos") != std::string::npos);

  // drifting the proportion away from the solved value must register
  Expr f = twistgeo::grw_einstein_solution(0.1, 1.0, 0.4);
  auto fib = twistgeo::make_einstein_fiber(1, 0.0);
  ProductSpec s = twistgeo::line_base_spec({fib}, {f.source()}, 0.0, 1.0);
  CHECK(twistgeo::einstein_residual(twistgeo::make_semisym_context(s), 0.15, 5).max_abs > 1e-3);
}

TEST_CASE("higher-dimensional factor pins the proportion to zero") {
  auto fam = twistgeo::grw_einstein_highdim(3, 0.8, 0.5);
  CHECK(fam.params.lambda == 0.0);
  CHECK(fam.params.lambda_F == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(fam.spec.fibers[0].dim == 3);
  CHECK(fam.verified);
  CHECK(fam.max_residual < 1e-9);

  auto flatfam = twistgeo::grw_einstein_highdim(2, 1.0, 0.0);
  CHECK(flatfam.params.lambda_F == 0.0);
  CHECK(flatfam.verified);

  CHECK_THROWS_AS((void)twistgeo::grw_einstein_highdim(1, 1.0, 0.5), PreconditionError);
}

TEST_CASE("constant-scalar scales, three-dimensional factor: all four branches") {
  struct Row {
    double Sbar, SF, c1, c2;
    const char* branch;
  };
  const Row rows[] = {
      {-6.0, 1.5, 1.0, 0.2, "pinned-linear"},
      {-3.0, 0.0, 0.6, 0.4, "two-exponential"},
      {0.75, 0.0, 1.0, 0.3, "double-root"},
      {3.0, 0.0, 1.0, 0.2, "oscillatory"},
  };
  for (const Row& r : rows) {
    auto fam = twistgeo::grw_scalar_solution(3, r.Sbar, r.SF, r.c1, r.c2);
    INFO("Sbar = ", r.Sbar);
    CHECK(fam.branch == r.branch);
    CHECK(fam.closed_form);
    CHECK(fam.verified);
    CHECK(fam.stddev < 1e-5);
    CHECK(fam.max_residual < 1e-4);
    // f is the square root of the solved profile
    Eigen::VectorXd t(1);
    t[0] = 0.37;
    CHECK(fam.f.eval(t) == doctest::Approx(std::sqrt(fam.v.eval(t))).epsilon(1e-14));
  }
}

TEST_CASE("constant-scalar scales, one-dimensional factor: substitution exponent one") {
  struct Row {
    double Sbar;
    const char* branch;
  };
  const Row rows[] = {
      {-1.0, "two-exponential"},
      {0.5, "double-root"},
      {2.0, "oscillatory"},
  };
  for (const Row& r : rows) {
    auto fam = twistgeo::grw_scalar_solution(1, r.Sbar, 0.0, 1.0, 0.2);
    INFO("Sbar = ", r.Sbar);
    CHECK(fam.branch == r.branch);
    CHECK(fam.wpow == 1.0);
    CHECK(fam.verified);
    CHECK(fam.stddev < 1e-5);
  }
}

TEST_CASE("constant-scalar scales: numeric branch and positivity guards") {
  auto fam = twistgeo::grw_scalar_solution(2, 0.4, 1.0, 1.0, 0.1);
  CHECK_FALSE(fam.closed_form);
  CHECK(fam.branch == "numeric");
  CHECK(fam.wpow == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(fam.w.times.size() > 100);
  CHECK(fam.w.states.col(0).minCoeff() > 0.0);
  CHECK_FALSE(fam.verified);  // no chart is assembled for sampled profiles

  CHECK_THROWS_AS((void)twistgeo::grw_scalar_solution(2, 0.4, 1.0, -1.0, 0.0), PositivityLoss);
  // strong downward launch drives the substitution function through zero
  CHECK_THROWS_AS((void)twistgeo::grw_scalar_solution(2, 0.4, 1.0, 0.5, -5.0), PositivityLoss);
  // closed forms are guarded the same way: this profile crosses zero at t = 1/2
  CHECK_THROWS_AS((void)twistgeo::grw_scalar_solution(3, -6.0, 9.0, 0.5, 0.0), PositivityLoss);
  CHECK_THROWS_AS((void)twistgeo::grw_scalar_solution(0, 0.0, 0.0, 1.0, 0.0), PreconditionError);
}

TEST_CASE("exponent bookkeeping") {
  auto kp = twistgeo::kasner_parameters({1.0, 1.0, 4.0}, {1, 1, 1});
  CHECK(kp.zeta == 6.0);
  CHECK(kp.eta == 18.0);
  auto kw = twistgeo::kasner_parameters({0.5, -0.5}, {2, 3});
  CHECK(kw.zeta == doctest::Approx(-0.5));
  CHECK(kw.eta == doctest::Approx(1.25));
  CHECK_THROWS_AS((void)twistgeo::kasner_parameters({1.0}, {1, 1}), DimensionError);
}

TEST_CASE("two-factor power families: all three branches verify on their grids") {
  auto fams = twistgeo::kasner_einstein_families_two_fiber(1.2, 0.7);
  REQUIRE(fams.size() == 3);

  CHECK(fams[0].note == "second exponent zero, curved fiber");
  CHECK(fams[0].fiber_lambda == (std::vector<double>{0.0, 1.0}));
  CHECK(fams[1].note == "first exponent zero, flat fiber");
  CHECK(fams[1].fiber_lambda == (std::vector<double>{0.0, 0.0}));
  CHECK(fams[2].note == "exponent ratio four, flat fiber");

  for (const auto& fam : fams) {
    INFO(fam.note);
    CHECK(fam.lambda == 0.0);
    CHECK(fam.verified);
    CHECK(fam.max_residual < 1e-9);
    Eigen::VectorXd t0(1), t1(1);
    t0[0] = 0.0;
    t1[0] = 1.0;
    CHECK(fam.phi.eval(t0) == doctest::Approx(1.2).epsilon(1e-14));
    CHECK(fam.phi.eval(t1) > fam.phi.eval(t0));  // growing profile
  }
  CHECK_THROWS_AS((void)twistgeo::kasner_einstein_families_two_fiber(1.0, 0.0),
                  PreconditionError);
}

TEST_CASE("three-line power family needs balanced, unequal exponents") {
  auto fam = twistgeo::kasner_einstein_family_three_fiber({1.0, 1.0, 4.0}, 1.1);
  CHECK(fam.note == "balanced exponents");
  CHECK(fam.lambda == 0.0);
  CHECK(fam.verified);
  CHECK(fam.max_residual < 1e-9);
  // profile rate 2 / zeta = 1/3
  Eigen::VectorXd t(1);
  t[0] = 3.0;
  CHECK(fam.phi.eval(t) == doctest::Approx(1.1 * std::exp(1.0)).epsilon(1e-12));

  CHECK_THROWS_AS((void)twistgeo::kasner_einstein_family_three_fiber({1.0, 2.0}, 1.0),
                  DimensionError);
  CHECK_THROWS_AS((void)twistgeo::kasner_einstein_family_three_fiber({2.0, 2.0, 2.0}, 1.0),
                  PreconditionError);
  // zeta = 6, eta = 14: the balance 2 eta = zeta^2 fails
  CHECK_THROWS_AS((void)twistgeo::kasner_einstein_family_three_fiber({1.0, 2.0, 3.0}, 1.0),
                  PreconditionError);
}

TEST_CASE("three-line constant-scalar profiles across the discriminant") {
  auto kp = twistgeo::kasner_parameters({1.0, 1.0, 4.0}, {1, 1, 1});
  struct Row {
    double Sbar;
    const char* note;
  };
  const Row rows[] = {
      {-2.0, "two-exponential"},
      {0.0, "double-root"},
      {4.0, "oscillatory"},
  };
  for (const Row& r : rows) {
    auto fam = twistgeo::kasner_scalar_solution(kp, r.Sbar, 1.0, 0.2);
    INFO("Sbar = ", r.Sbar);
    CHECK(fam.note == r.note);
    CHECK(fam.verified);
    CHECK(fam.max_residual < 1e-4);
  }
  CHECK_THROWS_AS((void)twistgeo::kasner_scalar_solution(kp, -2.0, -1.0, 0.0), PositivityLoss);

  auto flat = twistgeo::kasner_parameters({1.0, -1.0, 0.0}, {1, 1, 1});
  CHECK(flat.zeta == 0.0);
  auto fz = twistgeo::kasner_scalar_solution(flat, -8.0, 1.3, 0.0);
  CHECK(fz.note == "pure exponential, zeta = 0");
  CHECK(fz.verified);
  auto fc = twistgeo::kasner_scalar_solution(flat, -6.0, 1.3, 0.0);
  CHECK(fc.note == "constant profile");
  CHECK(fc.verified);
  CHECK_THROWS_AS((void)twistgeo::kasner_scalar_solution(flat, 1.0, 1.0, 0.0),
                  PreconditionError);

  auto still = twistgeo::kasner_parameters({0.0, 0.0, 0.0}, {1, 1, 1});
  auto fs = twistgeo::kasner_scalar_solution(still, -6.0, 2.0, 0.0);
  CHECK(fs.note == "all exponents zero");
  CHECK(fs.verified);
  CHECK_THROWS_AS((void)twistgeo::kasner_scalar_solution(still, 0.0, 1.0, 0.0),
                  PreconditionError);

  auto wrong = twistgeo::kasner_parameters({1.0, 1.0}, {1, 2});
  CHECK_THROWS_AS((void)twistgeo::kasner_scalar_solution(wrong, -6.0, 1.0, 0.0),
                  PreconditionError);
}

TEST_CASE("base-carried classification accepts the solved family and flags drift") {
  Expr f = twistgeo::grw_einstein_solution(0.1, 1.0, 0.4);
  auto fib = twistgeo::make_einstein_fiber(1, 0.0);
  ProductSpec s = twistgeo::line_base_spec({fib}, {f.source()}, 0.0, 1.0);

  auto rep = twistgeo::base_carried_einstein_conditions(s, 0.1);
  CHECK(rep.pass());
  CHECK(rep.worst() < 1e-9);
  CHECK(rep.fiber_lambda == std::vector<double>{0.0});

  auto off = twistgeo::base_carried_einstein_conditions(s, 0.2);
  CHECK_FALSE(off.pass());
  CHECK(off.balance_residual == doctest::Approx(0.1).epsilon(1e-9));

  ProductSpec none = s;
  none.torsion.loc = TorsionLoc::None;
  CHECK_THROWS_AS((void)twistgeo::base_carried_einstein_conditions(none, 0.1),
                  WrongConnectionError);
  // fiber-coordinate scale functions are outside this classification
  CHECK_THROWS_AS((void)twistgeo::base_carried_einstein_conditions(
                      tgtest::twisted_line_fiber(), 0.1),
                  PreconditionError);
}

TEST_CASE("fiber-carried classification: exact instance, drift, and guards") {
  ProductSpec s = carrier_example("0.7");
  auto er = twistgeo::einstein_residual(twistgeo::make_semisym_context(s), 0.0, 4);
  CHECK(er.max_abs < 1e-12);

  auto rep = twistgeo::fiber_carried_einstein_conditions(s, 0.0);
  CHECK(rep.pass());
  CHECK(rep.worst() < 1e-9);
  // the two curvature scales coincide by construction: exponent 0.7 against a
  // constant carrier scale 0.7 makes mu0 = 0.49 = (nbar - 2) b_r^2
  CHECK(rep.mu0 == doctest::Approx(0.49).epsilon(1e-12));
  CHECK(rep.mu1 == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rep.carrier_const_residual < 1e-12);

  auto off = twistgeo::fiber_carried_einstein_conditions(s, 0.3);
  CHECK_FALSE(off.pass());
  CHECK(off.balance_residual == doctest::Approx(0.3).epsilon(1e-9));

  // mismatched scales break the two balance equations
  auto skew = twistgeo::fiber_carried_einstein_conditions(carrier_example("0.4"), 0.0);
  CHECK_FALSE(skew.pass());
  CHECK(skew.balance_residual == doctest::Approx(0.33).epsilon(1e-9));
  CHECK(skew.fiber_balance_residual[0] > 1.0);

  ProductSpec base = s;
  base.torsion.loc = TorsionLoc::Base;
  base.torsion.components = {Expr::parse("1", {"t"})};
  CHECK_THROWS_AS((void)twistgeo::fiber_carried_einstein_conditions(base, 0.0),
                  WrongConnectionError);

  auto F1 = twistgeo::make_einstein_fiber(1, 0.0, "F1", {"x"});
  ProductSpec small = twistgeo::line_base_spec({F1}, {"exp(0.7*t)"}, 0.0, 1.0);
  small.torsion.loc = TorsionLoc::Fiber;
  small.torsion.fiber = 0;
  small.torsion.components = {Expr::parse("1", small.fibers[0].coords)};
  CHECK_THROWS_AS((void)twistgeo::fiber_carried_einstein_conditions(small, 0.0),
                  PreconditionError);
}

TEST_SUITE_END();
