#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "test_support.hpp"
#include "twistgeo/einstein.hpp"
#include "twistgeo/oracle.hpp"
#include "twistgeo/ss_blocks.hpp"
#include "twistgeo/sweep.hpp"

using twistgeo::idx3;
using twistgeo::OracleData;
using twistgeo::OracleDiffReport;
using twistgeo::ProductSpec;
using twistgeo::SemiSymPointData;
using twistgeo::WrongConnectionError;

namespace {

Eigen::VectorXd unit(int n, int k) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  v[k] = 1.0;
  return v;
}

}  // namespace

TEST_SUITE("ss_blocks") {

TEST_CASE("point data needs a distinguished field") {
  ProductSpec s = tgtest::warped_two_fibers();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(4);
  CHECK_THROWS_AS((void)twistgeo::semisym_point_data(s, x), WrongConnectionError);
  CHECK_THROWS_AS((void)twistgeo::make_semisym_context(s), WrongConnectionError);
}

TEST_CASE("displacement bookkeeping: base carrier") {
  ProductSpec s = tgtest::with_base_torsion(tgtest::warped_two_fibers());
  Eigen::VectorXd x(4);
  x << 0.3, -0.2, 0.4, 0.1;
  SemiSymPointData d = twistgeo::semisym_point_data(s, x, 3);
  CHECK(d.on_base);
  CHECK(d.r == -1);
  CHECK(d.P[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(d.P.tail(3).cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.pi[0] == doctest::Approx(-1.0).epsilon(1e-14));  // lowered through g_tt = -1
  CHECK(d.piP == doctest::Approx(-1.0).epsilon(1e-14));
  // P(b_i) picks up each scale's base derivative
  CHECK(d.Pb[0] == doctest::Approx(0.3 * std::exp(0.3 * 0.3)).epsilon(1e-13));
  CHECK(d.Pb[1] == doctest::Approx(0.2).epsilon(1e-13));
}

TEST_CASE("displacement bookkeeping: fiber carrier") {
  ProductSpec s = tgtest::with_fiber_torsion(tgtest::warped_two_fibers(), 0, "0.5");
  Eigen::VectorXd x(4);
  x << 0.3, -0.2, 0.4, 0.1;
  SemiSymPointData d = twistgeo::semisym_point_data(s, x, 3);
  CHECK_FALSE(d.on_base);
  CHECK(d.r == 0);
  CHECK(d.P[1] == doctest::Approx(0.5).epsilon(1e-15));
  double b1 = std::exp(0.3 * 0.3);
  CHECK(d.pi[1] == doctest::Approx(0.5 * b1 * b1).epsilon(1e-13));
  CHECK(d.piP == doctest::Approx(0.25 * b1 * b1).epsilon(1e-13));
  // the first scale does not vary along its own factor: P(b_1) = 0
  CHECK(d.Pb[0] == 0.0);
  CHECK(d.Pb[1] == 0.0);
}

TEST_CASE("torsion identity holds at machine precision") {
  for (ProductSpec s : {tgtest::with_base_torsion(tgtest::warped_two_fibers()),
                        tgtest::with_fiber_torsion(tgtest::warped_two_fibers(), 1, "0.3*y"),
                        tgtest::with_base_torsion(tgtest::twisted_line_fiber())}) {
    Eigen::VectorXd x(s.total_dim());
    x.setConstant(0.25);
    SemiSymPointData d = twistgeo::semisym_point_data(s, x, 3);
    CHECK(twistgeo::torsion_residual(d) < 1e-12);
  }
}

TEST_CASE("structured tensors match the jet oracle: base carrier") {
  ProductSpec s = tgtest::with_base_torsion(tgtest::warped_two_fibers());
  OracleDiffReport rep = twistgeo::oracle_diff_single(s, 12, 13, "ss");
  CHECK(rep.pass());
  CHECK(rep.per_spec[0].gamma.max_diff < 1e-10);
  CHECK(rep.per_spec[0].riemann.max_diff < 1e-9);
  CHECK(rep.per_spec[0].ricci.max_diff < 1e-9);
  CHECK(rep.per_spec[0].scalar.max_diff < 1e-9);
  CHECK(rep.per_spec[0].torsion_residual < 1e-12);
}

TEST_CASE("structured tensors match the jet oracle: fiber carrier on a warped chart") {
  ProductSpec s = tgtest::with_fiber_torsion(tgtest::warped_two_fibers(), 1, "0.3*y");
  OracleDiffReport rep = twistgeo::oracle_diff_single(s, 12, 13, "ss");
  CHECK(rep.pass());
  CHECK(rep.per_spec[0].torsion_residual < 1e-12);
}

TEST_CASE("base carrier over a twisted line factor stays exact") {
  ProductSpec s = tgtest::with_base_torsion(tgtest::twisted_line_fiber());
  OracleDiffReport rep = twistgeo::oracle_diff_single(s, 12, 13, "ss");
  CHECK(rep.pass());
}

TEST_CASE("known defect: carrier fiber with its own twisted scale") {
  // A displacement field tangent to a factor whose scale depends on that
  // factor's coordinates: the printed trace terms miss the in-fiber scale
  // gradient.  The full curvature 4-tensor still matches; the contraction
  // does not.  Frozen as documented behavior.
  ProductSpec s = tgtest::with_fiber_torsion(tgtest::twisted_line_fiber(), 0, "0.5");
  OracleDiffReport rep = twistgeo::oracle_diff_single(s, 12, 13, "ss");
  CHECK_FALSE(rep.pass());
  const twistgeo::SpecDiff& sd = rep.per_spec[0];
  CHECK(sd.gamma.max_diff < 1e-10);
  CHECK(sd.riemann.max_diff < 1e-9);  // 4-tensor exact
  CHECK(sd.ricci.max_diff > 1e-4);
  CHECK(sd.ricci.worst_clause == "ss.ricci.fiber_fiber");
  CHECK(sd.scalar.max_diff > 1e-4);
}

TEST_CASE("ss clauses label the extended case split") {
  ProductSpec s = tgtest::with_base_torsion(tgtest::warped_two_fibers());
  Eigen::VectorXd x(4);
  x << 0.3, -0.2, 0.4, 0.1;
  SemiSymPointData d = twistgeo::semisym_point_data(s, x, 3);
  int n = 4;
  CHECK(twistgeo::ss_connection(d, unit(n, 0), unit(n, 0)).clause == "ss.conn.base_base");
  CHECK(twistgeo::ss_connection(d, unit(n, 1), unit(n, 2)).clause == "ss.conn.fiber_cross");
  CHECK(twistgeo::ss_ricci(d, unit(n, 0), unit(n, 0)).clause == "ss.ricci.base_base");
  CHECK(twistgeo::ss_ricci(d, unit(n, 2), unit(n, 3)).clause == "ss.ricci.fiber_fiber");
  CHECK(twistgeo::ss_ricci(d, Eigen::VectorXd::Zero(n), unit(n, 0)).clause == "zero_input");
  CHECK(twistgeo::ss_scalar(d).clause == "ss.scalar.base");

  ProductSpec sf = tgtest::with_fiber_torsion(tgtest::warped_two_fibers(), 1, "0.3*y");
  SemiSymPointData df = twistgeo::semisym_point_data(sf, x, 3);
  CHECK(twistgeo::ss_scalar(df).clause == "ss.scalar.fiber");
}

TEST_CASE("ss scalar matches the jet scalar") {
  ProductSpec s = tgtest::with_fiber_torsion(tgtest::warped_two_fibers(), 1, "0.3*y");
  Eigen::VectorXd x(4);
  x << 0.2, 0.5, -0.3, 0.4;
  SemiSymPointData d = twistgeo::semisym_point_data(s, x, 3);
  OracleData od = twistgeo::ss_oracle(s, x);
  CHECK(twistgeo::ss_scalar(d).value == doctest::Approx(od.scalar).epsilon(1e-10));
}

TEST_CASE("ss ricci goes asymmetric once the displacement one-form has curl") {
  // a field along a one-dimensional carrier always lowers to a closed
  // one-form, so that Ricci stays symmetric; a curling field on a plane
  // factor breaks the symmetry
  ProductSpec closed = tgtest::with_base_torsion(tgtest::warped_two_fibers(), "t+2");
  Eigen::VectorXd x(4);
  x << 0.3, -0.2, 0.4, 0.1;
  OracleData odc = twistgeo::ss_oracle(closed, x);
  CHECK((odc.ricci - odc.ricci.transpose()).cwiseAbs().maxCoeff() < 1e-10);

  ProductSpec curl = tgtest::warped_two_fibers();
  curl.torsion.loc = twistgeo::TorsionLoc::Fiber;
  curl.torsion.fiber = 1;
  curl.torsion.components = {twistgeo::Expr::parse("0", {"y", "z"}),
                             twistgeo::Expr::parse("0.3*y", {"y", "z"})};
  OracleData odk = twistgeo::ss_oracle(curl, x);
  CHECK((odk.ricci - odk.ricci.transpose()).cwiseAbs().maxCoeff() > 1e-4);
}

TEST_CASE("einstein_residual separates solutions from non-solutions") {
  double lam = 0.25;
  twistgeo::Expr f = twistgeo::grw_einstein_solution(lam, 1.0, 0.5);
  ProductSpec s = twistgeo::line_base_spec({twistgeo::make_einstein_fiber(1, 0)},
                                           {f.source()}, 0.0, 1.0);
  twistgeo::SemiSymContext ctx = twistgeo::make_semisym_context(s);
  twistgeo::EinsteinResidual ok = twistgeo::einstein_residual(ctx, lam, 5);
  CHECK(ok.max_abs < 1e-9);
  twistgeo::EinsteinResidual off = twistgeo::einstein_residual(ctx, lam + 0.05, 5);
  CHECK(off.max_abs > 1e-3);
  CHECK(off.worst_point.size() == s.total_dim());
}

}  // TEST_SUITE
