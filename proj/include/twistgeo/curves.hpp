#pragma once

// Curves in a product chart: geodesic integration from the structured
// block equations, covariant derivatives of fields along curves, the index
// form of a unit timelike geodesic, and a finite-difference second variation
// of arc length that serves as its independent oracle.

#include "twistgeo/chart.hpp"
#include "twistgeo/lc_blocks.hpp"
#include "twistgeo/numerics.hpp"
#include "twistgeo/oracle.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace twistgeo {

struct VariationLeavesTimelikeCone : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

// Index of the interval containing t (clamped).
inline int locate_interval(const Eigen::VectorXd& times, double t) {
  int n = static_cast<int>(times.size());
  if (n < 2) throw PreconditionError("curve needs at least two samples");
  double span = times[n - 1] - times[0];
  if (t < times[0] - 1e-9 * span || t > times[n - 1] + 1e-9 * span)
    throw PreconditionError("time outside curve span");
  int lo = 0, hi = n - 1;
  while (hi - lo > 1) {
    int mid = (lo + hi) / 2;
    if (times[mid] <= t) lo = mid;
    else hi = mid;
  }
  return lo;
}

// Lagrange cubic through the four samples nearest t (fewer near the ends of
// short segments); value and t-derivative.
inline void lagrange_cubic(const Eigen::VectorXd& times, const Eigen::MatrixXd& rows, double t,
                           Eigen::VectorXd* val, Eigen::VectorXd* der) {
  int n = static_cast<int>(times.size());
  int k = locate_interval(times, t);
  int first = std::max(0, std::min(k - 1, n - 4));
  int cnt = std::min(4, n - first);
  if (val) val->setZero(rows.cols());
  if (der) der->setZero(rows.cols());
  for (int i = 0; i < cnt; ++i) {
    double li = 1.0, dli = 0.0;
    for (int j = 0; j < cnt; ++j) {
      if (j == i) continue;
      double dij = times[first + i] - times[first + j];
      dli = dli * (t - times[first + j]) / dij + li / dij;
      li *= (t - times[first + j]) / dij;
    }
    if (val) *val += li * rows.row(first + i).transpose();
    if (der) *der += dli * rows.row(first + i).transpose();
  }
}

}  // namespace detail

// ---- curve segments ------------------------------------------------------------

struct CurveSegment {
  Eigen::VectorXd times;
  Eigen::MatrixXd points;      // row per sample
  Eigen::MatrixXd velocities;  // row per sample

  double a() const { return times[0]; }
  double b() const { return times[times.size() - 1]; }

  // Hermite cubic on the bracketing interval; the velocity is its exact
  // t-derivative, so point() and velocity() stay consistent.
  Eigen::VectorXd point(double t) const {
    int k = detail::locate_interval(times, t);
    double h = times[k + 1] - times[k], s = (t - times[k]) / h;
    double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    return h00 * points.row(k).transpose() + h * h10 * velocities.row(k).transpose() +
           h01 * points.row(k + 1).transpose() + h * h11 * velocities.row(k + 1).transpose();
  }

  Eigen::VectorXd velocity(double t) const {
    int k = detail::locate_interval(times, t);
    double h = times[k + 1] - times[k], s = (t - times[k]) / h;
    double d00 = 6 * s * (s - 1) / h, d10 = (1 - s) * (1 - 3 * s);
    double d01 = -6 * s * (s - 1) / h, d11 = s * (3 * s - 2);
    return d00 * points.row(k).transpose() + d10 * velocities.row(k).transpose() +
           d01 * points.row(k + 1).transpose() + d11 * velocities.row(k + 1).transpose();
  }
};

// ---- geodesic equations ----------------------------------------------------------

// Per-point data for the geodesic right-hand side: factor connection values and
// first warp jets only (cheaper than a full TwistedPointData).
namespace detail {

struct GeoFrame {
  Eigen::MatrixXd gB, gBinv;
  std::vector<double> gammaB;                 // base Gamma^k_{ij} values
  std::vector<Eigen::MatrixXd> gF, gFinv;
  std::vector<std::vector<double>> gammaF;
  std::vector<double> b;
  std::vector<Eigen::VectorXd> db_B, db_F;
};

inline std::vector<double> christoffel_values(const std::vector<TruncPoly>& gamma) {
  std::vector<double> v(gamma.size());
  for (size_t i = 0; i < gamma.size(); ++i) v[i] = gamma[i].value();
  return v;
}

inline GeoFrame geo_frame(const ProductSpec& s, const Eigen::VectorXd& x) {
  GeoFrame fr;
  int dB = s.base.dim;
  auto gBp = factor_metric_poly(s.base.metric, dB, base_slice(s, x), 1);
  fr.gB.resize(dB, dB);
  for (int i = 0; i < dB; ++i)
    for (int j = 0; j < dB; ++j) fr.gB(i, j) = gBp[static_cast<size_t>(i * dB + j)].value();
  fr.gBinv = fr.gB.inverse();
  fr.gammaB = christoffel_values(christoffel_poly(gBp, dB));
  for (int i = 0; i < s.num_fibers(); ++i) {
    int dF = s.fibers[static_cast<size_t>(i)].dim;
    auto gFp = factor_metric_poly(s.fibers[static_cast<size_t>(i)].metric, dF,
                                  fiber_slice(s, i, x), 1);
    Eigen::MatrixXd gF(dF, dF);
    for (int a = 0; a < dF; ++a)
      for (int c = 0; c < dF; ++c) gF(a, c) = gFp[static_cast<size_t>(a * dF + c)].value();
    fr.gF.push_back(gF);
    fr.gFinv.push_back(gF.inverse());
    fr.gammaF.push_back(christoffel_values(christoffel_poly(gFp, dF)));

    auto basis = PolyBasis::get(dB + dF, 1);
    Eigen::VectorXd w = warp_slice(s, i, x);
    std::vector<TruncPoly> seeds;
    for (int v = 0; v < w.size(); ++v) seeds.push_back(TruncPoly::variable(basis, v, w[v]));
    TruncPoly bp = s.warps[static_cast<size_t>(i)].expr.eval_poly(seeds);
    if (!(bp.value() > 0.0))
      throw PositivityLoss("scale function " + std::to_string(i + 1) + " non-positive at " +
                           point_str(x));
    fr.b.push_back(bp.value());
    Eigen::VectorXd dbB(dB), dbF(dF);
    for (int a = 0; a < dB; ++a) dbB[a] = bp.d1(a);
    for (int u = 0; u < dF; ++u) dbF[u] = bp.d1(dB + u);
    fr.db_B.push_back(dbB);
    fr.db_F.push_back(dbF);
  }
  return fr;
}

}  // namespace detail

// Coordinate acceleration of a geodesic through (x, v), from the structured
// block system: the base acceleration picks up sum_i b_i g_{F_i}(v_i, v_i)
// grad_B b_i, each fiber acceleration the -2 v_B(b_i)/b_i and grad_{F_i}
// terms, and every factor subtracts its own connection contraction.
inline Eigen::VectorXd geodesic_acceleration(const ProductSpec& s, const Eigen::VectorXd& x,
                                             const Eigen::VectorXd& v) {
  detail::GeoFrame fr = detail::geo_frame(s, x);
  int dB = s.base.dim, n = s.total_dim();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd vB = v.segment(0, dB);
  for (int k = 0; k < dB; ++k) {
    double g2 = 0;
    for (int i = 0; i < dB; ++i)
      for (int j = 0; j < dB; ++j) g2 += fr.gammaB[idx3(dB, k, i, j)] * vB[i] * vB[j];
    acc[k] = -g2;
  }
  for (int i = 0; i < s.num_fibers(); ++i) {
    int off = s.fiber_offset(i), dF = s.fibers[static_cast<size_t>(i)].dim;
    Eigen::VectorXd vF = v.segment(off, dF);
    double qF = vF.dot(fr.gF[static_cast<size_t>(i)] * vF);   // g_{F_i}(v_i, v_i)
    double bi = fr.b[static_cast<size_t>(i)];
    Eigen::VectorXd gradB_up = fr.gBinv * fr.db_B[static_cast<size_t>(i)];
    for (int k = 0; k < dB; ++k) acc[k] += bi * qF * gradB_up[k];
    double vBb = vB.dot(fr.db_B[static_cast<size_t>(i)]);      // v_B(b_i)
    double vFlnb = vF.dot(fr.db_F[static_cast<size_t>(i)]) / bi;
    Eigen::VectorXd gradF_up = fr.gFinv[static_cast<size_t>(i)] * fr.db_F[static_cast<size_t>(i)];
    for (int u = 0; u < dF; ++u) {
      double g2 = 0;
      for (int p = 0; p < dF; ++p)
        for (int q = 0; q < dF; ++q)
          g2 += fr.gammaF[static_cast<size_t>(i)][idx3(dF, u, p, q)] * vF[p] * vF[q];
      acc[off + u] = -g2 - 2.0 * (vBb / bi) * vF[u] - 2.0 * vFlnb * vF[u] +
                     (qF / bi) * gradF_up[u];
    }
  }
  return acc;
}

inline CurveSegment geodesic_integrate(const ProductSpec& s, const Eigen::VectorXd& p0,
                                       const Eigen::VectorXd& v0, double t0, double t1,
                                       double step) {
  int n = s.total_dim();
  if (p0.size() != n || v0.size() != n)
    throw DimensionError("geodesic_integrate: point/velocity length mismatch");
  Eigen::VectorXd y0(2 * n);
  y0 << p0, v0;
  auto rhs = [&](double, const Eigen::VectorXd& y) {
    Eigen::VectorXd dy(2 * n);
    dy.segment(0, n) = y.segment(n, n);
    dy.segment(n, n) = geodesic_acceleration(s, y.segment(0, n), y.segment(n, n));
    return dy;
  };
  OdeTrajectory tr = integrate_ode(rhs, y0, t0, t1, step);
  CurveSegment c;
  c.times = tr.times;
  c.points = tr.states.leftCols(n);
  c.velocities = tr.states.rightCols(n);
  return c;
}

// Max drift of g(gamma', gamma') across the samples.
inline double velocity_norm_drift(const ProductSpec& s, const CurveSegment& c) {
  double ref = 0, drift = 0;
  for (int k = 0; k < c.times.size(); ++k) {
    Eigen::VectorXd x = c.points.row(k).transpose(), v = c.velocities.row(k).transpose();
    double q = v.dot(assemble_metric(s, x) * v);
    if (k == 0) ref = q;
    drift = std::max(drift, std::abs(q - ref));
  }
  return drift;
}

// ---- the static chart -du^2 + f1(u,x)^2 dx^2 + f2(u)^2 g_F ---------------------------

// Shape guard: 1-d Lorentzian base, first fiber 1-d, exactly two fibers, f2
// free of both x and the second fiber's coordinates.
inline void require_static_chart(const ProductSpec& s) {
  bool ok = s.base.dim == 1 && s.num_fibers() == 2 && s.fibers[0].dim == 1;
  if (ok) {
    Eigen::VectorXd c = 0.5 * (s.domain_box.col(0) + s.domain_box.col(1));
    ok = std::abs(base_metric_value(s, c)(0, 0) + 1.0) < 1e-12 &&
         std::abs(fiber_metric_value(s, 0, c)(0, 0) - 1.0) < 1e-12;
    // f2's scope is (base coords, fiber-2 coords); no fiber-2 dependence allowed
    if (ok) ok = !s.warps[1].expr.uses_any(s.base.dim, s.base.dim + s.fibers[1].dim);
  }
  if (!ok)
    throw PreconditionError(
        "static-chart operation needs base -du^2, a 1-d first fiber, and a second "
        "fiber scaled by a function of u alone");
}

// Residuals of the printed static-chart geodesic system at (x, v), taking the
// acceleration from the structured block equations.  Component r[0] is the
// printed base clause, r[1] the first-fiber clause, r[2] the max-norm of the
// second-fiber clause.  Any systematic nonzero here measures a defect of the
// printed specialization, not of the trajectory.
inline Eigen::Vector3d static_geodesic_residual(const ProductSpec& s, const Eigen::VectorXd& x,
                                                const Eigen::VectorXd& v) {
  require_static_chart(s);
  Eigen::VectorXd acc = geodesic_acceleration(s, x, v);
  detail::GeoFrame fr = detail::geo_frame(s, x);
  int off2 = s.fiber_offset(1), d2 = s.fibers[1].dim;
  double f1 = fr.b[0], f2 = fr.b[1];
  double du_f1sq = 2 * f1 * fr.db_B[0][0], dx_f1sq = 2 * f1 * fr.db_F[0][0];
  double du_f2sq = 2 * f2 * fr.db_B[1][0];
  double tau_p = v[0], tau1_p = v[1];
  Eigen::VectorXd vF = v.segment(off2, d2);
  double qF = vF.dot(fr.gF[1] * vF);

  Eigen::Vector3d r;
  r[0] = acc[0] - 0.5 * tau1_p * tau1_p * du_f1sq - 0.5 * du_f2sq * qF;
  r[1] = acc[1] + (du_f1sq * tau_p * tau1_p + 0.5 * dx_f1sq * tau1_p * tau1_p) / (f1 * f1);
  double worst = 0;
  for (int u = 0; u < d2; ++u) {
    double cov = acc[off2 + u];
    for (int p = 0; p < d2; ++p)
      for (int q = 0; q < d2; ++q) cov += fr.gammaF[1][idx3(d2, u, p, q)] * vF[p] * vF[q];
    worst = std::max(worst, std::abs(cov + (du_f2sq / (f2 * f2)) * tau_p * vF[u]));
  }
  r[2] = worst;
  return r;
}

// ---- covariant derivative along a curve -----------------------------------------

struct VariationField {
  Eigen::VectorXd times;
  Eigen::MatrixXd values;  // row per sample, one column per global coordinate
  bool vanishes_at_ends = true;

  Eigen::VectorXd value(double t) const {
    Eigen::VectorXd v;
    detail::lagrange_cubic(times, values, t, &v, nullptr);
    return v;
  }
  Eigen::VectorXd deriv(double t) const {
    Eigen::VectorXd d;
    detail::lagrange_cubic(times, values, t, nullptr, &d);
    return d;
  }
};

// Sample a time-dependent component function along given times.
inline VariationField make_variation(const Eigen::VectorXd& times,
                                     const std::function<Eigen::VectorXd(double)>& comp) {
  VariationField V;
  V.times = times;
  Eigen::VectorXd probe = comp(times[0]);
  V.values.resize(times.size(), probe.size());
  for (int k = 0; k < times.size(); ++k) V.values.row(k) = comp(times[k]).transpose();
  return V;
}

// The structured covariant derivative of V along the curve: factor-covariant
// derivatives of the block components plus the scale-function exchange terms.
inline Eigen::VectorXd covariant_derivative_along(const ProductSpec& s, const CurveSegment& c,
                                                  const VariationField& V, double t) {
  Eigen::VectorXd x = c.point(t), vel = c.velocity(t);
  Eigen::VectorXd Vv = V.value(t), Vd = V.deriv(t);
  detail::GeoFrame fr = detail::geo_frame(s, x);
  int dB = s.base.dim, n = s.total_dim();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);

  Eigen::VectorXd vB = vel.segment(0, dB), VB = Vv.segment(0, dB);
  for (int k = 0; k < dB; ++k) {
    double acc = Vd[k];
    for (int i = 0; i < dB; ++i)
      for (int j = 0; j < dB; ++j) acc += fr.gammaB[idx3(dB, k, i, j)] * vB[i] * VB[j];
    out[k] = acc;
  }
  for (int i = 0; i < s.num_fibers(); ++i) {
    int off = s.fiber_offset(i), dF = s.fibers[static_cast<size_t>(i)].dim;
    Eigen::VectorXd vF = vel.segment(off, dF), VF = Vv.segment(off, dF);
    double bi = fr.b[static_cast<size_t>(i)];
    double gFvV = vF.dot(fr.gF[static_cast<size_t>(i)] * VF);
    Eigen::VectorXd gradB_up = fr.gBinv * fr.db_B[static_cast<size_t>(i)];
    for (int k = 0; k < dB; ++k) out[k] -= bi * gFvV * gradB_up[k];

    double vBb = vB.dot(fr.db_B[static_cast<size_t>(i)]);
    double VBb = VB.dot(fr.db_B[static_cast<size_t>(i)]);
    double vFlnb = vF.dot(fr.db_F[static_cast<size_t>(i)]) / bi;
    double VFlnb = VF.dot(fr.db_F[static_cast<size_t>(i)]) / bi;
    Eigen::VectorXd gradF_up = fr.gFinv[static_cast<size_t>(i)] * fr.db_F[static_cast<size_t>(i)];
    for (int u = 0; u < dF; ++u) {
      double acc = Vd[off + u];
      for (int p = 0; p < dF; ++p)
        for (int q = 0; q < dF; ++q)
          acc += fr.gammaF[static_cast<size_t>(i)][idx3(dF, u, p, q)] * vF[p] * VF[q];
      acc += (vBb / bi) * VF[u] + (VBb / bi) * vF[u];
      acc += vFlnb * VF[u] + VFlnb * vF[u];
      acc -= (gFvV / bi) * gradF_up[u];
      out[off + u] = acc;
    }
  }
  return out;
}

// Oracle path for the same derivative: plain component derivative plus the full
// product Christoffel contraction, no block structure used.
inline Eigen::VectorXd covariant_derivative_along_oracle(const ProductSpec& s,
                                                         const CurveSegment& c,
                                                         const VariationField& V, double t) {
  Eigen::VectorXd x = c.point(t), vel = c.velocity(t);
  Eigen::VectorXd Vv = V.value(t), Vd = V.deriv(t);
  OracleData od = lc_oracle(s, x, 2);
  int n = s.total_dim();
  Eigen::VectorXd out = Vd;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        out[k] += od.gamma[idx3(n, k, i, j)].value() * vel[i] * Vv[j];
  return out;
}

// ---- unit-timelike normalization --------------------------------------------------

// Affinely reparametrize so that g(gamma', gamma') = -1, provided the measured
// value is within `accept` of -1; rejects otherwise.
inline CurveSegment normalize_unit_timelike(const ProductSpec& s, const CurveSegment& c,
                                            double tol = 1e-6, double accept = 1e-3) {
  double worst = 0, q0 = 0;
  for (int k = 0; k < c.times.size(); ++k) {
    Eigen::VectorXd x = c.points.row(k).transpose(), v = c.velocities.row(k).transpose();
    double q = v.dot(assemble_metric(s, x) * v);
    if (k == 0) q0 = q;
    worst = std::max(worst, std::abs(q + 1.0));
  }
  if (worst <= tol) return c;
  if (worst > accept || !(q0 < 0))
    throw PreconditionError("curve is not unit timelike: max |g(v,v)+1| = " +
                            std::to_string(worst));
  double scale = std::sqrt(-q0);
  CurveSegment out = c;
  out.times = c.times * scale;
  out.velocities = c.velocities / scale;
  return out;
}

// ---- index form and second variation ----------------------------------------------

// Integrand of the index form at time t; factor-covariant primes on the block
// components, curvature terms from the factor geometries, scale-function
// second-derivative coupling terms against the fiber velocities.
namespace detail {

inline double index_form_integrand(const ProductSpec& s, const CurveSegment& c,
                                   const VariationField& V, double t) {
  Eigen::VectorXd x = c.point(t), vel = c.velocity(t);
  Eigen::VectorXd Vv = V.value(t), Vd = V.deriv(t);
  TwistedPointData d = twisted_point_data(s, x, 2);
  int dB = s.base.dim;

  Eigen::VectorXd vB = vel.segment(0, dB), VB = Vv.segment(0, dB);
  Eigen::VectorXd VBp = Vd.segment(0, dB);
  for (int k = 0; k < dB; ++k)
    for (int i = 0; i < dB; ++i)
      for (int j = 0; j < dB; ++j) VBp[k] += d.base.od.gamma[idx3(dB, k, i, j)].value() * vB[i] * VB[j];

  double val = VBp.dot(d.base.od.g * VBp);
  // g_B(R^B(V_B, gamma_B') gamma_B', V_B)
  double curvB = 0;
  for (int l = 0; l < dB; ++l) {
    double Rl = 0;
    for (int i = 0; i < dB; ++i)
      for (int j = 0; j < dB; ++j)
        for (int k = 0; k < dB; ++k)
          Rl += d.base.od.riemann[idx4(dB, l, i, j, k)] * VB[i] * vB[j] * vB[k];
    for (int mth = 0; mth < dB; ++mth) curvB += d.base.od.g(l, mth) * Rl * VB[mth];
  }
  val -= curvB;

  for (int i = 0; i < s.num_fibers(); ++i) {
    const FactorGeometry& fg = d.fibers[static_cast<size_t>(i)];
    const WarpData& wd = d.warps[static_cast<size_t>(i)];
    int off = fg.offset, dF = fg.dim;
    Eigen::VectorXd vF = vel.segment(off, dF), VF = Vv.segment(off, dF);
    Eigen::VectorXd VFp = Vd.segment(off, dF);
    for (int k = 0; k < dF; ++k)
      for (int p = 0; p < dF; ++p)
        for (int q = 0; q < dF; ++q) VFp[k] += fg.od.gamma[idx3(dF, k, p, q)].value() * vF[p] * VF[q];

    double b2 = wd.b * wd.b;
    double fiber_term = VFp.dot(fg.od.g * VFp);
    double curvF = 0;
    for (int l = 0; l < dF; ++l)
      for (int mth = 0; mth < dF; ++mth) {
        double Rl = 0;
        for (int a = 0; a < dF; ++a)
          for (int jj = 0; jj < dF; ++jj)
            for (int k = 0; k < dF; ++k)
              Rl += fg.od.riemann[idx4(dF, l, a, jj, k)] * VF[a] * vF[jj] * vF[k];
        curvF += fg.od.g(l, mth) * Rl * VF[mth];
      }
    fiber_term -= curvF;
    val += b2 * fiber_term;

    // 1/2 [Hess_B(b^2)(V_B,V_B) + Hess_F(b^2)(V_F,V_F) + 2 V_B V_F(b^2)] g_F(v_F, v_F)
    double qF = vF.dot(fg.od.g * vF);
    double hessB_b2 = 0;
    for (int a = 0; a < dB; ++a)
      for (int cidx = 0; cidx < dB; ++cidx)
        hessB_b2 += 2.0 * (wd.db_B[a] * wd.db_B[cidx] + wd.b * wd.hessB(a, cidx)) * VB[a] * VB[cidx];
    double hessF_b2 = 0;
    for (int u = 0; u < dF; ++u)
      for (int w = 0; w < dF; ++w) {
        double hf = wd.d2_FF(u, w);
        for (int k = 0; k < dF; ++k) hf -= fg.od.gamma[idx3(dF, k, u, w)].value() * wd.db_F[k];
        hessF_b2 += 2.0 * (wd.db_F[u] * wd.db_F[w] + wd.b * hf) * VF[u] * VF[w];
      }
    double mixed_b2 = 0;
    for (int a = 0; a < dB; ++a)
      for (int u = 0; u < dF; ++u)
        mixed_b2 += 2.0 * (wd.db_B[a] * wd.db_F[u] + wd.b * wd.d2_BF(a, u)) * VB[a] * VF[u];
    val += 0.5 * (hessB_b2 + hessF_b2 + 2.0 * mixed_b2) * qF;

    // 2 (V_B + V_F)(b^2) g_F(V_F', v_F)
    double Vb2 = 2.0 * wd.b * (VB.dot(wd.db_B) + VF.dot(wd.db_F));
    val += 2.0 * Vb2 * VFp.dot(fg.od.g * vF);
  }
  return val;
}

}  // namespace detail

inline double index_form_quadratic(const ProductSpec& s, const CurveSegment& cur,
                                   const VariationField& V) {
  CurveSegment c = normalize_unit_timelike(s, cur);
  double a = c.a(), b = c.b();
  return -quad([&](double t) { return detail::index_form_integrand(s, c, V, t); }, a, b);
}

inline double index_form(const ProductSpec& s, const CurveSegment& c, const VariationField& V,
                         const VariationField& W) {
  VariationField plus = V, minus = V;
  plus.values = V.values + W.values;
  minus.values = V.values - W.values;
  return 0.25 * (index_form_quadratic(s, c, plus) - index_form_quadratic(s, c, minus));
}

// Arc length of the coordinate-linear variation gamma + sV, then the central
// second difference in s.  Independent of every structured formula above: only
// the metric and the raw samples enter.
inline double second_variation_fd(const ProductSpec& s, const CurveSegment& cur,
                                  const VariationField& V, double h = 1e-3) {
  CurveSegment c = normalize_unit_timelike(s, cur);
  auto length = [&](double sv) {
    return quad(
        [&](double t) {
          Eigen::VectorXd x = c.point(t) + sv * V.value(t);
          Eigen::VectorXd vel = c.velocity(t) + sv * V.deriv(t);
          double q = vel.dot(assemble_metric(s, x) * vel);
          if (!(q < 0))
            throw VariationLeavesTimelikeCone("variation leaves the timelike cone at t = " +
                                              std::to_string(t));
          return std::sqrt(-q);
        },
        c.a(), c.b());
  };
  double l0 = length(0.0), lp = length(h), lm = length(-h);
  return (lp - 2 * l0 + lm) / (h * h);
}

// Reduced static-chart index form: base component nu_B(t), first-fiber
// component nu_1(t), plus an arbitrary second-fiber block.
inline double static_reduced_index_form(const ProductSpec& s, const CurveSegment& cur,
                                        const VariationField& V) {
  require_static_chart(s);
  CurveSegment c = normalize_unit_timelike(s, cur);
  int off2 = s.fiber_offset(1), d2 = s.fibers[1].dim;
  auto integrand = [&](double t) {
    Eigen::VectorXd x = c.point(t), vel = c.velocity(t);
    Eigen::VectorXd Vv = V.value(t), Vd = V.deriv(t);
    TwistedPointData d = twisted_point_data(s, x, 2);
    const WarpData& w1 = d.warps[0];
    const WarpData& w2 = d.warps[1];
    const FactorGeometry& fg2 = d.fibers[1];

    double nuB = Vv[0], nu1 = Vv[1], nuBp = Vd[0], nu1p = Vd[1];
    double tau1p = vel[1];
    double f1sq = w1.b * w1.b;
    double duu_f1sq = 2 * (w1.db_B[0] * w1.db_B[0] + w1.b * w1.d2_BB(0, 0));
    double dxx_f1sq = 2 * (w1.db_F[0] * w1.db_F[0] + w1.b * w1.d2_FF(0, 0));
    double dux_f1sq = 2 * (w1.db_B[0] * w1.db_F[0] + w1.b * w1.d2_BF(0, 0));
    double du_f1sq = 2 * w1.b * w1.db_B[0], dx_f1sq = 2 * w1.b * w1.db_F[0];
    double f2sq = w2.b * w2.b;
    double du_f2sq = 2 * w2.b * w2.db_B[0];
    double duu_f2sq = 2 * (w2.db_B[0] * w2.db_B[0] + w2.b * w2.d2_BB(0, 0));

    Eigen::VectorXd v2 = vel.segment(off2, d2), V2 = Vv.segment(off2, d2);
    Eigen::VectorXd V2p = Vd.segment(off2, d2);
    for (int k = 0; k < d2; ++k)
      for (int p = 0; p < d2; ++p)
        for (int q = 0; q < d2; ++q) V2p[k] += fg2.od.gamma[idx3(d2, k, p, q)].value() * v2[p] * V2[q];
    double qF = v2.dot(fg2.od.g * v2);
    double curvF = 0;
    for (int l = 0; l < d2; ++l)
      for (int mth = 0; mth < d2; ++mth) {
        double Rl = 0;
        for (int a = 0; a < d2; ++a)
          for (int jj = 0; jj < d2; ++jj)
            for (int k = 0; k < d2; ++k)
              Rl += fg2.od.riemann[idx4(d2, l, a, jj, k)] * V2[a] * v2[jj] * v2[k];
        curvF += fg2.od.g(l, mth) * Rl * V2[mth];
      }

    double val = -nuBp * nuBp + f1sq * nu1p * nu1p;
    val += 0.5 * (nuB * nuB * duu_f1sq + nu1 * nu1 * dxx_f1sq + 2 * nuB * nu1 * dux_f1sq) *
           tau1p * tau1p;
    val += 2.0 * (nuB * du_f1sq + nu1 * dx_f1sq) * nu1p * tau1p;
    val += f2sq * (V2p.dot(fg2.od.g * V2p) - curvF);
    val += 0.5 * nuB * nuB * duu_f2sq * qF;
    val += 2.0 * nuB * du_f2sq * V2p.dot(fg2.od.g * v2);
    return val;
  };
  return -quad(integrand, c.a(), c.b());
}

}  // namespace twistgeo
