#pragma once

// Structured block evaluation of the Levi-Civita geometry of a product chart
// g = g_B (+) b_1^2 g_{F_1} (+) ... (+) b_m^2 g_{F_m}.
//
// Every result carries a clause label naming the block case that produced it
// (base/fiber membership of the inputs decides the case).  Sweeps compare
// these against the coordinate oracle and attribute any disagreement to the
// specific clause, so a wrong structured formula shows up by name instead of
// as an anonymous diff.
//
// grad_B / grad_{F_i} are gradients with respect to the unscaled factor
// metrics; Hess_B and Lap_B use the base connection.  In a Lorentzian base
// these inherit the signature (e.g. |grad_B b|^2 can be negative).

#include "twistgeo/chart.hpp"
#include "twistgeo/oracle.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace twistgeo {

// Local geometry of one factor at the point, unscaled.
struct FactorGeometry {
  int dim = 0;
  int offset = 0;  // first global coordinate slot
  OracleData od;
};

// Joint jets of one scale function b over (base, fiber) coordinates, plus the
// derived quantities the block formulas consume.
struct WarpData {
  double b = 1;
  Eigen::VectorXd db_B, db_F;            // first partials, split
  Eigen::MatrixXd d2_BB, d2_BF, d2_FF;   // plain second partials
  Eigen::VectorXd gradB_up, gradF_up;    // raised with the factor inverses
  Eigen::MatrixXd hessB;                 // base covariant Hessian of b
  double lapB = 0;                       // trace of hessB against g_B^{-1}
  double grad_sqB = 0;                   // g_B(grad_B b, grad_B b)

  // d^2 ln b / (dbase_a dfiber_u)
  double mixed_ln(int a, int u) const {
    return d2_BF(a, u) / b - db_B[a] * db_F[u] / (b * b);
  }
};

struct TwistedPointData {
  const ProductSpec* spec = nullptr;
  Eigen::VectorXd x;
  FactorGeometry base;
  std::vector<FactorGeometry> fibers;
  std::vector<WarpData> warps;
  Eigen::MatrixXd g;  // assembled product metric value

  int total_dim() const { return spec->total_dim(); }
};

inline TwistedPointData twisted_point_data(const ProductSpec& s, const Eigen::VectorXd& x,
                                           int order = 3) {
  TwistedPointData d;
  d.spec = &s;
  d.x = x;
  d.g = assemble_metric(s, x);

  d.base.dim = s.base.dim;
  d.base.offset = 0;
  d.base.od = oracle_from_metric_poly(factor_metric_poly(s.base.metric, s.base.dim,
                                                         base_slice(s, x), order),
                                      s.base.dim);
  for (int i = 0; i < s.num_fibers(); ++i) {
    const auto& f = s.fibers[static_cast<size_t>(i)];
    FactorGeometry fg;
    fg.dim = f.dim;
    fg.offset = s.fiber_offset(i);
    fg.od = oracle_from_metric_poly(factor_metric_poly(f.metric, f.dim, fiber_slice(s, i, x), order),
                                    f.dim);
    d.fibers.push_back(std::move(fg));
  }
  for (int i = 0; i < s.num_fibers(); ++i) {
    int dB = s.base.dim, dF = s.fibers[static_cast<size_t>(i)].dim;
    auto basis = PolyBasis::get(dB + dF, std::max(order, 2));
    Eigen::VectorXd w = warp_slice(s, i, x);
    std::vector<TruncPoly> seeds;
    for (int v = 0; v < w.size(); ++v) seeds.push_back(TruncPoly::variable(basis, v, w[v]));
    TruncPoly bp = s.warps[static_cast<size_t>(i)].expr.eval_poly(seeds);
    WarpData wd;
    wd.b = bp.value();
    if (!(wd.b > 0.0))
      throw PositivityLoss("scale function " + std::to_string(i + 1) + " non-positive at " +
                           point_str(x));
    wd.db_B.resize(dB);
    wd.db_F.resize(dF);
    wd.d2_BB.resize(dB, dB);
    wd.d2_BF.resize(dB, dF);
    wd.d2_FF.resize(dF, dF);
    for (int a = 0; a < dB; ++a) wd.db_B[a] = bp.d1(a);
    for (int u = 0; u < dF; ++u) wd.db_F[u] = bp.d1(dB + u);
    for (int a = 0; a < dB; ++a)
      for (int c = 0; c < dB; ++c) wd.d2_BB(a, c) = bp.d2(a, c);
    for (int a = 0; a < dB; ++a)
      for (int u = 0; u < dF; ++u) wd.d2_BF(a, u) = bp.d2(a, dB + u);
    for (int u = 0; u < dF; ++u)
      for (int v = 0; v < dF; ++v) wd.d2_FF(u, v) = bp.d2(dB + u, dB + v);
    wd.gradB_up = d.base.od.ginv * wd.db_B;
    wd.gradF_up = d.fibers[static_cast<size_t>(i)].od.ginv * wd.db_F;
    wd.hessB.resize(dB, dB);
    for (int a = 0; a < dB; ++a)
      for (int c = 0; c < dB; ++c) {
        double v = wd.d2_BB(a, c);
        for (int k = 0; k < dB; ++k) v -= d.base.od.gamma[idx3(dB, k, a, c)].value() * wd.db_B[k];
        wd.hessB(a, c) = v;
      }
    wd.lapB = (d.base.od.ginv * wd.hessB).trace();
    wd.grad_sqB = wd.db_B.dot(d.base.od.ginv * wd.db_B);
    d.warps.push_back(std::move(wd));
  }
  return d;
}

// ---- labeled results ---------------------------------------------------------

struct BlockTensorResult {
  Eigen::VectorXd components;  // global coordinates
  std::string clause;
};

struct BlockScalarResult {
  double value = 0;
  std::string clause;
};

// g_B(grad_B b_i, grad_B b_k)
inline double cross_grad(const TwistedPointData& d, int i, int k) {
  return d.warps[static_cast<size_t>(i)].db_B.dot(d.base.od.ginv *
                                                  d.warps[static_cast<size_t>(k)].db_B);
}

// ---- connection --------------------------------------------------------------

// nabla_{d_mu} d_nu by case dispatch; mu, nu are global coordinate indices.
inline BlockTensorResult structured_gamma(const TwistedPointData& d, int mu, int nu) {
  const ProductSpec& s = *d.spec;
  int n = s.total_dim();
  int bm = s.block_of_index(mu), bn = s.block_of_index(nu);
  BlockTensorResult out{Eigen::VectorXd::Zero(n), ""};

  if (bm == 0 && bn == 0) {
    out.clause = "conn.base_base";
    int dB = s.base.dim;
    for (int k = 0; k < dB; ++k) out.components[k] = d.base.od.gamma[idx3(dB, k, mu, nu)].value();
    return out;
  }
  if (bm == 0 || bn == 0) {
    out.clause = "conn.base_fiber";
    int a = bm == 0 ? mu : nu;           // base index
    int w = bm == 0 ? nu : mu;           // fiber index (global)
    int i = (bm == 0 ? bn : bm) - 1;
    const WarpData& wd = d.warps[static_cast<size_t>(i)];
    out.components[w] = wd.db_B[a] / wd.b;
    return out;
  }
  if (bm != bn) {
    out.clause = "conn.fiber_cross";
    return out;
  }
  out.clause = "conn.fiber_same";
  int i = bm - 1;
  const FactorGeometry& fg = d.fibers[static_cast<size_t>(i)];
  const WarpData& wd = d.warps[static_cast<size_t>(i)];
  int u = mu - fg.offset, w = nu - fg.offset, l = fg.dim;
  double gF = fg.od.g(u, w);
  out.components[mu] += wd.db_F[w] / wd.b;   // W(ln b) U
  out.components[nu] += wd.db_F[u] / wd.b;   // U(ln b) W
  for (int t = 0; t < l; ++t) {
    out.components[fg.offset + t] -= (gF / wd.b) * wd.gradF_up[t];
    out.components[fg.offset + t] += fg.od.gamma[idx3(l, t, u, w)].value();
  }
  for (int a = 0; a < s.base.dim; ++a) out.components[a] -= wd.b * gF * wd.gradB_up[a];
  return out;
}

// ---- curvature ---------------------------------------------------------------

namespace detail {

// R(d_mu, d_nu) d_rho for the canonical block patterns; callers normalize by
// antisymmetry in the first two arguments before dispatching here.
inline BlockTensorResult curvature_cases(const TwistedPointData& d, int mu, int nu, int rho) {
  const ProductSpec& s = *d.spec;
  int n = s.total_dim();
  int bm = s.block_of_index(mu), bn = s.block_of_index(nu), br = s.block_of_index(rho);
  BlockTensorResult out{Eigen::VectorXd::Zero(n), ""};

  if (bm == 0 && bn == 0 && br == 0) {
    out.clause = "curv.base_triple";
    int dB = s.base.dim;
    for (int l = 0; l < dB; ++l) out.components[l] = d.base.od.riemann[idx4(dB, l, mu, nu, rho)];
    return out;
  }
  if (bm == 0 && bn == 0 && br > 0) {
    out.clause = "curv.base_base_fiber";
    return out;
  }
  if (bm > 0 && bn == 0 && br == 0) {
    // R(V, X) Y = -(Hess_B b (X,Y) / b) V
    out.clause = "curv.fiber_base_base";
    const WarpData& wd = d.warps[static_cast<size_t>(bm - 1)];
    out.components[mu] = -wd.hessB(nu, rho) / wd.b;
    return out;
  }
  if (bm > 0 && bn > 0 && br == 0) {
    if (bm != bn) {
      out.clause = "curv.cross_zero";
      return out;
    }
    // R(V, W) X = [V X(ln b)] W - [W X(ln b)] V, same fiber
    out.clause = "curv.fiber_fiber_base";
    const FactorGeometry& fg = d.fibers[static_cast<size_t>(bm - 1)];
    const WarpData& wd = d.warps[static_cast<size_t>(bm - 1)];
    int v = mu - fg.offset, w = nu - fg.offset;
    out.components[nu] += wd.mixed_ln(rho, v);
    out.components[mu] -= wd.mixed_ln(rho, w);
    return out;
  }
  if (((bm == 0 && bn > 0) || (bm > 0 && bn == 0)) && br > 0) {
    int fother = bm == 0 ? bn : bm;
    if (fother != br) {
      out.clause = "curv.cross_zero";
      return out;
    }
    if (bm != 0) {  // R(V, X) W = -R(X, V) W
      BlockTensorResult r = curvature_cases(d, nu, mu, rho);
      r.components = -r.components;
      return r;
    }
    // canonical: R(X, V) W, i = j
    out.clause = "curv.base_fiber_fiber";
    int a = mu;  // base slot
    int i = br - 1;
    const FactorGeometry& fg = d.fibers[static_cast<size_t>(i)];
    const WarpData& wd = d.warps[static_cast<size_t>(i)];
    int v = nu - fg.offset, w = rho - fg.offset, l = fg.dim;
    double gVW_full = wd.b * wd.b * fg.od.g(v, w);
    Eigen::VectorXd raised_hess = d.base.od.ginv * wd.hessB.col(a);
    for (int c = 0; c < s.base.dim; ++c)
      out.components[c] -= (gVW_full / wd.b) * raised_hess[c];
    out.components[nu] += wd.mixed_ln(a, w);  // [W X(ln b)] V
    Eigen::VectorXd dxlnb(l);
    for (int t = 0; t < l; ++t) dxlnb[t] = wd.mixed_ln(a, t);
    Eigen::VectorXd gradF_xlnb = fg.od.ginv * dxlnb;
    for (int t = 0; t < l; ++t)
      out.components[fg.offset + t] -= fg.od.g(w, v) * gradF_xlnb[t];
    return out;
  }
  if (bm > 0 && bn > 0 && br > 0) {
    if (bm == bn && bn == br) {
      out.clause = "curv.fiber_triple_same";
      int i = bm - 1;
      const FactorGeometry& fg = d.fibers[static_cast<size_t>(i)];
      const WarpData& wd = d.warps[static_cast<size_t>(i)];
      int v = mu - fg.offset, w = nu - fg.offset, u = rho - fg.offset, l = fg.dim;
      double gVU = wd.b * wd.b * fg.od.g(v, u);
      double gWU = wd.b * wd.b * fg.od.g(w, u);
      Eigen::VectorXd dW(s.base.dim), dV(s.base.dim);
      for (int a = 0; a < s.base.dim; ++a) {
        dW[a] = wd.mixed_ln(a, w);
        dV[a] = wd.mixed_ln(a, v);
      }
      Eigen::VectorXd gradB_W = d.base.od.ginv * dW;
      Eigen::VectorXd gradB_V = d.base.od.ginv * dV;
      for (int a = 0; a < s.base.dim; ++a)
        out.components[a] += gVU * gradB_W[a] - gWU * gradB_V[a];
      for (int t = 0; t < l; ++t)
        out.components[fg.offset + t] += fg.od.riemann[idx4(l, t, v, w, u)];
      double c = wd.grad_sqB / (wd.b * wd.b);
      out.components[mu] -= c * gWU;
      out.components[nu] += c * gVU;
      return out;
    }
    if (bm == bn) {  // R(V, W) U, same pair, third elsewhere
      out.clause = "curv.fiber_triple_zero";
      return out;
    }
    if (bn == br) {  // R(U, V) W with V, W in fiber i = bn, U in fiber k = bm
      out.clause = "curv.fiber_pair_cross";
      int i = bn - 1, k = bm - 1;
      const FactorGeometry& fg = d.fibers[static_cast<size_t>(i)];
      const WarpData& wi = d.warps[static_cast<size_t>(i)];
      const WarpData& wk = d.warps[static_cast<size_t>(k)];
      int v = nu - fg.offset, w = rho - fg.offset;
      double gVW_full = wi.b * wi.b * fg.od.g(v, w);
      out.components[mu] = -gVW_full * cross_grad(d, i, k) / (wi.b * wk.b);
      return out;
    }
    out.clause = "curv.fiber_triple_zero";  // all three distinct, or pattern (i, k, i)
    if (bm == br) {
      // R(V, U) W with V, W in fiber bm, U in fiber bn: -R(U, V) W
      BlockTensorResult swapped = curvature_cases(d, nu, mu, rho);
      out.components = -swapped.components;
      out.clause = swapped.clause;
    }
    return out;
  }
  out.clause = "curv.unreachable";
  return out;
}

}  // namespace detail

// R(d_mu, d_nu) d_rho, any block pattern; antisymmetry in the first pair is
// applied to reach the printed case.
inline BlockTensorResult structured_riemann(const TwistedPointData& d, int mu, int nu, int rho) {
  const ProductSpec& s = *d.spec;
  int bm = s.block_of_index(mu), bn = s.block_of_index(nu), br = s.block_of_index(rho);
  bool swap = false;
  // canonical order: fiber-first for (fiber, base, base); base-first for
  // (base, fiber, fiber); detail handles the rest directly.
  if (bm == 0 && bn > 0 && br == 0) swap = true;                      // (X, V) Y
  if (bm > 0 && bn == 0 && br > 0) swap = true;                       // (V, X) W
  if (swap) {
    BlockTensorResult r = detail::curvature_cases(d, nu, mu, rho);
    r.components = -r.components;
    return r;
  }
  return detail::curvature_cases(d, mu, nu, rho);
}

// ---- Ricci and scalar ----------------------------------------------------------

inline BlockScalarResult structured_ricci(const TwistedPointData& d, int mu, int nu) {
  const ProductSpec& s = *d.spec;
  int bm = s.block_of_index(mu), bn = s.block_of_index(nu);
  BlockScalarResult out{0.0, ""};
  if (bm == 0 && bn == 0) {
    out.clause = "ricci.base_base";
    double v = d.base.od.ricci(mu, nu);
    for (int i = 0; i < s.num_fibers(); ++i) {
      const WarpData& wd = d.warps[static_cast<size_t>(i)];
      v += d.fibers[static_cast<size_t>(i)].dim * wd.hessB(mu, nu) / wd.b;
    }
    out.value = v;
    return out;
  }
  if (bm == 0 || bn == 0) {
    out.clause = "ricci.base_fiber";
    int a = bm == 0 ? mu : nu;
    int i = (bm == 0 ? bn : bm) - 1;
    const FactorGeometry& fg = d.fibers[static_cast<size_t>(i)];
    const WarpData& wd = d.warps[static_cast<size_t>(i)];
    int u = (bm == 0 ? nu : mu) - fg.offset;
    out.value = (fg.dim - 1) * wd.mixed_ln(a, u);
    return out;
  }
  if (bm != bn) {
    out.clause = "ricci.fiber_cross";
    return out;
  }
  out.clause = "ricci.fiber_fiber";
  int i = bm - 1;
  const FactorGeometry& fg = d.fibers[static_cast<size_t>(i)];
  const WarpData& wd = d.warps[static_cast<size_t>(i)];
  int u = mu - fg.offset, v = nu - fg.offset;
  double bracket = wd.lapB / wd.b + (fg.dim - 1) * wd.grad_sqB / (wd.b * wd.b);
  for (int k = 0; k < s.num_fibers(); ++k) {
    if (k == i) continue;
    bracket += d.fibers[static_cast<size_t>(k)].dim * cross_grad(d, i, k) /
               (wd.b * d.warps[static_cast<size_t>(k)].b);
  }
  out.value = fg.od.ricci(u, v) + bracket * (wd.b * wd.b * fg.od.g(u, v));
  return out;
}

inline double lc_scalar(const TwistedPointData& d) {
  const ProductSpec& s = *d.spec;
  double S = d.base.od.scalar;
  for (int i = 0; i < s.num_fibers(); ++i) {
    const FactorGeometry& fg = d.fibers[static_cast<size_t>(i)];
    const WarpData& wd = d.warps[static_cast<size_t>(i)];
    int l = fg.dim;
    S += 2.0 * l * wd.lapB / wd.b;
    S += fg.od.scalar / (wd.b * wd.b);
    S += l * (l - 1) * wd.grad_sqB / (wd.b * wd.b);
    for (int k = 0; k < s.num_fibers(); ++k) {
      if (k == i) continue;
      S += l * d.fibers[static_cast<size_t>(k)].dim * cross_grad(d, i, k) /
           (wd.b * d.warps[static_cast<size_t>(k)].b);
    }
  }
  return S;
}

// ---- multilinear wrappers over block vectors -----------------------------------

namespace detail {

inline std::string pattern_or(const std::string& a, const std::string& b) {
  if (a.empty() || a == b) return b;
  if (b.empty()) return a;
  return "multilinear";
}

}  // namespace detail

inline BlockTensorResult lc_connection(const TwistedPointData& d, const Eigen::VectorXd& A,
                                       const Eigen::VectorXd& B) {
  int n = d.total_dim();
  BlockTensorResult out{Eigen::VectorXd::Zero(n), ""};
  for (int mu = 0; mu < n; ++mu) {
    if (A[mu] == 0.0) continue;
    for (int nu = 0; nu < n; ++nu) {
      if (B[nu] == 0.0) continue;
      BlockTensorResult r = structured_gamma(d, mu, nu);
      out.components += A[mu] * B[nu] * r.components;
      out.clause = detail::pattern_or(out.clause, r.clause);
    }
  }
  if (out.clause.empty()) out.clause = "zero_input";
  return out;
}

inline BlockTensorResult lc_curvature(const TwistedPointData& d, const Eigen::VectorXd& A,
                                      const Eigen::VectorXd& B, const Eigen::VectorXd& C) {
  int n = d.total_dim();
  BlockTensorResult out{Eigen::VectorXd::Zero(n), ""};
  for (int mu = 0; mu < n; ++mu) {
    if (A[mu] == 0.0) continue;
    for (int nu = 0; nu < n; ++nu) {
      if (B[nu] == 0.0) continue;
      for (int rho = 0; rho < n; ++rho) {
        if (C[rho] == 0.0) continue;
        BlockTensorResult r = structured_riemann(d, mu, nu, rho);
        out.components += A[mu] * B[nu] * C[rho] * r.components;
        out.clause = detail::pattern_or(out.clause, r.clause);
      }
    }
  }
  if (out.clause.empty()) out.clause = "zero_input";
  return out;
}

inline BlockScalarResult lc_ricci(const TwistedPointData& d, const Eigen::VectorXd& A,
                                  const Eigen::VectorXd& B) {
  int n = d.total_dim();
  BlockScalarResult out{0.0, ""};
  for (int mu = 0; mu < n; ++mu) {
    if (A[mu] == 0.0) continue;
    for (int nu = 0; nu < n; ++nu) {
      if (B[nu] == 0.0) continue;
      BlockScalarResult r = structured_ricci(d, mu, nu);
      out.value += A[mu] * B[nu] * r.value;
      out.clause = detail::pattern_or(out.clause, r.clause);
    }
  }
  if (out.clause.empty()) out.clause = "zero_input";
  return out;
}

// ---- mixed Ricci flatness -------------------------------------------------------

// A chart is mixed-flat when Ric(base, fiber) vanishes identically; for fibers
// of dimension > 1 this happens exactly when every ln b_i has no mixed
// base-fiber second derivative, i.e. b_i factors as (base part) * (fiber part).
struct MixedRicciFlatReport {
  bool is_mixed_flat = true;
  double max_mixed = 0;
  std::vector<std::string> witnesses;
  std::vector<bool> warp_separable;
};

inline MixedRicciFlatReport mixed_ricci_flat_check(const ProductSpec& s, int per_axis = 5,
                                                   double tol = 1e-8) {
  for (const auto& f : s.fibers)
    if (f.dim <= 1)
      throw PreconditionError("mixed_ricci_flat_check needs every fiber dimension > 1");
  MixedRicciFlatReport rep;
  rep.warp_separable.assign(static_cast<size_t>(s.num_fibers()), true);
  Eigen::MatrixXd pts = grid_points(s.domain_box, per_axis);
  for (long r = 0; r < pts.rows(); ++r) {
    Eigen::VectorXd x = pts.row(r).transpose();
    TwistedPointData d = twisted_point_data(s, x, 2);
    for (int i = 0; i < s.num_fibers(); ++i) {
      const WarpData& wd = d.warps[static_cast<size_t>(i)];
      for (int a = 0; a < s.base.dim; ++a)
        for (int u = 0; u < d.fibers[static_cast<size_t>(i)].dim; ++u) {
          double m = std::abs(wd.mixed_ln(a, u));
          if (m > rep.max_mixed) rep.max_mixed = m;
          if (m > tol) {
            rep.is_mixed_flat = false;
            rep.warp_separable[static_cast<size_t>(i)] = false;
            if (rep.witnesses.size() < 8)
              rep.witnesses.push_back("fiber " + std::to_string(i + 1) + " at " + point_str(x) +
                                      ": |d2 ln b| = " + std::to_string(m));
          }
        }
    }
  }
  return rep;
}

}  // namespace twistgeo
