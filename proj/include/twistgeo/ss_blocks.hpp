#pragma once

// Structured block formulas for the semi-symmetric metric connection
//   D_X Y = LC_X Y + pi(Y) X - g(X,Y) P,     pi = g(., P),
// where the distinguished field P is tangent to the base or to one fiber.
// Same clause-label scheme as lc_blocks, prefixed "ss.".

#include "twistgeo/chart.hpp"
#include "twistgeo/lc_blocks.hpp"
#include "twistgeo/oracle.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

namespace twistgeo {

struct WrongConnectionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SemiSymPointData {
  TwistedPointData lc;
  bool on_base = true;
  int r = -1;                 // carrying fiber when !on_base
  Eigen::VectorXd P;          // global contravariant components
  Eigen::MatrixXd dP;         // dP(c, k) = d_c P^k (carrier rows only)
  Eigen::VectorXd pi;         // pi_a = g_{ab} P^b
  double piP = 0;             // g(P, P)
  Eigen::VectorXd Pb;         // P(b_i) per scale function
  // base-carried P: the base's own semi-symmetric tensors
  std::vector<double> riemannB_ss;
  Eigen::MatrixXd ricciB_ss;
  double scalarB_ss = 0;
  double divBP = 0;
  // fiber-carried P
  double divFrP = 0;          // fiber-metric divergence on the carrier
  double frame_traceFr = 0;   // sum_a eps_a g(D_{E_a} P, E_a) over the carrier block

  int total_dim() const { return lc.total_dim(); }
};

namespace detail {

// Full covariant derivative (Levi-Civita) of the field P in the direction of
// the global coordinate slot mu, expanded through the product block clauses.
inline Eigen::VectorXd nabla_P(const SemiSymPointData& d, int mu) {
  const ProductSpec& s = *d.lc.spec;
  int n = d.total_dim(), dB = s.base.dim;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  int bm = s.block_of_index(mu);
  if (d.on_base) {
    if (bm == 0) {
      const FactorGeometry& fb = d.lc.base;
      for (int k = 0; k < dB; ++k) {
        double acc = d.dP(mu, k);
        for (int a = 0; a < dB; ++a) acc += fb.od.gamma[idx3(dB, k, mu, a)].value() * d.P[a];
        out[k] = acc;
      }
    } else {
      int i = bm - 1;
      out[mu] = d.Pb[i] / d.lc.warps[static_cast<size_t>(i)].b;
    }
    return out;
  }
  // P on fiber r
  const WarpData& wr = d.lc.warps[static_cast<size_t>(d.r)];
  const FactorGeometry& fr = d.lc.fibers[static_cast<size_t>(d.r)];
  int offr = fr.offset, dF = fr.dim;
  if (bm == 0) {
    for (int u = 0; u < dF; ++u) out[offr + u] = (wr.db_B[mu] / wr.b) * d.P[offr + u];
    return out;
  }
  if (bm - 1 != d.r) return out;
  int u = mu - offr;
  Eigen::VectorXd Ploc = d.P.segment(offr, dF);
  double gUP = fr.od.g.row(u).dot(Ploc);                       // g_F(e_mu, P)
  double Plnb = Ploc.dot(wr.db_F) / wr.b;
  for (int w = 0; w < dF; ++w) {
    double acc = d.dP(mu, offr + w);
    for (int v = 0; v < dF; ++v) acc += fr.od.gamma[idx3(dF, w, u, v)].value() * Ploc[v];
    acc += (wr.db_F[u] / wr.b) * Ploc[w] + Plnb * (w == u ? 1.0 : 0.0);
    acc -= (gUP / wr.b) * wr.gradF_up[w];
    out[offr + w] = acc;
  }
  for (int a = 0; a < dB; ++a) out[a] -= wr.b * gUP * wr.gradB_up[a];
  return out;
}

inline double g_dot(const SemiSymPointData& d, int slot, const Eigen::VectorXd& vec) {
  return d.lc.g.row(slot).dot(vec);
}

}  // namespace detail

inline SemiSymPointData semisym_point_data(const ProductSpec& s, const Eigen::VectorXd& x,
                                           int order = 3) {
  if (s.torsion.loc == TorsionLoc::None)
    throw WrongConnectionError("operation needs a distinguished vector field");
  SemiSymPointData d;
  d.lc = twisted_point_data(s, x, order);
  d.on_base = s.torsion.loc == TorsionLoc::Base;
  d.r = d.on_base ? -1 : s.torsion.fiber;
  int n = s.total_dim(), dB = s.base.dim;

  std::vector<TruncPoly> Pp = torsion_vector_poly(s, PolyBasis::get(n, std::max(order, 2)), x);
  d.P = Eigen::VectorXd::Zero(n);
  d.dP = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    d.P[k] = Pp[static_cast<size_t>(k)].value();
    for (int c = 0; c < n; ++c) d.dP(c, k) = Pp[static_cast<size_t>(k)].d1(c);
  }
  d.pi = d.lc.g * d.P;
  d.piP = d.P.dot(d.pi);

  d.Pb.setZero(s.num_fibers());
  for (int i = 0; i < s.num_fibers(); ++i) {
    const WarpData& w = d.lc.warps[static_cast<size_t>(i)];
    if (d.on_base)
      d.Pb[i] = d.P.segment(0, dB).dot(w.db_B);
    else if (d.r == i)
      d.Pb[i] = d.P.segment(s.fiber_offset(i), s.fibers[static_cast<size_t>(i)].dim).dot(w.db_F);
  }

  if (d.on_base) {
    const FactorGeometry& fb = d.lc.base;
    std::vector<TruncPoly> Ppoly(static_cast<size_t>(dB), TruncPoly(fb.od.gpoly[0].basis()));
    auto bseeds = seed_slots(fb.od.gpoly[0].basis(), base_slots(s), x);
    for (int c = 0; c < dB; ++c)
      Ppoly[static_cast<size_t>(c)] = s.torsion.components[static_cast<size_t>(c)].eval_poly(bseeds);
    std::vector<TruncPoly> gamma_ss = semisym_connection_poly(fb.od.gamma, fb.od.gpoly, Ppoly, dB);
    d.riemannB_ss = riemann_values(gamma_ss, dB);
    d.ricciB_ss = ricci_from_riemann(d.riemannB_ss, dB);
    d.scalarB_ss = (fb.od.ginv * d.ricciB_ss).trace();
    d.divBP = 0;
    for (int c = 0; c < dB; ++c) {
      d.divBP += d.dP(c, c);
      for (int a = 0; a < dB; ++a) d.divBP += fb.od.gamma[idx3(dB, c, c, a)].value() * d.P[a];
    }
  } else {
    const FactorGeometry& fr = d.lc.fibers[static_cast<size_t>(d.r)];
    int offr = fr.offset, dF = fr.dim;
    d.divFrP = 0;
    for (int u = 0; u < dF; ++u) {
      d.divFrP += d.dP(offr + u, offr + u);
      for (int v = 0; v < dF; ++v)
        d.divFrP += fr.od.gamma[idx3(dF, u, u, v)].value() * d.P[offr + v];
    }
    // sum_a eps_a g(D_{E_a} P, E_a) over the carrier block, via the inverse of
    // the full-metric block
    double b2 = d.lc.warps[static_cast<size_t>(d.r)].b * d.lc.warps[static_cast<size_t>(d.r)].b;
    Eigen::MatrixXd Ginv = fr.od.ginv / b2;
    d.frame_traceFr = 0;
    for (int u = 0; u < dF; ++u) {
      Eigen::VectorXd nP = detail::nabla_P(d, offr + u);
      for (int v = 0; v < dF; ++v) d.frame_traceFr += Ginv(u, v) * detail::g_dot(d, offr + v, nP);
    }
  }
  return d;
}

struct SemiSymContext {
  ProductSpec spec;
  int order = 3;
  SemiSymPointData at(const Eigen::VectorXd& x) const { return semisym_point_data(spec, x, order); }
};

inline SemiSymContext make_semisym_context(const ProductSpec& s, int order = 3) {
  if (s.torsion.loc == TorsionLoc::None)
    throw WrongConnectionError("context needs a distinguished vector field");
  return SemiSymContext{s, order};
}

// ---- connection -----------------------------------------------------------------

// D_{d_mu} d_nu, block clauses for either carrier location.
inline BlockTensorResult ss_gamma(const SemiSymPointData& d, int mu, int nu) {
  const ProductSpec& s = *d.lc.spec;
  int n = d.total_dim(), dB = s.base.dim;
  int bm = s.block_of_index(mu), bn = s.block_of_index(nu);
  BlockTensorResult out;
  out.components = Eigen::VectorXd::Zero(n);

  if (bm == 0 && bn == 0) {
    out.clause = "ss.conn.base_base";
    const FactorGeometry& fb = d.lc.base;
    for (int k = 0; k < dB; ++k) out.components[k] = fb.od.gamma[idx3(dB, k, mu, nu)].value();
    if (d.on_base) out.components[mu] += d.pi[nu];
    double gmn = fb.od.g(mu, nu);
    out.components -= gmn * d.P;
    return out;
  }
  if (bm == 0 && bn > 0) {
    out.clause = "ss.conn.base_fiber";
    int i = bn - 1;
    out.components[nu] = d.lc.warps[static_cast<size_t>(i)].db_B[mu] /
                         d.lc.warps[static_cast<size_t>(i)].b;
    if (!d.on_base) out.components[mu] += d.pi[nu];  // g(P,U) X
    return out;
  }
  if (bm > 0 && bn == 0) {
    out.clause = "ss.conn.fiber_base";
    int i = bm - 1;
    out.components[mu] = d.lc.warps[static_cast<size_t>(i)].db_B[nu] /
                         d.lc.warps[static_cast<size_t>(i)].b;
    if (d.on_base) out.components[mu] += d.pi[nu];   // [X(b)/b + pi(X)] U
    return out;
  }
  if (bm != bn) {
    out.clause = "ss.conn.fiber_cross";
    if (!d.on_base) out.components[mu] = d.pi[nu];   // g(W,P) U
    return out;
  }
  out = structured_gamma(d.lc, mu, nu);
  out.clause = "ss.conn.fiber_same";
  double gmn = d.lc.g(mu, nu);
  if (!d.on_base) out.components[mu] += d.pi[nu];    // pi(W) U
  out.components -= gmn * d.P;                         // -g(U,W) P
  return out;
}

// Torsion identity defect: max over slot pairs and components of
// |Gamma(mu,nu) - Gamma(nu,mu) - (pi_nu e_mu - pi_mu e_nu)|.
inline double torsion_residual(const SemiSymPointData& d) {
  int n = d.total_dim();
  double worst = 0;
  for (int mu = 0; mu < n; ++mu)
    for (int nu = 0; nu < n; ++nu) {
      Eigen::VectorXd T = ss_gamma(d, mu, nu).components - ss_gamma(d, nu, mu).components;
      T[mu] -= d.pi[nu];
      T[nu] += d.pi[mu];
      worst = std::max(worst, T.cwiseAbs().maxCoeff());
    }
  return worst;
}

// ---- curvature ------------------------------------------------------------------

namespace detail {

inline BlockTensorResult ss_curvature_cases(const SemiSymPointData& d, int mu, int nu, int rho) {
  const ProductSpec& s = *d.lc.spec;
  int n = d.total_dim(), dB = s.base.dim;
  int bm = s.block_of_index(mu), bn = s.block_of_index(nu), br = s.block_of_index(rho);
  BlockTensorResult out;
  out.components = Eigen::VectorXd::Zero(n);

  // all-base
  if (bm == 0 && bn == 0 && br == 0) {
    out.clause = "ss.curv.base_triple";
    if (d.on_base) {
      for (int l = 0; l < dB; ++l) out.components[l] = d.riemannB_ss[idx4(dB, l, mu, nu, rho)];
    } else {
      BlockTensorResult lc = curvature_cases(d.lc, mu, nu, rho);
      out.components = lc.components;
      const WarpData& wr = d.lc.warps[static_cast<size_t>(d.r)];
      double gXZ = d.lc.base.od.g(mu, rho), gYZ = d.lc.base.od.g(nu, rho);
      out.components += (gXZ * wr.db_B[nu] / wr.b - gYZ * wr.db_B[mu] / wr.b) * d.P;
      out.components[nu] += d.piP * gXZ;
      out.components[mu] -= d.piP * gYZ;
    }
    return out;
  }
  // R(V, X) Y
  if (bm > 0 && bn == 0 && br == 0) {
    out.clause = "ss.curv.fiber_base_base";
    int i = bm - 1;
    const WarpData& wd = d.lc.warps[static_cast<size_t>(i)];
    double gXY = d.lc.base.od.g(nu, rho);
    out.components[mu] = -wd.hessB(nu, rho) / wd.b;
    if (d.on_base) {
      out.components[mu] -=
          (d.Pb[i] / wd.b) * gXY + d.piP * gXY + g_dot(d, rho, nabla_P(d, nu)) - d.pi[nu] * d.pi[rho];
    } else if (i != d.r) {
      out.components[mu] -= d.piP * gXY;
    } else {
      const WarpData& wr = d.lc.warps[static_cast<size_t>(d.r)];
      out.components[nu] -= d.pi[mu] * wr.db_B[rho] / wr.b;
      out.components -= gXY * nabla_P(d, mu);
      out.components[mu] -= gXY * d.piP;
      out.components += gXY * d.pi[mu] * d.P;
    }
    return out;
  }
  if (bm == 0 && bn > 0 && br == 0)  // R(X, V) Y = -R(V, X) Y
  {
    BlockTensorResult sw = ss_curvature_cases(d, nu, mu, rho);
    out.components = -sw.components;
    out.clause = sw.clause;
    return out;
  }
  // R(X, Y) V
  if (bm == 0 && bn == 0 && br > 0) {
    out.clause = "ss.curv.base_base_fiber";
    if (!d.on_base) {
      const WarpData& wr = d.lc.warps[static_cast<size_t>(d.r)];
      out.components[nu] += d.pi[rho] * wr.db_B[mu] / wr.b;
      out.components[mu] -= d.pi[rho] * wr.db_B[nu] / wr.b;
    }
    return out;
  }
  // R(V, W) X, fibers distinct
  if (bm > 0 && bn > 0 && bm != bn && br == 0) {
    out.clause = "ss.curv.fiber_pair_base";
    if (!d.on_base) {
      int i = bm - 1, j = bn - 1;
      if (i == d.r) {
        const WarpData& wi = d.lc.warps[static_cast<size_t>(i)];
        out.components[nu] -= d.pi[mu] * wi.db_B[rho] / wi.b;
      }
      if (j == d.r) {
        const WarpData& wj = d.lc.warps[static_cast<size_t>(j)];
        out.components[mu] += d.pi[nu] * wj.db_B[rho] / wj.b;
      }
    }
    return out;
  }
  // R(V, W) X, same fiber
  if (bm > 0 && bn > 0 && bm == bn && br == 0) {
    out = curvature_cases(d.lc, mu, nu, rho);
    out.clause = "ss.curv.fiber_fiber_base";
    if (!d.on_base && bm - 1 == d.r) {
      const WarpData& wi = d.lc.warps[static_cast<size_t>(d.r)];
      double xb = wi.db_B[rho] / wi.b;
      out.components[nu] -= xb * d.pi[mu];
      out.components[mu] += xb * d.pi[nu];
    }
    return out;
  }
  // R(X, V) W patterns
  if (bm == 0 && bn > 0 && br > 0) {
    int i = bn - 1, j = br - 1;
    if (i != j) {
      out.clause = "ss.curv.base_fiber_cross";
      if (!d.on_base) {
        const WarpData& wr = d.lc.warps[static_cast<size_t>(d.r)];
        out.components[nu] = (wr.db_B[mu] / wr.b) * d.pi[rho];
      }
      return out;
    }
    out = curvature_cases(d.lc, mu, nu, rho);
    out.clause = "ss.curv.base_fiber_fiber";
    double gWV = d.lc.g(rho, nu);  // full metric on the fiber block
    if (d.on_base) {
      const WarpData& wd = d.lc.warps[static_cast<size_t>(i)];
      out.components -= gWV * ((d.Pb[i] / wd.b) * Eigen::VectorXd::Unit(n, mu) + nabla_P(d, mu) +
                               d.piP * Eigen::VectorXd::Unit(n, mu) - d.pi[mu] * d.P);
    } else {
      const WarpData& wr = d.lc.warps[static_cast<size_t>(d.r)];
      double xbl = wr.db_B[mu] / wr.b;
      out.components[nu] += xbl * d.pi[rho];
      out.components[mu] -= g_dot(d, rho, nabla_P(d, nu));
      out.components -= gWV * xbl * d.P;
      out.components[mu] -= gWV * d.piP;
      out.components[mu] += d.pi[nu] * d.pi[rho];
    }
    return out;
  }
  if (bm > 0 && bn == 0 && br > 0)  // R(V, X) W = -R(X, V) W
  {
    BlockTensorResult sw = ss_curvature_cases(d, nu, mu, rho);
    out.components = -sw.components;
    out.clause = sw.clause;
    return out;
  }
  // all-fiber patterns
  if (bm == bn && bn == br) {
    int i = bm - 1;
    out = curvature_cases(d.lc, mu, nu, rho);
    out.clause = "ss.curv.fiber_triple_same";
    double gMR = d.lc.g(mu, rho), gNR = d.lc.g(nu, rho);
    const WarpData& wd = d.lc.warps[static_cast<size_t>(i)];
    if (d.on_base) {
      double coef = 2.0 * d.Pb[i] / wd.b + d.piP;
      out.components[mu] -= coef * gNR;
      out.components[nu] += coef * gMR;
      return out;
    }
    out.components[nu] += d.piP * gMR;
    out.components[mu] -= d.piP * gNR;
    if (i == d.r) {
      out.components[nu] += g_dot(d, rho, nabla_P(d, mu));
      out.components[mu] -= g_dot(d, rho, nabla_P(d, nu));
      out.components += gMR * nabla_P(d, nu) - gNR * nabla_P(d, mu);
      out.components += (gNR * d.pi[mu] - gMR * d.pi[nu]) * d.P;
      out.components[mu] += d.pi[rho] * d.pi[nu];
      out.components[nu] -= d.pi[rho] * d.pi[mu];
    }
    return out;
  }
  if (bm != bn && bn == br) {
    // R(U, V) W with V, W in one fiber, U in another
    int i = bn - 1, k = bm - 1;
    out = curvature_cases(d.lc, mu, nu, rho);
    out.clause = "ss.curv.fiber_pair_cross";
    double gVW = d.lc.g(nu, rho);
    if (d.on_base) {
      const WarpData& wi = d.lc.warps[static_cast<size_t>(i)];
      const WarpData& wk = d.lc.warps[static_cast<size_t>(k)];
      out.components[mu] -= gVW * (d.Pb[i] / wi.b + d.Pb[k] / wk.b);
      out.components[mu] -= d.piP * gVW;
      return out;
    }
    out.components[mu] -= g_dot(d, rho, nabla_P(d, nu));
    out.components -= gVW * nabla_P(d, mu);
    out.components[mu] -= d.piP * gVW;
    out.components += gVW * d.pi[mu] * d.P;
    out.components[mu] += d.pi[rho] * d.pi[nu];
    out.components[nu] -= d.pi[rho] * d.pi[mu];
    return out;
  }
  if (bm == br && bm != bn) {
    BlockTensorResult sw = ss_curvature_cases(d, nu, mu, rho);
    out.components = -sw.components;
    out.clause = sw.clause;
    return out;
  }
  out.clause = "ss.curv.fiber_triple_zero";
  return out;
}

}  // namespace detail

inline BlockTensorResult ss_riemann(const SemiSymPointData& d, int mu, int nu, int rho) {
  return detail::ss_curvature_cases(d, mu, nu, rho);
}

// ---- Ricci ----------------------------------------------------------------------

inline BlockScalarResult ss_ricci_entry(const SemiSymPointData& d, int mu, int nu) {
  const ProductSpec& s = *d.lc.spec;
  int nbar = d.total_dim();
  int bm = s.block_of_index(mu), bn = s.block_of_index(nu);
  BlockScalarResult out;

  if (bm == 0 && bn == 0) {
    out.clause = "ss.ricci.base_base";
    double acc = 0;
    if (d.on_base) {
      acc = d.ricciB_ss(mu, nu);
      double gXY = d.lc.base.od.g(mu, nu);
      double gYnP = detail::g_dot(d, nu, detail::nabla_P(d, mu));
      for (int i = 0; i < s.num_fibers(); ++i) {
        const WarpData& wd = d.lc.warps[static_cast<size_t>(i)];
        double li = s.fibers[static_cast<size_t>(i)].dim;
        acc += li * (wd.hessB(mu, nu) / wd.b + (d.Pb[i] / wd.b) * gXY + d.piP * gXY + gYnP -
                     d.pi[mu] * d.pi[nu]);
      }
    } else {
      acc = d.lc.base.od.ricci(mu, nu);
      double gXY = d.lc.base.od.g(mu, nu);
      for (int i = 0; i < s.num_fibers(); ++i) {
        const WarpData& wd = d.lc.warps[static_cast<size_t>(i)];
        acc += s.fibers[static_cast<size_t>(i)].dim * wd.hessB(mu, nu) / wd.b;
      }
      acc += gXY * d.piP * (nbar - 2) + gXY * d.frame_traceFr;
    }
    out.value = acc;
    return out;
  }
  if (bm != bn && bm > 0 && bn > 0) {
    out.clause = "ss.ricci.fiber_cross";
    out.value = 0;
    return out;
  }
  if (bm == 0 || bn == 0) {
    int fi = (bm == 0 ? bn : bm) - 1;
    int a = bm == 0 ? mu : nu;   // base slot
    int u = bm == 0 ? nu : mu;   // fiber slot
    const WarpData& wd = d.lc.warps[static_cast<size_t>(fi)];
    int li = s.fibers[static_cast<size_t>(fi)].dim;
    double mixed = (li - 1) * wd.mixed_ln(a, u - d.lc.fibers[static_cast<size_t>(fi)].offset);
    if (d.on_base) {
      out.clause = "ss.ricci.base_fiber";
      out.value = mixed;
      return out;
    }
    const WarpData& wr = d.lc.warps[static_cast<size_t>(d.r)];
    double xb = wr.db_B[a] / wr.b;
    if (bm == 0) {
      out.clause = "ss.ricci.base_fiber";
      out.value = mixed + (nbar - 2) * xb * d.pi[u];
    } else {
      out.clause = "ss.ricci.fiber_base";
      out.value = mixed + (2 - nbar) * xb * d.pi[u];
    }
    return out;
  }
  // same fiber
  out.clause = "ss.ricci.fiber_fiber";
  int i = bm - 1;
  const FactorGeometry& fg = d.lc.fibers[static_cast<size_t>(i)];
  const WarpData& wd = d.lc.warps[static_cast<size_t>(i)];
  int u = mu - fg.offset, v = nu - fg.offset;
  double li = s.fibers[static_cast<size_t>(i)].dim;
  double gVW = d.lc.g(mu, nu);
  double bracket = wd.lapB / wd.b + (li - 1) * wd.grad_sqB / (wd.b * wd.b);
  for (int k = 0; k < s.num_fibers(); ++k) {
    if (k == i) continue;
    bracket += s.fibers[static_cast<size_t>(k)].dim * cross_grad(d.lc, i, k) /
               (wd.b * d.lc.warps[static_cast<size_t>(k)].b);
  }
  double acc = fg.od.ricci(u, v);
  if (d.on_base) {
    bracket += (nbar - 2) * d.piP + d.divBP;
    for (int k = 0; k < s.num_fibers(); ++k) {
      double lk = s.fibers[static_cast<size_t>(k)].dim;
      bracket += (k == i ? (nbar + lk - 2) : lk) * d.Pb[k] / d.lc.warps[static_cast<size_t>(k)].b;
    }
    out.value = acc + bracket * gVW;
    return out;
  }
  bracket += (nbar - 2) * d.piP;
  acc += bracket * gVW;
  acc += (nbar - 2) * detail::g_dot(d, nu, detail::nabla_P(d, mu));
  acc += (2 - nbar) * d.pi[mu] * d.pi[nu];
  acc += gVW * d.divFrP;
  out.value = acc;
  return out;
}

// ---- scalar ---------------------------------------------------------------------

inline BlockScalarResult ss_scalar(const SemiSymPointData& d) {
  const ProductSpec& s = *d.lc.spec;
  int n = s.base.dim, nbar = d.total_dim();
  BlockScalarResult out;
  if (d.on_base) {
    out.clause = "ss.scalar.base";
    double acc = d.scalarB_ss;
    double sum_l = 0;
    for (int i = 0; i < s.num_fibers(); ++i) {
      const WarpData& w = d.lc.warps[static_cast<size_t>(i)];
      double li = s.fibers[static_cast<size_t>(i)].dim;
      sum_l += li;
      acc += 2.0 * li * w.lapB / w.b;
      acc += d.lc.fibers[static_cast<size_t>(i)].od.scalar / (w.b * w.b);
      acc += li * (li - 1) * w.grad_sqB / (w.b * w.b);
      acc += li * (n + nbar + li - 2) * d.Pb[i] / w.b;
      for (int j = 0; j < s.num_fibers(); ++j) {
        if (j == i) continue;
        double lj = s.fibers[static_cast<size_t>(j)].dim;
        acc += li * lj * cross_grad(d.lc, i, j) / (w.b * d.lc.warps[static_cast<size_t>(j)].b);
        acc += li * lj * d.Pb[j] / d.lc.warps[static_cast<size_t>(j)].b;
      }
    }
    acc += sum_l * (n + nbar - 3) * d.piP + 2.0 * sum_l * d.divBP;
    out.value = acc;
    return out;
  }
  out.clause = "ss.scalar.fiber";
  out.value = lc_scalar(d.lc) + d.piP * (nbar - 1) * (nbar - 2) +
              2.0 * (nbar - 1) * d.divFrP;
  return out;
}

// ---- multilinear wrappers ---------------------------------------------------------

inline BlockTensorResult ss_connection(const SemiSymPointData& d, const Eigen::VectorXd& A,
                                       const Eigen::VectorXd& B) {
  int n = d.total_dim();
  BlockTensorResult out;
  out.components = Eigen::VectorXd::Zero(n);
  std::string pat;
  for (int mu = 0; mu < n; ++mu) {
    if (A[mu] == 0.0) continue;
    for (int nu = 0; nu < n; ++nu) {
      if (B[nu] == 0.0) continue;
      BlockTensorResult t = ss_gamma(d, mu, nu);
      out.components += A[mu] * B[nu] * t.components;
      pat = detail::pattern_or(pat, t.clause);
    }
  }
  out.clause = pat.empty() ? "zero_input" : pat;
  return out;
}

inline BlockTensorResult ss_curvature(const SemiSymPointData& d, const Eigen::VectorXd& A,
                                      const Eigen::VectorXd& B, const Eigen::VectorXd& C) {
  int n = d.total_dim();
  BlockTensorResult out;
  out.components = Eigen::VectorXd::Zero(n);
  std::string pat;
  for (int mu = 0; mu < n; ++mu) {
    if (A[mu] == 0.0) continue;
    for (int nu = 0; nu < n; ++nu) {
      if (B[nu] == 0.0) continue;
      for (int rho = 0; rho < n; ++rho) {
        if (C[rho] == 0.0) continue;
        BlockTensorResult t = ss_riemann(d, mu, nu, rho);
        out.components += A[mu] * B[nu] * C[rho] * t.components;
        pat = detail::pattern_or(pat, t.clause);
      }
    }
  }
  out.clause = pat.empty() ? "zero_input" : pat;
  return out;
}

inline BlockScalarResult ss_ricci(const SemiSymPointData& d, const Eigen::VectorXd& A,
                                  const Eigen::VectorXd& B) {
  int n = d.total_dim();
  BlockScalarResult out;
  out.value = 0;
  std::string pat;
  for (int mu = 0; mu < n; ++mu) {
    if (A[mu] == 0.0) continue;
    for (int nu = 0; nu < n; ++nu) {
      if (B[nu] == 0.0) continue;
      BlockScalarResult t = ss_ricci_entry(d, mu, nu);
      out.value += A[mu] * B[nu] * t.value;
      pat = detail::pattern_or(pat, t.clause);
    }
  }
  out.clause = pat.empty() ? "zero_input" : pat;
  return out;
}

// ---- Einstein residual ------------------------------------------------------------

struct EinsteinResidual {
  double max_abs = 0;
  Eigen::VectorXd worst_point;
  int slot_a = -1, slot_b = -1;
};

inline EinsteinResidual einstein_residual(const SemiSymContext& ctx, double lambda,
                                          int per_axis = 5) {
  EinsteinResidual rep;
  int n = ctx.spec.total_dim();
  Eigen::MatrixXd pts = grid_points(ctx.spec.domain_box, per_axis);
  for (Eigen::Index row = 0; row < pts.rows(); ++row) {
    Eigen::VectorXd x = pts.row(row);
    SemiSymPointData d = ctx.at(x);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        double res = std::abs(ss_ricci_entry(d, a, b).value - lambda * d.lc.g(a, b));
        if (res > rep.max_abs) {
          rep.max_abs = res;
          rep.worst_point = x;
          rep.slot_a = a;
          rep.slot_b = b;
        }
      }
  }
  return rep;
}

}  // namespace twistgeo
