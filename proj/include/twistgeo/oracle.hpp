#pragma once

// Coordinate oracle: curvature quantities computed from metric entry jets by
// brute force, with no use of the product structure.  Conventions, fixed
// project-wide and frozen in the unit tests:
//
//   R(X,Y)Z       = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_{[X,Y]} Z
//   R^l_{ijk}     : R(d_i, d_j) d_k = R^l_{ijk} d_l
//   Ric(X,Y)      = sum_a eps_a < R(X, E_a) Y, E_a >   (so Ric_{jk} = R^a_{jak};
//                   this is the negative of the usual trace-on-first-slot
//                   convention: the unit round 2-sphere has scalar -2 here)
//   S             = sum_a eps_a Ric(E_a, E_a) = g^{jk} Ric_{jk}
//   Hess f (X,Y)  = X Y f - (nabla_X Y) f
//   Lap f         = sum_a eps_a Hess f (E_a, E_a) = g^{ij} Hess f_{ij}
//
// The index layout for rank-3/4 arrays is row-major on the bracketed indices:
// Gamma[(k*n+i)*n+j] = Gamma^k_{ij}, R[((l*n+i)*n+j)*n+k] = R^l_{ijk}.

#include "twistgeo/chart.hpp"
#include "twistgeo/poly.hpp"

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace twistgeo {

inline size_t idx3(int n, int k, int i, int j) {
  return (static_cast<size_t>(k) * n + i) * n + j;
}
inline size_t idx4(int n, int l, int i, int j, int k) {
  return ((static_cast<size_t>(l) * n + i) * n + j) * n + k;
}

// Gamma^k_{ij} = 1/2 g^{kl} (d_i g_{jl} + d_j g_{il} - d_l g_{ij}), as jets one
// order below the metric jets.
inline std::vector<TruncPoly> christoffel_poly(const std::vector<TruncPoly>& g, int n) {
  std::vector<TruncPoly> ginv = poly_matrix_inverse(g, n);
  std::vector<TruncPoly> dg(static_cast<size_t>(n) * n * n, TruncPoly(g[0].basis()));
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        dg[idx3(n, l, i, j)] = g[static_cast<size_t>(i * n + j)].derivative(l);
  std::vector<TruncPoly> gamma(static_cast<size_t>(n) * n * n, TruncPoly(g[0].basis()));
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        TruncPoly acc(g[0].basis());
        for (int l = 0; l < n; ++l) {
          TruncPoly term = dg[idx3(n, i, j, l)] + dg[idx3(n, j, i, l)] - dg[idx3(n, l, i, j)];
          acc = acc + ginv[static_cast<size_t>(k * n + l)] * term;
        }
        acc = acc * 0.5;
        gamma[idx3(n, k, i, j)] = acc;
        gamma[idx3(n, k, j, i)] = acc;
      }
  return gamma;
}

// R^l_{ijk} = d_i Gamma^l_{jk} - d_j Gamma^l_{ik}
//           + Gamma^l_{im} Gamma^m_{jk} - Gamma^l_{jm} Gamma^m_{ik}, at the jet
// base point.  Needs connection jets of order >= 1.
inline std::vector<double> riemann_values(const std::vector<TruncPoly>& gamma, int n) {
  std::vector<double> R(static_cast<size_t>(n) * n * n * n, 0.0);
  std::vector<double> gv(gamma.size());
  for (size_t t = 0; t < gamma.size(); ++t) gv[t] = gamma[t].value();
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j)
        for (int k = 0; k < n; ++k) {
          double v = gamma[idx3(n, l, j, k)].d1(i) - gamma[idx3(n, l, i, k)].d1(j);
          for (int m = 0; m < n; ++m)
            v += gv[idx3(n, l, i, m)] * gv[idx3(n, m, j, k)] -
                 gv[idx3(n, l, j, m)] * gv[idx3(n, m, i, k)];
          R[idx4(n, l, i, j, k)] = v;
          R[idx4(n, l, j, i, k)] = -v;
        }
  return R;
}

// Ric_{jk} = R^a_{jak}
inline Eigen::MatrixXd ricci_from_riemann(const std::vector<double>& R, int n) {
  Eigen::MatrixXd ric = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      double v = 0;
      for (int a = 0; a < n; ++a) v += R[idx4(n, a, j, a, k)];
      ric(j, k) = v;
    }
  return ric;
}

struct Frame {
  Eigen::MatrixXd E;         // columns are the frame vectors
  std::vector<double> eps;   // <E_a, E_a> = +-1
};

// Orthonormal frame from the eigendecomposition of g; eigenvalue order
// (ascending, so timelike directions come first for Lorentzian metrics).
inline Frame orthonormal_frame(const Eigen::MatrixXd& g) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (g + g.transpose()));
  int n = static_cast<int>(g.rows());
  Frame fr;
  fr.E.resize(n, n);
  for (int a = 0; a < n; ++a) {
    double lam = es.eigenvalues()[a];
    if (std::abs(lam) < 1e-13) throw NonDegenerateViolation("frame: metric near-degenerate");
    fr.E.col(a) = es.eigenvectors().col(a) / std::sqrt(std::abs(lam));
    fr.eps.push_back(lam > 0 ? 1.0 : -1.0);
  }
  return fr;
}

// ---- semi-symmetric connection ---------------------------------------------
//
// Given a vector field P with one-form pi = g(P, .), the connection
//   nabla'_X Y = nabla_X Y + pi(Y) X - g(X,Y) P
// has torsion T(X,Y) = pi(Y) X - pi(X) Y and preserves g.

inline std::vector<TruncPoly> semisym_connection_poly(const std::vector<TruncPoly>& gamma,
                                                      const std::vector<TruncPoly>& g,
                                                      const std::vector<TruncPoly>& P, int n) {
  std::vector<TruncPoly> pi(static_cast<size_t>(n), TruncPoly(g[0].basis()));
  for (int j = 0; j < n; ++j) {
    TruncPoly acc(g[0].basis());
    for (int l = 0; l < n; ++l) acc = acc + g[static_cast<size_t>(j * n + l)] * P[static_cast<size_t>(l)];
    pi[static_cast<size_t>(j)] = acc;
  }
  std::vector<TruncPoly> out = gamma;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        TruncPoly v = out[idx3(n, k, i, j)];
        if (k == i) v = v + pi[static_cast<size_t>(j)];
        v = v - g[static_cast<size_t>(i * n + j)] * P[static_cast<size_t>(k)];
        out[idx3(n, k, i, j)] = v;
      }
  return out;
}

// T^k_{ij} = Gamma^k_{ij} - Gamma^k_{ji} at the base point.
inline std::vector<double> torsion_values(const std::vector<TruncPoly>& gamma, int n) {
  std::vector<double> T(static_cast<size_t>(n) * n * n, 0.0);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        T[idx3(n, k, i, j)] = gamma[idx3(n, k, i, j)].value() - gamma[idx3(n, k, j, i)].value();
  return T;
}

// nabla_k g_{ij} values; zero for any metric connection.
inline std::vector<double> metric_covariant_derivative(const std::vector<TruncPoly>& gamma,
                                                       const std::vector<TruncPoly>& g, int n) {
  std::vector<double> out(static_cast<size_t>(n) * n * n, 0.0);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double v = g[static_cast<size_t>(i * n + j)].d1(k);
        for (int l = 0; l < n; ++l)
          v -= gamma[idx3(n, l, k, i)].value() * g[static_cast<size_t>(l * n + j)].value() +
               gamma[idx3(n, l, k, j)].value() * g[static_cast<size_t>(i * n + l)].value();
        out[idx3(n, k, i, j)] = v;
      }
  return out;
}

// ---- scalar-function calculus ----------------------------------------------

struct ScalarCalculus {
  double value = 0;
  Eigen::VectorXd grad_up;   // g^{ij} d_j f
  Eigen::VectorXd df;        // d_i f
  Eigen::MatrixXd hess;      // (0,2) Hessian of the connection
  double laplacian = 0;      // g^{ij} hess_{ij}
};

inline ScalarCalculus scalar_calculus(const TruncPoly& f, const std::vector<TruncPoly>& gamma,
                                      const Eigen::MatrixXd& ginv, int n) {
  ScalarCalculus sc;
  sc.value = f.value();
  sc.df.resize(n);
  for (int i = 0; i < n; ++i) sc.df[i] = f.d1(i);
  sc.grad_up = ginv * sc.df;
  sc.hess.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double v = f.d2(i, j);
      for (int k = 0; k < n; ++k) v -= gamma[idx3(n, k, i, j)].value() * sc.df[k];
      sc.hess(i, j) = v;
    }
  sc.laplacian = (ginv * sc.hess).trace();
  return sc;
}

// ---- assembled oracle -------------------------------------------------------

struct OracleData {
  int n = 0;
  Eigen::MatrixXd g, ginv;
  std::vector<TruncPoly> gpoly;
  std::vector<TruncPoly> gamma;   // jets of the connection in use (LC or semi-symmetric)
  std::vector<double> riemann;    // R^l_{ijk}
  Eigen::MatrixXd ricci;
  double scalar = 0;
};

inline OracleData oracle_from_metric_poly(const std::vector<TruncPoly>& gpoly, int n) {
  OracleData od;
  od.n = n;
  od.gpoly = gpoly;
  od.g.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) od.g(i, j) = gpoly[static_cast<size_t>(i * n + j)].value();
  od.ginv = od.g.inverse();
  od.gamma = christoffel_poly(gpoly, n);
  od.riemann = riemann_values(od.gamma, n);
  od.ricci = ricci_from_riemann(od.riemann, n);
  od.scalar = (od.ginv * od.ricci).trace();
  return od;
}

// Torsion vector of a product spec as jets over all coordinates (zero outside
// the carrying factor's slots).
inline std::vector<TruncPoly> torsion_vector_poly(const ProductSpec& s,
                                                  const std::shared_ptr<const PolyBasis>& basis,
                                                  const Eigen::VectorXd& x) {
  int n = s.total_dim();
  std::vector<TruncPoly> P(static_cast<size_t>(n), TruncPoly(basis));
  if (s.torsion.loc == TorsionLoc::None) throw PreconditionError("spec has no torsion vector");
  std::vector<int> slots =
      s.torsion.loc == TorsionLoc::Base ? base_slots(s) : fiber_slots(s, s.torsion.fiber);
  auto seeds = seed_slots(basis, slots, x);
  for (size_t c = 0; c < slots.size(); ++c)
    P[static_cast<size_t>(slots[c])] = s.torsion.components[c].eval_poly(seeds);
  return P;
}

inline Eigen::VectorXd torsion_vector_value(const ProductSpec& s, const Eigen::VectorXd& x) {
  int n = s.total_dim();
  Eigen::VectorXd P = Eigen::VectorXd::Zero(n);
  if (s.torsion.loc == TorsionLoc::None) return P;
  std::vector<int> slots =
      s.torsion.loc == TorsionLoc::Base ? base_slots(s) : fiber_slots(s, s.torsion.fiber);
  Eigen::VectorXd xloc(slots.size());
  for (size_t c = 0; c < slots.size(); ++c) xloc[static_cast<Eigen::Index>(c)] = x[slots[c]];
  for (size_t c = 0; c < slots.size(); ++c)
    P[slots[c]] = s.torsion.components[c].eval(xloc);
  return P;
}

inline OracleData lc_oracle(const ProductSpec& s, const Eigen::VectorXd& x, int order = 3) {
  return oracle_from_metric_poly(metric_poly(s, x, order), s.total_dim());
}

inline OracleData ss_oracle(const ProductSpec& s, const Eigen::VectorXd& x, int order = 3) {
  int n = s.total_dim();
  std::vector<TruncPoly> g = metric_poly(s, x, order);
  OracleData od;
  od.n = n;
  od.gpoly = g;
  od.g.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) od.g(i, j) = g[static_cast<size_t>(i * n + j)].value();
  od.ginv = od.g.inverse();
  std::vector<TruncPoly> lc = christoffel_poly(g, n);
  std::vector<TruncPoly> P = torsion_vector_poly(s, g[0].basis(), x);
  od.gamma = semisym_connection_poly(lc, g, P, n);
  od.riemann = riemann_values(od.gamma, n);
  od.ricci = ricci_from_riemann(od.riemann, n);
  od.scalar = (od.ginv * od.ricci).trace();
  return od;
}

// Ricci recomputed through an orthonormal frame; cross-checks the coordinate
// contraction.  ric_frame(X,Y) = sum_a eps_a <R(X,E_a)Y, E_a>.
inline Eigen::MatrixXd ricci_via_frame(const OracleData& od) {
  Frame fr = orthonormal_frame(od.g);
  int n = od.n;
  Eigen::MatrixXd ric = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      double acc = 0;
      for (int a = 0; a < n; ++a) {
        // <R(d_j, E_a) d_k, E_a> = E_a^i R^l_{jik} g_{lm} E_a^m
        double term = 0;
        for (int i = 0; i < n; ++i)
          for (int l = 0; l < n; ++l) {
            double glm_Em = 0;
            for (int m = 0; m < n; ++m) glm_Em += od.g(l, m) * fr.E(m, a);
            term += fr.E(i, a) * od.riemann[idx4(n, l, j, i, k)] * glm_Em;
          }
        acc += fr.eps[static_cast<size_t>(a)] * term;
      }
      ric(j, k) = acc;
    }
  return ric;
}

// ---- finite-difference fallback (independent of the jet engine) -------------

inline std::vector<double> christoffel_fd(const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& gfun,
                                          const Eigen::VectorXd& x, double h = 1e-5) {
  int n = static_cast<int>(x.size());
  Eigen::MatrixXd g = gfun(x);
  Eigen::MatrixXd ginv = g.inverse();
  std::vector<Eigen::MatrixXd> dg;
  for (int l = 0; l < n; ++l) {
    Eigen::VectorXd xp = x, xm = x;
    double hh = h * (1.0 + std::abs(x[l]));
    xp[l] += hh;
    xm[l] -= hh;
    dg.push_back((gfun(xp) - gfun(xm)) / (2 * hh));
  }
  std::vector<double> gamma(static_cast<size_t>(n) * n * n, 0.0);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double v = 0;
        for (int l = 0; l < n; ++l)
          v += ginv(k, l) * (dg[static_cast<size_t>(i)](j, l) + dg[static_cast<size_t>(j)](i, l) -
                             dg[static_cast<size_t>(l)](i, j));
        gamma[idx3(n, k, i, j)] = 0.5 * v;
      }
  return gamma;
}

// Curvature by central differences of the FD connection; coarse (h^2 in the
// outer difference) but fully independent of TruncPoly.
inline std::vector<double> riemann_fd(const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& gfun,
                                      const Eigen::VectorXd& x, double h = 1e-4) {
  int n = static_cast<int>(x.size());
  std::vector<double> g0 = christoffel_fd(gfun, x);
  std::vector<std::vector<double>> dgamma;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd xp = x, xm = x;
    double hh = h * (1.0 + std::abs(x[i]));
    xp[i] += hh;
    xm[i] -= hh;
    std::vector<double> gp = christoffel_fd(gfun, xp), gm = christoffel_fd(gfun, xm);
    std::vector<double> d(gp.size());
    for (size_t t = 0; t < gp.size(); ++t) d[t] = (gp[t] - gm[t]) / (2 * hh);
    dgamma.push_back(std::move(d));
  }
  std::vector<double> R(static_cast<size_t>(n) * n * n * n, 0.0);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          double v = dgamma[static_cast<size_t>(i)][idx3(n, l, j, k)] -
                     dgamma[static_cast<size_t>(j)][idx3(n, l, i, k)];
          for (int m = 0; m < n; ++m)
            v += g0[idx3(n, l, i, m)] * g0[idx3(n, m, j, k)] -
                 g0[idx3(n, l, j, m)] * g0[idx3(n, m, i, k)];
          R[idx4(n, l, i, j, k)] = v;
        }
  return R;
}

}  // namespace twistgeo
