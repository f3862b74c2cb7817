#pragma once
// Finsler norms and their twisted product assemblies.
//
// A factor carries a positive, y-smooth norm F(x, y) on a coordinate box,
// positively 1-homogeneous in y; jets are taken on the punctured band
// ylo <= |y| <= yhi where the norm is smooth and its fundamental tensor
// g_ij = 1/2 d^2(F^2)/dy^i dy^j stays invertible. The product of a base
// factor with twisted fibers is the norm
//
//     F^2 = F_0^2(x_0, y_0) + sum_l f_l(x_0, x_l)^2 F_l^2(x_l, y_l),
//
// each twist f_l positive on its box. Geodesic spray coefficients follow
//
//     G^i = 1/4 g^{il} ( d^2(F^2)/dx^k dy^l y^k - d(F^2)/dx^l ),
//
// so integral curves of y' = -2G(x, y) project to forward geodesics. The
// Berwald tensor is the third y-jet of G, the mean Berwald tensor its
// half-trace, and the Cartan tensor the third y-jet of F^2/4. Everything
// here is evaluated through truncated jets with anisotropic caps: position
// variables never need more than first order, direction variables carry
// up to fifth order for the Berwald jets.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "twistgeo/expr.hpp"
#include "twistgeo/oracle.hpp"
#include "twistgeo/poly.hpp"
#include "twistgeo/srcfmt.hpp"

namespace twistgeo {

struct DegenerateFundamentalTensor : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FinslerFactor {
  std::string name;
  int dim = 0;
  std::vector<std::string> xcoords;
  std::vector<std::string> ycoords;
  Expr F;  // scope: xcoords then ycoords
  Eigen::MatrixX2d xbox;
  double ylo = 0.5;  // sampling band: ylo <= |y| <= yhi, bounded away from y = 0
  double yhi = 2.0;

  std::vector<std::string> scope() const {
    std::vector<std::string> s = xcoords;
    s.insert(s.end(), ycoords.begin(), ycoords.end());
    return s;
  }
};

inline FinslerFactor finsler_factor(std::string name, std::vector<std::string> xcoords,
                                    std::vector<std::string> ycoords, const std::string& f_src,
                                    Eigen::MatrixX2d xbox) {
  if (xcoords.size() != ycoords.size() || xcoords.empty())
    throw DimensionError("finsler_factor: need matching, nonempty x and y coordinate lists");
  if (xbox.rows() != static_cast<Eigen::Index>(xcoords.size()))
    throw DimensionError("finsler_factor: xbox rows must match dim");
  FinslerFactor f;
  f.name = std::move(name);
  f.dim = static_cast<int>(xcoords.size());
  f.xcoords = std::move(xcoords);
  f.ycoords = std::move(ycoords);
  f.xbox = std::move(xbox);
  f.F = Expr::parse(f_src, f.scope());
  return f;
}

struct ProductFinslerSpec {
  std::string name;
  FinslerFactor base;
  std::vector<FinslerFactor> fibers;
  std::vector<Expr> twists;  // twist l scope: base.xcoords then fibers[l].xcoords

  int factors() const { return 1 + static_cast<int>(fibers.size()); }

  const FinslerFactor& factor(int k) const { return k == 0 ? base : fibers[static_cast<size_t>(k - 1)]; }

  int dim() const {
    int n = base.dim;
    for (const auto& f : fibers) n += f.dim;
    return n;
  }

  int offset(int k) const {
    int o = 0;
    for (int j = 0; j < k; ++j) o += factor(j).dim;
    return o;
  }
};

inline ProductFinslerSpec finsler_product(std::string name, FinslerFactor base,
                                          std::vector<FinslerFactor> fibers,
                                          const std::vector<std::string>& twist_srcs) {
  if (twist_srcs.size() != fibers.size())
    throw DimensionError("finsler_product: one twist per fiber");
  ProductFinslerSpec ps;
  ps.name = std::move(name);
  ps.base = std::move(base);
  ps.fibers = std::move(fibers);
  std::vector<std::string> seen = ps.base.scope();
  for (const auto& f : ps.fibers)
    for (const auto& c : f.scope()) {
      if (std::find(seen.begin(), seen.end(), c) != seen.end())
        throw PreconditionError("finsler_product: coordinate name reused across factors: " + c);
      seen.push_back(c);
    }
  for (size_t l = 0; l < twist_srcs.size(); ++l) {
    std::vector<std::string> sc = ps.base.xcoords;
    sc.insert(sc.end(), ps.fibers[l].xcoords.begin(), ps.fibers[l].xcoords.end());
    ps.twists.push_back(Expr::parse(twist_srcs[l], sc));
  }
  return ps;
}

// -- sampling ---------------------------------------------------------------

inline Eigen::VectorXd sample_box(const Eigen::MatrixX2d& box, std::mt19937_64& rng) {
  Eigen::VectorXd x(box.rows());
  for (Eigen::Index i = 0; i < box.rows(); ++i) {
    std::uniform_real_distribution<double> u(box(i, 0), box(i, 1));
    x[i] = u(rng);
  }
  return x;
}

inline Eigen::VectorXd sample_punctured(int dim, double ylo, double yhi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-yhi, yhi);
  for (int tries = 0; tries < 1000; ++tries) {
    Eigen::VectorXd y(dim);
    for (int a = 0; a < dim; ++a) y[a] = u(rng);
    double r = y.norm();
    if (r >= ylo && r <= yhi) return y;
  }
  throw PreconditionError("sample_punctured: band rejection failed; check ylo < yhi");
}

inline std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_xy(const FinslerFactor& f,
                                                             std::mt19937_64& rng) {
  return {sample_box(f.xbox, rng), sample_punctured(f.dim, f.ylo, f.yhi, rng)};
}

inline std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_xy(const ProductFinslerSpec& ps,
                                                             std::mt19937_64& rng) {
  int n = ps.dim();
  Eigen::VectorXd x(n), y(n);
  for (int k = 0; k < ps.factors(); ++k) {
    auto [xk, yk] = sample_xy(ps.factor(k), rng);
    x.segment(ps.offset(k), ps.factor(k).dim) = xk;
    y.segment(ps.offset(k), ps.factor(k).dim) = yk;
  }
  return {x, y};
}

// -- norm values ------------------------------------------------------------

inline double norm_value(const FinslerFactor& f, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y) {
  Eigen::VectorXd xy(2 * f.dim);
  xy << x, y;
  return f.F.eval(xy);
}

inline double twist_value(const ProductFinslerSpec& ps, int l, const Eigen::VectorXd& x) {
  const FinslerFactor& f = ps.fibers[static_cast<size_t>(l)];
  Eigen::VectorXd arg(ps.base.dim + f.dim);
  arg << x.segment(0, ps.base.dim), x.segment(ps.offset(l + 1), f.dim);
  return ps.twists[static_cast<size_t>(l)].eval(arg);
}

inline double norm_value(const ProductFinslerSpec& ps, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y) {
  auto piece = [&](int k) {
    const FinslerFactor& f = ps.factor(k);
    double v = norm_value(f, x.segment(ps.offset(k), f.dim), y.segment(ps.offset(k), f.dim));
    return v * v;
  };
  double s = piece(0);
  for (int l = 0; l < static_cast<int>(ps.fibers.size()); ++l) {
    double w = twist_value(ps, l, x);
    if (w <= 0.0) throw PositivityLoss("norm_value: twist not positive: " + ps.fibers[static_cast<size_t>(l)].name);
    s += w * w * piece(l + 1);
  }
  return std::sqrt(s);
}

// -- squared-norm jets ------------------------------------------------------

namespace detail {

// Slot layout: positions occupy 0..n-1, directions n..2n-1.
struct FinslerJet {
  int n = 0;
  std::shared_ptr<const PolyBasis> basis;
  TruncPoly F2;

  int xs(int a) const { return a; }
  int ys(int a) const { return n + a; }
};

inline std::shared_ptr<const PolyBasis> finsler_basis(int n, int xcap, int ycap, int order) {
  std::vector<int> caps(static_cast<size_t>(2 * n));
  for (int a = 0; a < n; ++a) {
    caps[static_cast<size_t>(a)] = xcap;
    caps[static_cast<size_t>(n + a)] = ycap;
  }
  return PolyBasis::get(2 * n, order, caps);
}

// Seeds a slot as a jet variable, or as a constant when the basis caps that
// slot at order zero (position slots in direction-only jets).
inline TruncPoly seed_var(const std::shared_ptr<const PolyBasis>& basis, int var, double v) {
  int cap = basis->caps.empty() ? basis->order : basis->caps[static_cast<size_t>(var)];
  if (cap <= 0 || basis->order <= 0) return TruncPoly::constant(basis, v);
  return TruncPoly::variable(basis, var, v);
}

inline std::vector<TruncPoly> factor_seeds(const FinslerJet& J, const FinslerFactor& f, int off,
                                           const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  std::vector<TruncPoly> seeds;
  seeds.reserve(static_cast<size_t>(2 * f.dim));
  for (int a = 0; a < f.dim; ++a)
    seeds.push_back(seed_var(J.basis, J.xs(off + a), x[off + a]));
  for (int a = 0; a < f.dim; ++a)
    seeds.push_back(seed_var(J.basis, J.ys(off + a), y[off + a]));
  return seeds;
}

inline FinslerJet factor_f2_jet(const FinslerFactor& f, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& y, int xcap, int ycap, int order) {
  if (x.size() != f.dim || y.size() != f.dim)
    throw DimensionError("factor_f2_jet: point size mismatch: " + f.name);
  FinslerJet J;
  J.n = f.dim;
  J.basis = finsler_basis(J.n, xcap, ycap, order);
  TruncPoly Fp = f.F.eval_poly(factor_seeds(J, f, 0, x, y));
  if (!(Fp.value() > 0.0)) throw PositivityLoss("factor norm not positive at sample: " + f.name);
  J.F2 = Fp * Fp;
  return J;
}

inline FinslerJet product_f2_jet(const ProductFinslerSpec& ps, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& y, int xcap, int ycap, int order) {
  int n = ps.dim();
  if (x.size() != n || y.size() != n) throw DimensionError("product_f2_jet: point size mismatch");
  FinslerJet J;
  J.n = n;
  J.basis = finsler_basis(n, xcap, ycap, order);
  TruncPoly F0 = ps.base.F.eval_poly(factor_seeds(J, ps.base, 0, x, y));
  if (!(F0.value() > 0.0)) throw PositivityLoss("factor norm not positive at sample: " + ps.base.name);
  J.F2 = F0 * F0;
  for (int l = 0; l < static_cast<int>(ps.fibers.size()); ++l) {
    const FinslerFactor& f = ps.fibers[static_cast<size_t>(l)];
    int off = ps.offset(l + 1);
    TruncPoly Fl = f.F.eval_poly(factor_seeds(J, f, off, x, y));
    if (!(Fl.value() > 0.0)) throw PositivityLoss("factor norm not positive at sample: " + f.name);
    std::vector<TruncPoly> tw_seeds;
    tw_seeds.reserve(static_cast<size_t>(ps.base.dim + f.dim));
    for (int a = 0; a < ps.base.dim; ++a)
      tw_seeds.push_back(seed_var(J.basis, J.xs(a), x[a]));
    for (int a = 0; a < f.dim; ++a)
      tw_seeds.push_back(seed_var(J.basis, J.xs(off + a), x[off + a]));
    TruncPoly tw = ps.twists[static_cast<size_t>(l)].eval_poly(tw_seeds);
    if (!(tw.value() > 0.0)) throw PositivityLoss("twist not positive at sample: " + f.name);
    J.F2 += (tw * tw) * (Fl * Fl);
  }
  return J;
}

inline Eigen::MatrixXd fundamental_from_jet(const FinslerJet& J) {
  Eigen::MatrixXd g(J.n, J.n);
  for (int a = 0; a < J.n; ++a)
    for (int b = 0; b < J.n; ++b) g(a, b) = 0.5 * J.F2.d2(J.ys(a), J.ys(b));
  return g;
}

inline Eigen::MatrixXd invert_fundamental(const Eigen::MatrixXd& g, const std::string& who) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(g);
  if (!lu.isInvertible())
    throw DegenerateFundamentalTensor("fundamental tensor singular: " + who);
  return lu.inverse();
}

inline Eigen::VectorXd spray_from_jet(const FinslerJet& J, const Eigen::VectorXd& y,
                                      const std::string& who) {
  Eigen::MatrixXd ginv = invert_fundamental(fundamental_from_jet(J), who);
  Eigen::VectorXd rhs(J.n);
  for (int l = 0; l < J.n; ++l) {
    double s = -J.F2.d1(J.xs(l));
    for (int k = 0; k < J.n; ++k) s += J.F2.d2(J.xs(k), J.ys(l)) * y[k];
    rhs[l] = s;
  }
  return 0.25 * (ginv * rhs);
}

// Fundamental tensor entries as direction jets, and their inverse carried to
// the same truncation order.
inline std::vector<TruncPoly> fundamental_polys(const FinslerJet& J) {
  std::vector<TruncPoly> gp(static_cast<size_t>(J.n * J.n));
  for (int a = 0; a < J.n; ++a)
    for (int b = a; b < J.n; ++b) {
      TruncPoly e = J.F2.derivative(J.ys(a)).derivative(J.ys(b)) * 0.5;
      gp[static_cast<size_t>(a * J.n + b)] = e;
      gp[static_cast<size_t>(b * J.n + a)] = e;
    }
  return gp;
}

inline std::vector<TruncPoly> spray_polys(const FinslerJet& J, const Eigen::VectorXd& y,
                                          const std::string& who) {
  std::vector<TruncPoly> ginvp;
  try {
    ginvp = poly_matrix_inverse(fundamental_polys(J), J.n);
  } catch (const DomainError&) {
    throw DegenerateFundamentalTensor("fundamental tensor singular: " + who);
  }
  std::vector<TruncPoly> rhs(static_cast<size_t>(J.n));
  for (int l = 0; l < J.n; ++l) {
    TruncPoly s = J.F2.derivative(J.xs(l)) * (-1.0);
    for (int k = 0; k < J.n; ++k)
      s += J.F2.derivative(J.xs(k)).derivative(J.ys(l)) *
           TruncPoly::variable(J.basis, J.ys(k), y[k]);
    rhs[static_cast<size_t>(l)] = s;
  }
  std::vector<TruncPoly> G(static_cast<size_t>(J.n), TruncPoly(J.basis));
  for (int i = 0; i < J.n; ++i) {
    TruncPoly s(J.basis);
    for (int l = 0; l < J.n; ++l)
      s += ginvp[static_cast<size_t>(i * J.n + l)] * rhs[static_cast<size_t>(l)];
    G[static_cast<size_t>(i)] = s * 0.25;
  }
  return G;
}

}  // namespace detail

// -- pointwise tensors -------------------------------------------------------

struct FundamentalTensor {
  Eigen::MatrixXd g;
  Eigen::MatrixXd ginv;
};

inline FundamentalTensor fundamental_tensor(const FinslerFactor& f, const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& y) {
  auto J = detail::factor_f2_jet(f, x, y, 0, 2, 2);
  FundamentalTensor t;
  t.g = detail::fundamental_from_jet(J);
  t.ginv = detail::invert_fundamental(t.g, f.name);
  return t;
}

inline FundamentalTensor fundamental_tensor(const ProductFinslerSpec& ps, const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& y) {
  auto J = detail::product_f2_jet(ps, x, y, 0, 2, 2);
  FundamentalTensor t;
  t.g = detail::fundamental_from_jet(J);
  t.ginv = detail::invert_fundamental(t.g, ps.name);
  return t;
}

inline Eigen::VectorXd spray_generic(const FinslerFactor& f, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& y) {
  return detail::spray_from_jet(detail::factor_f2_jet(f, x, y, 1, 2, 3), y, f.name);
}

inline Eigen::VectorXd spray_generic(const ProductFinslerSpec& ps, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& y) {
  return detail::spray_from_jet(detail::product_f2_jet(ps, x, y, 1, 2, 3), y, ps.name);
}

// Block form of the product spray: base and fiber sprays of the factors alone
// plus twist-gradient corrections. Agrees with spray_generic on the product.
inline Eigen::VectorXd spray_structured(const ProductFinslerSpec& ps, const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y) {
  int n = ps.dim();
  if (x.size() != n || y.size() != n) throw DimensionError("spray_structured: point size mismatch");
  Eigen::VectorXd G(n);
  int m0 = ps.base.dim;
  Eigen::VectorXd x0 = x.segment(0, m0), y0 = y.segment(0, m0);
  G.segment(0, m0) = spray_generic(ps.base, x0, y0);
  Eigen::MatrixXd g0inv = fundamental_tensor(ps.base, x0, y0).ginv;
  for (int l = 0; l < static_cast<int>(ps.fibers.size()); ++l) {
    const FinslerFactor& f = ps.fibers[static_cast<size_t>(l)];
    int off = ps.offset(l + 1), m = f.dim;
    Eigen::VectorXd xl = x.segment(off, m), yl = y.segment(off, m);

    auto basis = PolyBasis::get(m0 + m, 1);
    std::vector<TruncPoly> seeds;
    for (int a = 0; a < m0; ++a) seeds.push_back(TruncPoly::variable(basis, a, x0[a]));
    for (int a = 0; a < m; ++a) seeds.push_back(TruncPoly::variable(basis, m0 + a, xl[a]));
    TruncPoly tw = ps.twists[static_cast<size_t>(l)].eval_poly(seeds);
    if (!(tw.value() > 0.0)) throw PositivityLoss("twist not positive at sample: " + f.name);
    TruncPoly f2 = tw * tw;
    double f2v = f2.value();

    double Fl = norm_value(f, xl, yl);
    double Fl2 = Fl * Fl;

    for (int j = 0; j < m0; ++j) {
      double c = 0.0;
      for (int k = 0; k < m0; ++k) c += g0inv(j, k) * f2.d1(k);
      G[j] -= 0.25 * c * Fl2;
    }

    Eigen::VectorXd Gl = spray_generic(f, xl, yl);
    Eigen::MatrixXd glinv = fundamental_tensor(f, xl, yl).ginv;
    double base_drift = 0.0, fiber_drift = 0.0;
    for (int h = 0; h < m0; ++h) base_drift += y0[h] * f2.d1(h);
    for (int r = 0; r < m; ++r) fiber_drift += yl[r] * f2.d1(m0 + r);
    for (int j = 0; j < m; ++j) {
      double v = Gl[j] + (base_drift + fiber_drift) * yl[j] / (2.0 * f2v);
      double c = 0.0;
      for (int s = 0; s < m; ++s) c += glinv(j, s) * f2.d1(m0 + s);
      v -= c * Fl2 / (4.0 * f2v);
      G[off + j] = v;
    }
  }
  return G;
}

// -- Berwald jets -------------------------------------------------------------

// Packing: Gjk at idx3(n, i, j, k) is d^2 G^i / dy^j dy^k; B at
// idx4(n, i, j, k, l) is d^3 G^i / dy^j dy^k dy^l; E(j, k) = 1/2 B^i_{jki}.
struct BerwaldData {
  int n = 0;
  Eigen::VectorXd G;
  Eigen::MatrixXd Gj;
  std::vector<double> Gjk;
  std::vector<double> B;
  Eigen::MatrixXd E;
};

namespace detail {

inline BerwaldData berwald_from_jet(const FinslerJet& J, const Eigen::VectorXd& y,
                                    const std::string& who) {
  std::vector<TruncPoly> G = spray_polys(J, y, who);
  BerwaldData out;
  int n = J.n;
  out.n = n;
  out.G.resize(n);
  out.Gj.resize(n, n);
  out.Gjk.assign(static_cast<size_t>(n * n * n), 0.0);
  out.B.assign(static_cast<size_t>(n * n * n * n), 0.0);
  out.E = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const TruncPoly& gi = G[static_cast<size_t>(i)];
    out.G[i] = gi.value();
    for (int j = 0; j < n; ++j) {
      out.Gj(i, j) = gi.d1(J.ys(j));
      for (int k = 0; k < n; ++k) {
        out.Gjk[static_cast<size_t>(idx3(n, i, j, k))] = gi.d2(J.ys(j), J.ys(k));
        for (int l = 0; l < n; ++l)
          out.B[static_cast<size_t>(idx4(n, i, j, k, l))] = gi.d3(J.ys(j), J.ys(k), J.ys(l));
      }
    }
  }
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += out.B[static_cast<size_t>(idx4(n, i, j, k, i))];
      out.E(j, k) = 0.5 * s;
    }
  return out;
}

}  // namespace detail

inline BerwaldData berwald_tensors(const FinslerFactor& f, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& y) {
  return detail::berwald_from_jet(detail::factor_f2_jet(f, x, y, 1, 5, 5), y, f.name);
}

inline BerwaldData berwald_tensors(const ProductFinslerSpec& ps, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& y) {
  return detail::berwald_from_jet(detail::product_f2_jet(ps, x, y, 1, 5, 5), y, ps.name);
}

// -- Cartan tensor ------------------------------------------------------------

struct CartanData {
  int n = 0;
  std::vector<double> C;  // idx3 packing, fully symmetric

  double max_abs() const {
    double m = 0.0;
    for (double v : C) m = std::max(m, std::abs(v));
    return m;
  }
};

namespace detail {

inline CartanData cartan_from_jet(const FinslerJet& J) {
  CartanData out;
  out.n = J.n;
  out.C.assign(static_cast<size_t>(J.n * J.n * J.n), 0.0);
  for (int i = 0; i < J.n; ++i)
    for (int j = 0; j < J.n; ++j)
      for (int k = 0; k < J.n; ++k)
        out.C[static_cast<size_t>(idx3(J.n, i, j, k))] =
            0.25 * J.F2.d3(J.ys(i), J.ys(j), J.ys(k));
  return out;
}

}  // namespace detail

inline CartanData cartan_generic(const FinslerFactor& f, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& y) {
  return detail::cartan_from_jet(detail::factor_f2_jet(f, x, y, 0, 3, 3));
}

inline CartanData cartan_generic(const ProductFinslerSpec& ps, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& y) {
  return detail::cartan_from_jet(detail::product_f2_jet(ps, x, y, 0, 3, 3));
}

// Blockwise shape of the product Cartan tensor: the base block is the base
// factor's tensor, each pure fiber block is the fiber tensor scaled by the
// squared twist, and every index triple meeting two factors vanishes.
struct CartanSplit {
  CartanData generic;
  double max_block_gap = 0.0;
  double max_mixed = 0.0;
};

inline CartanSplit cartan_tensor(const ProductFinslerSpec& ps, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& y) {
  CartanSplit out;
  out.generic = cartan_generic(ps, x, y);
  int n = out.generic.n;
  std::vector<int> owner(static_cast<size_t>(n));
  for (int k = 0; k < ps.factors(); ++k)
    for (int a = 0; a < ps.factor(k).dim; ++a) owner[static_cast<size_t>(ps.offset(k) + a)] = k;
  for (int k = 0; k < ps.factors(); ++k) {
    const FinslerFactor& f = ps.factor(k);
    int off = ps.offset(k);
    CartanData local = cartan_generic(f, x.segment(off, f.dim), y.segment(off, f.dim));
    double scale = 1.0;
    if (k > 0) {
      double w = twist_value(ps, k - 1, x);
      scale = w * w;
    }
    for (int i = 0; i < f.dim; ++i)
      for (int j = 0; j < f.dim; ++j)
        for (int l = 0; l < f.dim; ++l) {
          double got = out.generic.C[static_cast<size_t>(idx3(n, off + i, off + j, off + l))];
          double want = scale * local.C[static_cast<size_t>(idx3(f.dim, i, j, l))];
          out.max_block_gap = std::max(out.max_block_gap, std::abs(got - want));
        }
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) {
        if (owner[static_cast<size_t>(i)] == owner[static_cast<size_t>(j)] &&
            owner[static_cast<size_t>(j)] == owner[static_cast<size_t>(l)])
          continue;
        out.max_mixed = std::max(
            out.max_mixed, std::abs(out.generic.C[static_cast<size_t>(idx3(n, i, j, l))]));
      }
  return out;
}

inline double cartan_y_residual(const CartanData& c, const Eigen::VectorXd& y) {
  double m = 0.0;
  for (int i = 0; i < c.n; ++i)
    for (int j = 0; j < c.n; ++j) {
      double s = 0.0;
      for (int k = 0; k < c.n; ++k) s += c.C[static_cast<size_t>(idx3(c.n, i, j, k))] * y[k];
      m = std::max(m, std::abs(s));
    }
  return m;
}

// -- homogeneity --------------------------------------------------------------

// Positive rescaling y -> lambda y: the norm scales by lambda, the
// fundamental tensor is invariant, the spray scales by lambda^2.
struct HomogeneityCheck {
  double f_dev = 0.0;
  double g_dev = 0.0;
  double spray_dev = 0.0;

  double max_dev() const { return std::max(f_dev, std::max(g_dev, spray_dev)); }
};

namespace detail {

template <class Obj>
HomogeneityCheck homogeneity_check_impl(const Obj& obj, const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y, double lambda) {
  HomogeneityCheck out;
  Eigen::VectorXd ys = lambda * y;
  double f1 = norm_value(obj, x, y), f2 = norm_value(obj, x, ys);
  out.f_dev = std::abs(f2 - lambda * f1) / std::abs(lambda * f1);
  Eigen::MatrixXd g1 = fundamental_tensor(obj, x, y).g, g2 = fundamental_tensor(obj, x, ys).g;
  out.g_dev = (g2 - g1).cwiseAbs().maxCoeff() / std::max(1.0, g1.cwiseAbs().maxCoeff());
  Eigen::VectorXd s1 = spray_generic(obj, x, y), s2 = spray_generic(obj, x, ys);
  out.spray_dev = (s2 - lambda * lambda * s1).cwiseAbs().maxCoeff() /
                  (lambda * lambda * std::max(1.0, s1.cwiseAbs().maxCoeff()));
  return out;
}

}  // namespace detail

inline HomogeneityCheck homogeneity_check(const FinslerFactor& f, const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& y, double lambda) {
  return detail::homogeneity_check_impl(f, x, y, lambda);
}

inline HomogeneityCheck homogeneity_check(const ProductFinslerSpec& ps, const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& y, double lambda) {
  return detail::homogeneity_check_impl(ps, x, y, lambda);
}

// -- norm validation ----------------------------------------------------------

struct NormCheck {
  int samples = 0;
  double min_norm = 0.0;    // smallest F seen; must stay positive
  double max_euler = 0.0;   // |y^a dF/dy^a - F|
  double max_homog = 0.0;   // worst relative homogeneity deviation

  bool pass(double tol = 1e-8) const { return min_norm > 0.0 && max_euler < tol && max_homog < tol; }
};

inline NormCheck validate_norm(const FinslerFactor& f, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> lam(0.5, 2.0);
  NormCheck out;
  out.samples = samples;
  out.min_norm = std::numeric_limits<double>::infinity();
  auto basis = detail::finsler_basis(f.dim, 0, 1, 1);
  for (int s = 0; s < samples; ++s) {
    auto [x, y] = sample_xy(f, rng);
    detail::FinslerJet J;
    J.n = f.dim;
    J.basis = basis;
    TruncPoly Fp = f.F.eval_poly(detail::factor_seeds(J, f, 0, x, y));
    out.min_norm = std::min(out.min_norm, Fp.value());
    double euler = -Fp.value();
    for (int a = 0; a < f.dim; ++a) euler += y[a] * Fp.d1(J.ys(a));
    out.max_euler = std::max(out.max_euler, std::abs(euler));
    out.max_homog = std::max(out.max_homog, homogeneity_check(f, x, y, lam(rng)).f_dev);
  }
  return out;
}

inline NormCheck validate_norm(const ProductFinslerSpec& ps, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> lam(0.5, 2.0);
  NormCheck out;
  out.samples = samples;
  out.min_norm = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    auto [x, y] = sample_xy(ps, rng);
    double F = norm_value(ps, x, y);
    out.min_norm = std::min(out.min_norm, F);
    double l = lam(rng);
    out.max_homog = std::max(out.max_homog,
                             std::abs(norm_value(ps, x, l * y) - l * F) / (l * F));
  }
  for (int k = 0; k < ps.factors(); ++k) {
    NormCheck fc = validate_norm(ps.factor(k), samples, seed + static_cast<std::uint64_t>(k) + 1);
    out.min_norm = std::min(out.min_norm, fc.min_norm);
    out.max_euler = std::max(out.max_euler, fc.max_euler);
    out.max_homog = std::max(out.max_homog, fc.max_homog);
  }
  return out;
}

// -- structure predicates -----------------------------------------------------

// Sampled structural tests. "holds" means no violation was found on the
// sample set, not a proof; each result keeps the worst sample as witness.
struct PredicateResult {
  std::string name;
  bool holds = true;
  double max_residual = 0.0;
  double tol = 0.0;
  Eigen::VectorXd witness_x;
  Eigen::VectorXd witness_y;
};

struct StructureReport {
  int samples = 0;
  std::vector<PredicateResult> results;

  const PredicateResult* find(const std::string& name) const {
    for (const auto& r : results)
      if (r.name == name) return &r;
    return nullptr;
  }
};

namespace detail {

struct ResidualTracker {
  PredicateResult r;

  explicit ResidualTracker(std::string name, double tol) {
    r.name = std::move(name);
    r.tol = tol;
  }

  void feed(double v, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    v = std::abs(v);
    if (v >= r.max_residual) {
      r.max_residual = v;
      r.witness_x = x;
      r.witness_y = y;
    }
  }

  PredicateResult done() {
    r.holds = r.max_residual < r.tol;
    return r;
  }
};

// Trace and full forms of the coupling between the base direction jets and a
// base-position twist gradient: contributions that obstruct the product from
// being (weakly) Berwald when the base norm is not Riemannian.
struct BaseCoupling {
  double full = 0.0;   // max over k, q of d(g0inv^{ks})/dy^q * df2/dx0^s
  double trace = 0.0;  // max over s-contracted trace d(g0inv^{ks})/dy^k * df2/dx0^s
};

inline BaseCoupling base_coupling(const std::vector<TruncPoly>& g0invp, const FinslerJet& J0,
                                  const Eigen::VectorXd& df2_dx0) {
  BaseCoupling out;
  int m = J0.n;
  for (int k = 0; k < m; ++k)
    for (int q = 0; q < m; ++q) {
      double s = 0.0;
      for (int r = 0; r < m; ++r)
        s += g0invp[static_cast<size_t>(k * m + r)].d1(J0.ys(q)) * df2_dx0[r];
      out.full = std::max(out.full, std::abs(s));
    }
  double tr = 0.0;
  for (int r = 0; r < m; ++r) {
    double s = 0.0;
    for (int k = 0; k < m; ++k) s += g0invp[static_cast<size_t>(k * m + r)].d1(J0.ys(k)) * df2_dx0[r];
    tr += s;
  }
  out.trace = std::abs(tr);
  return out;
}

inline double dually_flat_residual(const FinslerJet& J, const Eigen::VectorXd& y) {
  double m = 0.0;
  for (int l = 0; l < J.n; ++l) {
    double s = -2.0 * J.F2.d1(J.xs(l));
    for (int k = 0; k < J.n; ++k) s += J.F2.d2(J.xs(k), J.ys(l)) * y[k];
    m = std::max(m, std::abs(s));
  }
  return m;
}

// Squared-norm jet of a twisted fiber (f_l F_l) with the base position frozen.
inline FinslerJet scaled_fiber_f2_jet(const ProductFinslerSpec& ps, int l, const Eigen::VectorXd& x0,
                                      const Eigen::VectorXd& xl, const Eigen::VectorXd& yl,
                                      int xcap, int ycap, int order) {
  const FinslerFactor& f = ps.fibers[static_cast<size_t>(l)];
  FinslerJet J;
  J.n = f.dim;
  J.basis = finsler_basis(J.n, xcap, ycap, order);
  TruncPoly Fl = f.F.eval_poly(factor_seeds(J, f, 0, xl, yl));
  std::vector<TruncPoly> tw_seeds;
  for (int a = 0; a < ps.base.dim; ++a) tw_seeds.push_back(TruncPoly::constant(J.basis, x0[a]));
  for (int a = 0; a < f.dim; ++a) tw_seeds.push_back(TruncPoly::variable(J.basis, J.xs(a), xl[a]));
  TruncPoly tw = ps.twists[static_cast<size_t>(l)].eval_poly(tw_seeds);
  if (!(tw.value() > 0.0)) throw PositivityLoss("twist not positive at sample: " + f.name);
  J.F2 = (tw * tw) * (Fl * Fl);
  return J;
}

}  // namespace detail

inline StructureReport structure_predicates(const ProductFinslerSpec& ps, int samples,
                                            std::uint64_t seed, double tol = 1e-8) {
  using detail::ResidualTracker;
  std::mt19937_64 rng(seed);
  int nf = static_cast<int>(ps.fibers.size());

  std::vector<ResidualTracker> riem, mink;
  for (int k = 0; k < ps.factors(); ++k) {
    riem.emplace_back("riemannian." + ps.factor(k).name, tol);
    mink.emplace_back("minkowski.x_independent." + ps.factor(k).name, tol);
  }
  ResidualTracker berwald_base("berwald.base", tol);
  std::vector<ResidualTracker> couple, trace, balance, dflat_scaled, tw_indep;
  for (int l = 0; l < nf; ++l) {
    const std::string& fn = ps.fibers[static_cast<size_t>(l)].name;
    couple.emplace_back("berwald.base_coupling." + fn, tol);
    trace.emplace_back("weak_berwald.base_trace." + fn, tol);
    balance.emplace_back("weak_berwald.balance." + fn, tol);
    dflat_scaled.emplace_back("dually_flat.scaled." + fn, tol);
    tw_indep.emplace_back("twist.base_independent." + fn, tol);
  }
  ResidualTracker dflat_base("dually_flat.base", tol);
  ResidualTracker dflat_prod("dually_flat.product", tol);

  for (int s = 0; s < samples; ++s) {
    auto [x, y] = sample_xy(ps, rng);
    int m0 = ps.base.dim;
    Eigen::VectorXd x0 = x.segment(0, m0), y0 = y.segment(0, m0);

    for (int k = 0; k < ps.factors(); ++k) {
      const FinslerFactor& f = ps.factor(k);
      int off = ps.offset(k);
      Eigen::VectorXd xk = x.segment(off, f.dim), yk = y.segment(off, f.dim);
      riem[static_cast<size_t>(k)].feed(cartan_generic(f, xk, yk).max_abs(), x, y);
      auto Jx = detail::factor_f2_jet(f, xk, yk, 1, 1, 2);
      double dx = 0.0;
      for (int a = 0; a < f.dim; ++a) dx = std::max(dx, std::abs(Jx.F2.d1(Jx.xs(a))));
      mink[static_cast<size_t>(k)].feed(dx, x, y);
      if (k == 0) {
        BerwaldData b0 = berwald_tensors(f, xk, yk);
        double m = 0.0;
        for (double v : b0.B) m = std::max(m, std::abs(v));
        berwald_base.feed(m, x, y);
        dflat_base.feed(detail::dually_flat_residual(detail::factor_f2_jet(f, xk, yk, 1, 1, 2), yk),
                        x, y);
      }
    }

    dflat_prod.feed(
        detail::dually_flat_residual(detail::product_f2_jet(ps, x, y, 1, 1, 2), y), x, y);

    auto J0 = detail::factor_f2_jet(ps.base, x0, y0, 0, 3, 3);
    std::vector<TruncPoly> g0invp;
    try {
      g0invp = poly_matrix_inverse(detail::fundamental_polys(J0), m0);
    } catch (const DomainError&) {
      throw DegenerateFundamentalTensor("fundamental tensor singular: " + ps.base.name);
    }

    for (int l = 0; l < nf; ++l) {
      const FinslerFactor& f = ps.fibers[static_cast<size_t>(l)];
      int off = ps.offset(l + 1), m = f.dim;
      Eigen::VectorXd xl = x.segment(off, m), yl = y.segment(off, m);

      auto basis1 = PolyBasis::get(m0 + m, 1);
      std::vector<TruncPoly> seeds;
      for (int a = 0; a < m0; ++a) seeds.push_back(TruncPoly::variable(basis1, a, x0[a]));
      for (int a = 0; a < m; ++a) seeds.push_back(TruncPoly::variable(basis1, m0 + a, xl[a]));
      TruncPoly tw = ps.twists[static_cast<size_t>(l)].eval_poly(seeds);
      if (!(tw.value() > 0.0)) throw PositivityLoss("twist not positive at sample: " + f.name);
      TruncPoly f2 = tw * tw;
      double f2v = f2.value();
      Eigen::VectorXd df2_dx0(m0), df2_dxl(m);
      for (int a = 0; a < m0; ++a) df2_dx0[a] = f2.d1(a);
      for (int a = 0; a < m; ++a) df2_dxl[a] = f2.d1(m0 + a);
      tw_indep[static_cast<size_t>(l)].feed(df2_dx0.cwiseAbs().maxCoeff(), x, y);

      auto cpl = detail::base_coupling(g0invp, J0, df2_dx0);
      couple[static_cast<size_t>(l)].feed(cpl.full, x, y);
      trace[static_cast<size_t>(l)].feed(cpl.trace, x, y);

      auto Jl = detail::factor_f2_jet(f, xl, yl, 0, 5, 5);
      std::vector<TruncPoly> glinvp;
      try {
        glinvp = poly_matrix_inverse(detail::fundamental_polys(Jl), m);
      } catch (const DomainError&) {
        throw DegenerateFundamentalTensor("fundamental tensor singular: " + f.name);
      }
      BerwaldData bl = berwald_tensors(f, xl, yl);
      double worst = 0.0;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          double rhs = 0.0;
          for (int b = 0; b < m; ++b) {
            if (df2_dxl[b] == 0.0) continue;
            for (int k = 0; k < m; ++k) {
              TruncPoly P = glinvp[static_cast<size_t>(k * m + b)] * Jl.F2;
              rhs += df2_dxl[b] * P.d3(Jl.ys(i), Jl.ys(j), Jl.ys(k));
            }
          }
          worst = std::max(worst, std::abs(bl.E(i, j) - rhs / (8.0 * f2v)));
        }
      balance[static_cast<size_t>(l)].feed(worst, x, y);

      dflat_scaled[static_cast<size_t>(l)].feed(
          detail::dually_flat_residual(detail::scaled_fiber_f2_jet(ps, l, x0, xl, yl, 1, 1, 2), yl),
          x, y);
    }
  }

  StructureReport rep;
  rep.samples = samples;
  for (auto& t : riem) rep.results.push_back(t.done());
  rep.results.push_back(berwald_base.done());
  for (auto& t : couple) rep.results.push_back(t.done());
  for (auto& t : trace) rep.results.push_back(t.done());
  for (auto& t : balance) rep.results.push_back(t.done());
  rep.results.push_back(dflat_base.done());
  rep.results.push_back(dflat_prod.done());
  for (auto& t : dflat_scaled) rep.results.push_back(t.done());
  for (auto& t : tw_indep) rep.results.push_back(t.done());
  for (auto& t : mink) rep.results.push_back(t.done());
  return rep;
}

// -- model factors ------------------------------------------------------------

namespace detail {

inline std::vector<std::string> coord_names(const std::string& stem, const char* kind, int dim) {
  std::vector<std::string> v;
  for (int a = 1; a <= dim; ++a) v.push_back(stem + kind + std::to_string(a));
  return v;
}

inline Eigen::MatrixX2d unit_box(int dim) {
  Eigen::MatrixX2d b(dim, 2);
  for (int a = 0; a < dim; ++a) {
    b(a, 0) = -1.0;
    b(a, 1) = 1.0;
  }
  return b;
}

}  // namespace detail

// Flat Riemannian norm sqrt(sum y_a^2).
inline FinslerFactor euclidean_factor(const std::string& stem, int dim) {
  auto yn = detail::coord_names(stem, "y", dim);
  std::string src = "sqrt(";
  for (int a = 0; a < dim; ++a) src += (a ? "+" : "") + yn[static_cast<size_t>(a)] + "^2";
  src += ")";
  return finsler_factor(stem, detail::coord_names(stem, "x", dim), yn, src,
                        detail::unit_box(dim));
}

// Quartic-mean norm (sum y_a^4)^(1/4); non-Riemannian for dim >= 2, smooth and
// strongly convex away from the coordinate axes.
inline FinslerFactor quartic_factor(const std::string& stem, int dim) {
  auto yn = detail::coord_names(stem, "y", dim);
  std::string src = "(";
  for (int a = 0; a < dim; ++a) src += (a ? "+" : "") + yn[static_cast<size_t>(a)] + "^4";
  src += ")^0.25";
  return finsler_factor(stem, detail::coord_names(stem, "x", dim), yn, src,
                        detail::unit_box(dim));
}

// Flat norm plus a constant drift one-form: sqrt(sum y^2) + sum b_a y_a with
// |b| < 1; non-Riemannian whenever b != 0.
inline FinslerFactor randers_factor(const std::string& stem, int dim,
                                    const Eigen::VectorXd& drift) {
  if (drift.size() != dim) throw DimensionError("randers_factor: drift size mismatch");
  if (drift.norm() >= 1.0) throw PreconditionError("randers_factor: need |drift| < 1");
  auto yn = detail::coord_names(stem, "y", dim);
  std::string src = "sqrt(";
  for (int a = 0; a < dim; ++a) src += (a ? "+" : "") + yn[static_cast<size_t>(a)] + "^2";
  src += ")";
  for (int a = 0; a < dim; ++a)
    src += "+" + detail::fmt(drift[a]) + "*" + yn[static_cast<size_t>(a)];
  return finsler_factor(stem, detail::coord_names(stem, "x", dim), yn, src,
                        detail::unit_box(dim));
}

// Riemannian norm sqrt(g_ij(x) y^i y^j) from row-major metric entry sources
// written over the position coordinates.
inline FinslerFactor riemannian_factor(const std::string& stem, int dim,
                                       const std::vector<std::string>& entries,
                                       Eigen::MatrixX2d xbox) {
  if (entries.size() != static_cast<size_t>(dim * dim))
    throw DimensionError("riemannian_factor: need dim*dim entries");
  auto xn = detail::coord_names(stem, "x", dim);
  auto yn = detail::coord_names(stem, "y", dim);
  std::string src = "sqrt(";
  bool first = true;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      src += (first ? "(" : "+(") + entries[static_cast<size_t>(i * dim + j)] + ")*" +
             yn[static_cast<size_t>(i)] + "*" + yn[static_cast<size_t>(j)];
      first = false;
    }
  src += ")";
  return finsler_factor(stem, xn, yn, src, std::move(xbox));
}

}  // namespace twistgeo
