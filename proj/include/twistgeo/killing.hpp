#pragma once

// Lie derivatives of the product metric, Killing and conformal-Killing
// residuals, and closed-form isometry families on model charts (a flat
// Lorentzian plane or a single time axis over flat fibers).  The primary
// evaluator is the generic coordinate formula
//   (L_K g)_ab = K^c d_c g_ab + g_cb d_a K^c + g_ac d_b K^c;
// for single-factor fields the product-rule split is computed independently
// and returned alongside it.

#include "twistgeo/chart.hpp"
#include "twistgeo/oracle.hpp"
#include "twistgeo/srcfmt.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace twistgeo {

// A component is dead when it binds no coordinate and evaluates to zero.
inline bool zero_component(const Expr& e, int n) {
  if (e.uses_any(0, n)) return false;
  return e.eval(Eigen::VectorXd::Zero(n)) == 0.0;
}

// Blocks carrying live components: 0 = shared factor, 1 + i = scaled factor i.
inline std::vector<int> field_support(const ProductSpec& s, const VectorFieldSpec& K) {
  int n = s.total_dim();
  if (static_cast<int>(K.components.size()) != n)
    throw DimensionError("field '" + K.name + "': " + std::to_string(K.components.size()) +
                         " components for a " + std::to_string(n) + "-dimensional chart");
  std::vector<int> blocks;
  for (int b = 0; b <= s.num_fibers(); ++b) {
    int off = s.block_offset(b), d = s.block_dim(b);
    for (int k = off; k < off + d; ++k)
      if (!zero_component(K.components[k], n)) {
        blocks.push_back(b);
        break;
      }
  }
  return blocks;
}

namespace detail {

// Lie derivative of one metric block from jets.  gp holds the d*d block
// entries (local index i*d+j) differentiated in global slots; Kp holds the
// field components at global positions.  off = first global slot of the block.
inline Eigen::MatrixXd lie_block(const std::vector<TruncPoly>& gp,
                                 const std::vector<TruncPoly>& Kp, int off, int d) {
  Eigen::MatrixXd L(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      double v = 0.0;
      for (int c = 0; c < d; ++c) {
        v += Kp[static_cast<size_t>(off + c)].value() * gp[static_cast<size_t>(i * d + j)].d1(off + c);
        v += gp[static_cast<size_t>(c * d + j)].value() * Kp[static_cast<size_t>(off + c)].d1(off + i);
        v += gp[static_cast<size_t>(i * d + c)].value() * Kp[static_cast<size_t>(off + c)].d1(off + j);
      }
      L(i, j) = v;
      L(j, i) = v;
    }
  return L;
}

// Factor metric entries as jets in the global variables.
inline std::vector<TruncPoly> factor_poly_global(const ProductSpec& s, int block,
                                                 const std::shared_ptr<const PolyBasis>& basis,
                                                 const Eigen::VectorXd& x) {
  const std::vector<Expr>& entries =
      block == 0 ? s.base.metric : s.fibers[static_cast<size_t>(block - 1)].metric;
  auto seeds = seed_slots(basis, block == 0 ? base_slots(s) : fiber_slots(s, block - 1), x);
  std::vector<TruncPoly> out;
  out.reserve(entries.size());
  for (const Expr& e : entries) out.push_back(e.eval_poly(seeds));
  return out;
}

inline std::vector<TruncPoly> field_poly(const ProductSpec& s, const VectorFieldSpec& K,
                                         const std::shared_ptr<const PolyBasis>& basis,
                                         const Eigen::VectorXd& x) {
  int n = s.total_dim();
  std::vector<int> all(static_cast<size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  auto seeds = seed_slots(basis, all, x);
  std::vector<TruncPoly> Kp;
  Kp.reserve(static_cast<size_t>(n));
  for (const Expr& e : K.components) Kp.push_back(e.eval_poly(seeds));
  return Kp;
}

inline Eigen::MatrixXd lie_generic(const ProductSpec& s, const VectorFieldSpec& K,
                                   const Eigen::VectorXd& x, int order) {
  int n = s.total_dim();
  auto basis = PolyBasis::get(n, order);
  return lie_block(metric_poly(s, x, order), field_poly(s, K, basis, x), 0, n);
}

}  // namespace detail

struct LieDerivative {
  Eigen::MatrixXd generic;
  bool has_structured = false;  // single-factor field over its own coordinates
  int block = -1;               // 0 shared factor, 1 + i scaled factor i
  Eigen::MatrixXd structured;   // factor Lie term plus scale transport term
  double split_gap = 0.0;       // max |generic - structured|
};

inline LieDerivative lie_derivative_metric(const ProductSpec& s, const VectorFieldSpec& K,
                                           const Eigen::VectorXd& x, int order = 2) {
  int n = s.total_dim();
  order = std::max(order, 2);
  auto basis = PolyBasis::get(n, order);
  auto Kp = detail::field_poly(s, K, basis, x);

  LieDerivative out;
  out.generic = detail::lie_block(metric_poly(s, x, order), Kp, 0, n);

  auto sup = field_support(s, K);
  if (sup.size() != 1) return out;
  int b = sup[0];
  int off = s.block_offset(b), d = s.block_dim(b);
  for (int k = off; k < off + d; ++k)
    if (K.components[static_cast<size_t>(k)].uses_any(0, off) ||
        K.components[static_cast<size_t>(k)].uses_any(off + d, n))
      return out;  // coefficients leave the factor: no clean split

  out.has_structured = true;
  out.block = b;
  out.structured = Eigen::MatrixXd::Zero(n, n);
  if (b == 0) {
    // Shared-factor field: own-block Lie derivative, plus X(b_i^2) g_i on
    // every scaled block.
    auto gB = detail::factor_poly_global(s, 0, basis, x);
    out.structured.topLeftCorner(d, d) = detail::lie_block(gB, Kp, 0, d);
    for (int i = 0; i < s.num_fibers(); ++i) {
      TruncPoly w = warp_poly(s, i, basis, x);
      TruncPoly b2 = w * w;
      double Xb2 = 0.0;
      for (int c = 0; c < d; ++c) Xb2 += Kp[static_cast<size_t>(c)].value() * b2.d1(c);
      int fo = s.fiber_offset(i), fd = s.fibers[static_cast<size_t>(i)].dim;
      out.structured.block(fo, fo, fd, fd) = Xb2 * fiber_metric_value(s, i, x);
    }
  } else {
    // Scaled-factor field: b^2 L_U g_F plus U(b^2) g_F on the carrying block.
    int i = b - 1;
    auto gF = detail::factor_poly_global(s, b, basis, x);
    Eigen::MatrixXd LF = detail::lie_block(gF, Kp, off, d);
    Eigen::MatrixXd gFv(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) gFv(r, c) = gF[static_cast<size_t>(r * d + c)].value();
    TruncPoly w = warp_poly(s, i, basis, x);
    TruncPoly b2 = w * w;
    double Ub2 = 0.0;
    for (int c = 0; c < d; ++c) Ub2 += Kp[static_cast<size_t>(off + c)].value() * b2.d1(off + c);
    out.structured.block(off, off, d, d) = b2.value() * LF + Ub2 * gFv;
  }
  out.split_gap = (out.generic - out.structured).cwiseAbs().maxCoeff();
  return out;
}

struct KillingResidual {
  double max_abs = 0.0;
  Eigen::VectorXd worst_point;
};

inline KillingResidual killing_residual(const ProductSpec& s, const VectorFieldSpec& K,
                                        const Eigen::MatrixXd& grid) {
  KillingResidual r;
  for (Eigen::Index p = 0; p < grid.rows(); ++p) {
    Eigen::VectorXd x = grid.row(p);
    double v = detail::lie_generic(s, K, x, 2).cwiseAbs().maxCoeff();
    if (p == 0 || v > r.max_abs) {
      r.max_abs = v;
      r.worst_point = x;
    }
  }
  return r;
}

// ---- conformal factors -------------------------------------------------------

struct ConformalCheck {
  bool is_conformal = false;
  double max_dev = 0.0;   // worst |L_U g_F - 2 sigma g_F| over the grid
  Eigen::VectorXd sigma;  // per-point trace estimate: tr(g_F^-1 L_U g_F) / (2 dim)
  Eigen::VectorXd worst_point;
};

inline ConformalCheck conformal_factor_check(const ProductSpec& s, const VectorFieldSpec& U,
                                             int fiber, const Eigen::MatrixXd& grid,
                                             double tol = 1e-8) {
  int n = s.total_dim();
  auto sup = field_support(s, U);
  if (sup.size() != 1 || sup[0] != fiber + 1)
    throw PreconditionError("conformal check: field '" + U.name +
                            "' must live in the named scaled factor");
  int off = s.fiber_offset(fiber), d = s.fibers[static_cast<size_t>(fiber)].dim;
  for (int k = off; k < off + d; ++k)
    if (U.components[static_cast<size_t>(k)].uses_any(0, off) ||
        U.components[static_cast<size_t>(k)].uses_any(off + d, n))
      throw PreconditionError("conformal check: components of '" + U.name +
                              "' must depend only on their factor's coordinates");

  auto basis = PolyBasis::get(n, 2);
  ConformalCheck out;
  out.sigma.resize(grid.rows());
  for (Eigen::Index p = 0; p < grid.rows(); ++p) {
    Eigen::VectorXd x = grid.row(p);
    auto gF = detail::factor_poly_global(s, fiber + 1, basis, x);
    auto Up = detail::field_poly(s, U, basis, x);
    Eigen::MatrixXd LF = detail::lie_block(gF, Up, off, d);
    Eigen::MatrixXd gFv(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) gFv(r, c) = gF[static_cast<size_t>(r * d + c)].value();
    double sg = (gFv.inverse() * LF).trace() / (2.0 * d);
    double dev = (LF - 2.0 * sg * gFv).cwiseAbs().maxCoeff();
    out.sigma[p] = sg;
    if (p == 0 || dev > out.max_dev) {
      out.max_dev = dev;
      out.worst_point = x;
    }
  }
  out.is_conformal = out.max_dev < tol;
  return out;
}

// For K = X + U to be an isometry the factor's conformal rate must equal
// -(X(b^2) + U(b^2)) / b^2; returns the worst |2 sigma + (X(b^2)+U(b^2))/b^2|.
inline double conformal_embedding_gap(const ProductSpec& s, const VectorFieldSpec& X,
                                      const VectorFieldSpec& U, int fiber,
                                      const Eigen::MatrixXd& grid) {
  int n = s.total_dim();
  auto sup = field_support(s, X);
  if (sup.size() != 1 || sup[0] != 0)
    throw PreconditionError("embedding gap: '" + X.name + "' must live in the shared factor");
  ConformalCheck cc = conformal_factor_check(s, U, fiber, grid,
                                             std::numeric_limits<double>::infinity());
  int off = s.fiber_offset(fiber), d = s.fibers[static_cast<size_t>(fiber)].dim;
  auto basis = PolyBasis::get(n, 2);
  double worst = 0.0;
  for (Eigen::Index p = 0; p < grid.rows(); ++p) {
    Eigen::VectorXd x = grid.row(p);
    auto Xp = detail::field_poly(s, X, basis, x);
    auto Up = detail::field_poly(s, U, basis, x);
    TruncPoly w = warp_poly(s, fiber, basis, x);
    TruncPoly b2 = w * w;
    double rate = 0.0;
    for (int c = 0; c < s.base.dim; ++c) rate += Xp[static_cast<size_t>(c)].value() * b2.d1(c);
    for (int c = 0; c < d; ++c) rate += Up[static_cast<size_t>(off + c)].value() * b2.d1(off + c);
    worst = std::max(worst, std::abs(2.0 * cc.sigma[p] + rate / b2.value()));
  }
  return worst;
}

// ---- auxiliary second-order conditions ----------------------------------------

// max-norm of Hess_F mu + C mu g_F on the grid; mu is an expression over the
// factor's own coordinates.
inline double hessian_condition_residual(const ProductSpec& s, int fiber, const Expr& mu,
                                         double C, const Eigen::MatrixXd& grid) {
  const FiberSpec& F = s.fibers[static_cast<size_t>(fiber)];
  int l = F.dim;
  auto basis = PolyBasis::get(l, 2);
  double worst = 0.0;
  for (Eigen::Index p = 0; p < grid.rows(); ++p) {
    Eigen::VectorXd xF = fiber_slice(s, fiber, grid.row(p));
    auto gFp = factor_metric_poly(F.metric, l, xF, 2);
    OracleData od = oracle_from_metric_poly(gFp, l);
    std::vector<TruncPoly> seeds;
    seeds.reserve(static_cast<size_t>(l));
    for (int j = 0; j < l; ++j) seeds.push_back(TruncPoly::variable(basis, j, xF[j]));
    TruncPoly mp = mu.eval_poly(seeds);
    for (int j = 0; j < l; ++j)
      for (int k = j; k < l; ++k) {
        double hess = mp.d2(j, k);
        for (int m = 0; m < l; ++m) hess -= od.gamma[idx3(l, m, j, k)].value() * mp.d1(m);
        worst = std::max(worst, std::abs(hess + C * mp.value() * od.g(j, k)));
      }
  }
  return worst;
}

struct CurlReport {
  double max_curl = 0.0;   // orthonormal-frame components of dK^flat
  double max_nabla = 0.0;  // coordinate components of nabla K
  bool is_parallel = false;
  Eigen::VectorXd worst_point;  // where max_curl is attained
};

// curl K(X,Y) = g(nabla_X K, Y) - g(nabla_Y K, X); a field is non-rotating
// when this vanishes, and that forces it to be parallel.
inline CurlReport curl_and_nonrotating(const ProductSpec& s, const VectorFieldSpec& K,
                                       const Eigen::MatrixXd& grid, double tol = 1e-8) {
  int n = s.total_dim();
  auto basis = PolyBasis::get(n, 2);
  CurlReport out;
  for (Eigen::Index p = 0; p < grid.rows(); ++p) {
    Eigen::VectorXd x = grid.row(p);
    OracleData od = lc_oracle(s, x, 2);
    auto Kp = detail::field_poly(s, K, basis, x);
    Eigen::VectorXd Kv(n);
    for (int c = 0; c < n; ++c) Kv[c] = Kp[static_cast<size_t>(c)].value();
    Eigen::MatrixXd nab(n, n);  // nab(a,c) = nabla_a K^c
    for (int a = 0; a < n; ++a)
      for (int c = 0; c < n; ++c) {
        double v = Kp[static_cast<size_t>(c)].d1(a);
        for (int b = 0; b < n; ++b) v += od.gamma[idx3(n, c, a, b)].value() * Kv[b];
        nab(a, c) = v;
      }
    Eigen::MatrixXd low = nab * od.g;  // low(a,b) = nabla_a K_b
    Eigen::MatrixXd curl = low - low.transpose();
    Frame fr = orthonormal_frame(od.g);
    double cm = (fr.E.transpose() * curl * fr.E).cwiseAbs().maxCoeff();
    if (p == 0 || cm > out.max_curl) {
      out.max_curl = cm;
      out.worst_point = x;
    }
    out.max_nabla = std::max(out.max_nabla, nab.cwiseAbs().maxCoeff());
  }
  out.is_parallel = out.max_nabla < tol;
  return out;
}

// ---- separation-constant profile -----------------------------------------------

struct CfProfile {
  Eigen::VectorXd values;  // (f'/(f f1))' f^2/f1 along the first coordinate
  double mean = 0.0;
  double variance = 0.0;
  double max_dev = 0.0;
};

// Every isometry family over a one-axis shared factor forces this quantity to
// a constant; the profile makes that measurable.  f is the first scale
// function, f1 = sqrt(-g_00).  Remaining coordinates sit at the box midpoint.
inline CfProfile cf_profile(const ProductSpec& s, int tpts = 21) {
  if (s.num_fibers() < 1) throw PreconditionError("cf profile: needs a scaled factor");
  if (tpts < 2) throw PreconditionError("cf profile: needs at least two samples");
  int n = s.total_dim();
  auto basis = PolyBasis::get(n, 2);
  CfProfile out;
  out.values.resize(tpts);
  Eigen::VectorXd x(n);
  for (int j = 0; j < n; ++j) x[j] = 0.5 * (s.domain_box(j, 0) + s.domain_box(j, 1));
  for (int k = 0; k < tpts; ++k) {
    x[0] = s.domain_box(0, 0) +
           (s.domain_box(0, 1) - s.domain_box(0, 0)) * k / static_cast<double>(tpts - 1);
    TruncPoly f = warp_poly(s, 0, basis, x);
    TruncPoly gtt = s.base.metric[0].eval_poly(seed_slots(basis, base_slots(s), x));
    if (!(gtt.value() < 0.0)) throw SignatureError("cf profile: g_00 must be timelike");
    double f1 = std::sqrt(-gtt.value());
    double f1p = -gtt.d1(0) / (2.0 * f1);
    double fv = f.value(), fp = f.d1(0), fpp = f.d2(0, 0);
    out.values[k] =
        (fpp / (fv * f1) - fp * (fp * f1 + fv * f1p) / ((fv * f1) * (fv * f1))) * fv * fv / f1;
  }
  out.mean = out.values.mean();
  out.variance = (out.values.array() - out.mean).square().sum() / tpts;
  out.max_dev = (out.values.array() - out.mean).abs().maxCoeff();
  return out;
}

// ---- field construction ---------------------------------------------------------

inline VectorFieldSpec make_field(const ProductSpec& s, const std::string& name,
                                  const std::vector<std::string>& comps) {
  int n = s.total_dim();
  if (static_cast<int>(comps.size()) != n)
    throw DimensionError("field '" + name + "': " + std::to_string(comps.size()) +
                         " components for a " + std::to_string(n) + "-dimensional chart");
  VectorFieldSpec K;
  K.name = name;
  auto scope = s.all_coords();
  for (const std::string& src : comps) K.components.push_back(Expr::parse(src, scope));
  return K;
}

inline VectorFieldSpec scale_field(const ProductSpec& s, const VectorFieldSpec& K, double c) {
  VectorFieldSpec out;
  out.name = K.name + "_scaled";
  auto scope = s.all_coords();
  for (const Expr& e : K.components)
    out.components.push_back(Expr::parse(detail::fmt(c) + "*(" + e.source() + ")", scope));
  return out;
}

// Five deterministic symmetry breakers over the chart's own coordinates; each
// fails the Killing equation visibly on any of the family charts below.
inline std::vector<VectorFieldSpec> non_killing_library(const ProductSpec& s) {
  int n = s.total_dim();
  auto coords = s.all_coords();
  auto blank = [&] { return std::vector<std::string>(static_cast<size_t>(n), "0"); };
  std::vector<VectorFieldSpec> lib;

  auto c = blank();
  c[0] = coords[0];  // radial stretch along the first axis
  lib.push_back(make_field(s, "stretch_" + coords[0], c));

  c = blank();
  c[static_cast<size_t>(n - 1)] = coords[0] + "^2";  // quadratic shear into the last axis
  lib.push_back(make_field(s, "shear_quadratic", c));

  c = blank();
  c[0] = "sin(" + coords[0] + ")";  // compressive wave along the first axis
  lib.push_back(make_field(s, "wave_" + coords[0], c));

  size_t fo = static_cast<size_t>(s.fiber_offset(0));
  c = blank();
  c[fo] = coords[fo];  // radial stretch inside the first scaled factor
  lib.push_back(make_field(s, "stretch_" + coords[fo], c));

  c = blank();
  c[0] = coords[1];  // one-sided shear (half of a rotation/boost pair)
  lib.push_back(make_field(s, "halfshear_" + coords[1], c));
  return lib;
}

// ---- closed-form isometry families ----------------------------------------------

struct KillingFamily {
  ProductSpec spec;
  VectorFieldSpec field;
  double cf_constant = std::numeric_limits<double>::quiet_NaN();
  std::string note;
};

namespace detail {

inline ProductSpec plane_base_spec() {
  ProductSpec s;
  s.base.dim = 2;
  s.base.coords = {"t", "s"};
  s.base.metric = {Expr::parse("-1", s.base.coords), Expr::parse("0", s.base.coords),
                   Expr::parse("0", s.base.coords), Expr::parse("1", s.base.coords)};
  s.base.signature = {-1, 1};
  return s;
}

inline void push_flat_fiber(ProductSpec& s, int dim, const std::string& warp_src) {
  FiberSpec F;
  F.name = "F";
  F.dim = dim;
  F.coords = dim == 1 ? std::vector<std::string>{"x"} : std::vector<std::string>{"x", "y"};
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      F.metric.push_back(Expr::parse(i == j ? "1" : "0", F.coords));
  std::vector<std::string> scope = s.base.coords;
  scope.insert(scope.end(), F.coords.begin(), F.coords.end());
  s.fibers.push_back(F);
  s.warps.push_back(WarpFn{Expr::parse(warp_src, scope)});
}

inline void box_fill(ProductSpec& s, double blo, double bhi, double flo, double fhi) {
  int n = s.total_dim();
  s.domain_box.resize(n, 2);
  for (int j = 0; j < n; ++j) {
    bool base = j < s.base.dim;
    s.domain_box(j, 0) = base ? blo : flo;
    s.domain_box(j, 1) = base ? bhi : fhi;
  }
}

}  // namespace detail

// Constant scale l0 over a flat Lorentzian plane: the boost coefficient k0
// couples the axis translations, the fiber receives the transported gradient
// of the linear potential alpha.y + beta plus its own isometry (translations,
// and a rotation when 2-dimensional).
inline KillingFamily const_warp_killing_family(double l0, double k0, double kbar0,
                                               const Eigen::VectorXd& alpha, double beta,
                                               const Eigen::VectorXd& trans, double rot,
                                               double t0 = 0.0) {
  using detail::fmt;
  int fdim = static_cast<int>(alpha.size());
  if (fdim < 1 || fdim > 2 || trans.size() != alpha.size())
    throw DimensionError("constant-scale family: potential/translation size must be 1 or 2");
  if (!(l0 > 0.0)) throw PreconditionError("constant-scale family: l0 must be positive");

  KillingFamily fam;
  fam.spec = detail::plane_base_spec();
  detail::push_flat_fiber(fam.spec, fdim, fmt(l0));
  detail::box_fill(fam.spec, -0.9, 0.9, -1.0, 1.0);

  const auto& yc = fam.spec.fibers[0].coords;
  std::string mu1 = fmt(beta);
  for (int j = 0; j < fdim; ++j) mu1 += "+" + fmt(alpha[j]) + "*" + yc[static_cast<size_t>(j)];
  std::vector<std::string> comps;
  comps.push_back("(" + mu1 + ")+" + fmt(k0) + "*s");
  comps.push_back(fmt(kbar0) + "+" + fmt(k0) + "*t");
  for (int j = 0; j < fdim; ++j) {
    std::string grad = fmt(alpha[j] / (l0 * l0)) + "*(t-" + fmt(t0) + ")";
    std::string own = fmt(trans[j]);
    if (fdim == 2)
      own += (j == 0 ? "-" : "+") + fmt(rot) + "*" + yc[static_cast<size_t>(1 - j)];
    comps.push_back(grad + "+" + own);
  }
  fam.field = make_field(fam.spec, "const_warp_killing", comps);
  fam.cf_constant = 0.0;
  fam.note = "constant scale " + fmt(l0) + ", boost rate " + fmt(k0);
  return fam;
}

// Linear scale A t + B over a flat Lorentzian plane.  mu1, mu3 are
// exponential potentials c1 e^{A x} + c2 e^{-A x} on a 1-dimensional flat
// fiber (so Hess mu = A^2 mu g); the boost multiplier mu3 rides the s-axis
// with the pinned offset B/A: the st-shear equation leaves
// (L_K g)_sx = mu3'(x) (lambda - B/A), so the offset is forced, not free.
inline KillingFamily linear_warp_killing_family(double A, double B, const Eigen::Vector2d& mu1c,
                                                const Eigen::Vector2d& mu3c, double lambda_tilde,
                                                double Tc) {
  using detail::fmt;
  if (A == 0.0) throw PreconditionError("linear-scale family: A must be nonzero");
  if (!(B > 0.0 && A + B > 0.0))
    throw PreconditionError("linear-scale family: scale must stay positive on [0,1]");

  KillingFamily fam;
  fam.spec = detail::plane_base_spec();
  detail::push_flat_fiber(fam.spec, 1, fmt(A) + "*t+" + fmt(B));
  detail::box_fill(fam.spec, 0.0, 1.0, -1.0, 1.0);
  fam.spec.domain_box(1, 0) = -1.0;  // s-axis keeps the wider span
  fam.spec.domain_box(1, 1) = 1.0;

  auto pot = [&](const Eigen::Vector2d& c) {
    return fmt(c[0]) + "*exp(" + fmt(A) + "*x)+" + fmt(c[1]) + "*exp(" + fmt(-A) + "*x)";
  };
  auto dpot = [&](const Eigen::Vector2d& c) {
    return fmt(c[0] * A) + "*exp(" + fmt(A) + "*x)+" + fmt(-c[1] * A) + "*exp(" + fmt(-A) +
           "*x)";
  };
  std::string inv = "(" + fmt(A) + "*(" + fmt(A) + "*t+" + fmt(B) + "))";  // A(At+B)

  std::vector<std::string> comps;
  comps.push_back("(" + pot(mu1c) + ")+s*(" + pot(mu3c) + ")");
  comps.push_back("(" + fmt(B / A) + "+t)*(" + pot(mu3c) + ")+" + fmt(lambda_tilde));
  comps.push_back("-(s*(" + dpot(mu3c) + ")+(" + dpot(mu1c) + "))/" + inv + "+" + fmt(Tc));
  fam.field = make_field(fam.spec, "linear_warp_killing", comps);
  fam.cf_constant = -A * A;
  fam.note = "scale " + fmt(A) + "*t+" + fmt(B);
  return fam;
}

// Sinusoidal scale sin(a t + p0) over a single time axis; the transported
// gradient coefficient collapses to -cot(a t + p0)/a.
inline KillingFamily sin_warp_killing_family(double a, double p0, const Eigen::Vector2d& muc) {
  using detail::fmt;
  if (a == 0.0) throw PreconditionError("sinusoidal family: a must be nonzero");
  double plo = std::min(p0, a + p0), phi = std::max(p0, a + p0);
  if (!(plo > 0.0 && phi < 3.141592653589793))
    throw PreconditionError("sinusoidal family: phase must keep the scale positive on [0,1]");

  KillingFamily fam;
  fam.spec.base.dim = 1;
  fam.spec.base.coords = {"t"};
  fam.spec.base.metric = {Expr::parse("-1", {"t"})};
  fam.spec.base.signature = {-1};
  std::string ph = "(" + fmt(a) + "*t+" + fmt(p0) + ")";
  detail::push_flat_fiber(fam.spec, 1, "sin" + ph);
  detail::box_fill(fam.spec, 0.0, 1.0, -1.0, 1.0);

  std::string mu = fmt(muc[0]) + "*exp(" + fmt(a) + "*x)+" + fmt(muc[1]) + "*exp(" + fmt(-a) +
                   "*x)";
  std::string dmu = fmt(muc[0] * a) + "*exp(" + fmt(a) + "*x)+" + fmt(-muc[1] * a) + "*exp(" +
                    fmt(-a) + "*x)";
  std::vector<std::string> comps;
  comps.push_back(mu);
  comps.push_back("-cos" + ph + "/sin" + ph + "*" + fmt(1.0 / a) + "*(" + dmu + ")");
  fam.field = make_field(fam.spec, "sin_warp_killing", comps);
  fam.cf_constant = -a * a;
  fam.note = "scale sin" + ph;
  return fam;
}

// Static axis -f1^2 dt^2 with linear scale eps f1 a t + r0: the unique
// non-rotating shape.  K = mu/f1 d_t - eps/(a f) mu' d_x is parallel.
inline KillingFamily static_nonrotating_killing_family(double f1, double a, double r0, int eps,
                                                       const Eigen::Vector2d& muc) {
  using detail::fmt;
  if (!(f1 > 0.0) || !(a > 0.0) || (eps != 1 && eps != -1))
    throw PreconditionError("static family: need f1 > 0, a > 0, eps = +-1");
  double slope = eps * f1 * a;
  if (!(r0 > 0.0 && slope + r0 > 0.0))
    throw PreconditionError("static family: scale must stay positive on [0,1]");

  KillingFamily fam;
  fam.spec.base.dim = 1;
  fam.spec.base.coords = {"t"};
  fam.spec.base.metric = {Expr::parse("-" + fmt(f1 * f1), {"t"})};
  fam.spec.base.signature = {-1};
  std::string fsrc = fmt(slope) + "*t+" + fmt(r0);
  detail::push_flat_fiber(fam.spec, 1, fsrc);
  detail::box_fill(fam.spec, 0.0, 1.0, -1.0, 1.0);

  std::string mu = fmt(muc[0]) + "*exp(" + fmt(a) + "*x)+" + fmt(muc[1]) + "*exp(" + fmt(-a) +
                   "*x)";
  std::string dmu = fmt(muc[0] * a) + "*exp(" + fmt(a) + "*x)+" + fmt(-muc[1] * a) + "*exp(" +
                    fmt(-a) + "*x)";
  std::vector<std::string> comps;
  comps.push_back(fmt(1.0 / f1) + "*(" + mu + ")");
  comps.push_back(fmt(-eps / a) + "/(" + fsrc + ")*(" + dmu + ")");
  fam.field = make_field(fam.spec, "static_nonrotating_killing", comps);
  fam.cf_constant = -a * a;
  fam.note = "scale " + fsrc + ", axis weight " + fmt(f1);
  return fam;
}

}  // namespace twistgeo
