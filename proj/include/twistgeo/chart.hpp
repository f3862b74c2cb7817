#pragma once

// Product-chart data model: a base factor, m fibers, per-fiber positive scale
// functions b_i(base, fiber_i), an optional torsion vector supported on one
// factor, and a coordinate box.  The product metric is
//   g = g_B  (+)  b_1^2 g_{F_1}  (+) ... (+)  b_m^2 g_{F_m}
// in block-diagonal form, base coordinates first.

#include "twistgeo/expr.hpp"
#include "twistgeo/jet.hpp"
#include "twistgeo/poly.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace twistgeo {

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonDegenerateViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PositivityLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SignatureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BaseSpec {
  int dim = 0;
  std::vector<std::string> coords;
  std::vector<Expr> metric;    // dim*dim entries, row-major, scope = coords
  std::vector<int> signature;  // +-1 per base direction
};

struct FiberSpec {
  std::string name;
  int dim = 0;
  std::vector<std::string> coords;
  std::vector<Expr> metric;  // dim*dim entries, scope = coords (unscaled fiber metric)
};

struct WarpFn {
  Expr expr;  // scope = base coords followed by this fiber's coords; must stay positive
};

enum class TorsionLoc { None, Base, Fiber };

struct TorsionVectorSpec {
  TorsionLoc loc = TorsionLoc::None;
  int fiber = -1;               // which fiber when loc == Fiber
  std::vector<Expr> components; // scope = carrying factor's coords
};

struct VectorFieldSpec {
  std::string name;
  std::vector<Expr> components;  // total_dim entries, scope = all coordinates
};

struct ProductPoint {
  Eigen::VectorXd x;
};

struct BlockVector {
  Eigen::VectorXd v;
};

struct ProductSpec {
  BaseSpec base;
  std::vector<FiberSpec> fibers;
  std::vector<WarpFn> warps;
  TorsionVectorSpec torsion;
  Eigen::MatrixX2d domain_box;  // per global coordinate [lo, hi]
  std::vector<VectorFieldSpec> fields;

  int num_fibers() const { return static_cast<int>(fibers.size()); }

  int total_dim() const {
    int n = base.dim;
    for (const auto& f : fibers) n += f.dim;
    return n;
  }

  int fiber_offset(int i) const {
    int off = base.dim;
    for (int j = 0; j < i; ++j) off += fibers[static_cast<size_t>(j)].dim;
    return off;
  }

  // block ids: 0 = base, 1..m = fiber i
  int block_offset(int block) const { return block == 0 ? 0 : fiber_offset(block - 1); }
  int block_dim(int block) const {
    return block == 0 ? base.dim : fibers[static_cast<size_t>(block - 1)].dim;
  }

  int block_of_index(int idx) const {
    if (idx < base.dim) return 0;
    int off = base.dim;
    for (int i = 0; i < num_fibers(); ++i) {
      off += fibers[static_cast<size_t>(i)].dim;
      if (idx < off) return i + 1;
    }
    throw DimensionError("coordinate index out of range");
  }

  std::vector<std::string> all_coords() const {
    std::vector<std::string> out = base.coords;
    for (const auto& f : fibers) out.insert(out.end(), f.coords.begin(), f.coords.end());
    return out;
  }

  const VectorFieldSpec& field(const std::string& name) const {
    for (const auto& f : fields)
      if (f.name == name) return f;
    throw PreconditionError("no vector field named '" + name + "' in spec");
  }
};

// ---- block utilities -------------------------------------------------------

inline std::vector<Eigen::VectorXd> block_split(const ProductSpec& s, const Eigen::VectorXd& v) {
  if (v.size() != s.total_dim()) throw DimensionError("block_split: wrong vector length");
  std::vector<Eigen::VectorXd> out;
  out.push_back(v.segment(0, s.base.dim));
  for (int i = 0; i < s.num_fibers(); ++i)
    out.push_back(v.segment(s.fiber_offset(i), s.fibers[static_cast<size_t>(i)].dim));
  return out;
}

// -2 zero, 0 base, i >= 1 fiber i, -1 mixed
inline int block_classify(const ProductSpec& s, const Eigen::VectorXd& v, double tol = 0.0) {
  int found = -2;
  for (int idx = 0; idx < v.size(); ++idx) {
    if (std::abs(v[idx]) <= tol) continue;
    int b = s.block_of_index(idx);
    if (found == -2) found = b;
    else if (found != b) return -1;
  }
  return found;
}

// ---- evaluation helpers ----------------------------------------------------

inline Eigen::VectorXd base_slice(const ProductSpec& s, const Eigen::VectorXd& x) {
  return x.segment(0, s.base.dim);
}
inline Eigen::VectorXd fiber_slice(const ProductSpec& s, int i, const Eigen::VectorXd& x) {
  return x.segment(s.fiber_offset(i), s.fibers[static_cast<size_t>(i)].dim);
}
inline Eigen::VectorXd warp_slice(const ProductSpec& s, int i, const Eigen::VectorXd& x) {
  Eigen::VectorXd w(s.base.dim + s.fibers[static_cast<size_t>(i)].dim);
  w << base_slice(s, x), fiber_slice(s, i, x);
  return w;
}

inline double warp_value(const ProductSpec& s, int i, const Eigen::VectorXd& x) {
  double b = s.warps[static_cast<size_t>(i)].expr.eval(warp_slice(s, i, x));
  if (!(b > 0.0))
    throw PositivityLoss("scale function for fiber '" + s.fibers[static_cast<size_t>(i)].name +
                         "' non-positive at a sampled point");
  return b;
}

// Factor metric entries evaluated at local coordinates.
inline Eigen::MatrixXd factor_metric_value(const std::vector<Expr>& entries, int dim,
                                           const Eigen::VectorXd& xloc) {
  Eigen::MatrixXd g(dim, dim);
  for (int a = 0; a < dim; ++a)
    for (int b = 0; b < dim; ++b) g(a, b) = entries[static_cast<size_t>(a * dim + b)].eval(xloc);
  return g;
}

inline Eigen::MatrixXd base_metric_value(const ProductSpec& s, const Eigen::VectorXd& x) {
  return factor_metric_value(s.base.metric, s.base.dim, base_slice(s, x));
}
inline Eigen::MatrixXd fiber_metric_value(const ProductSpec& s, int i, const Eigen::VectorXd& x) {
  return factor_metric_value(s.fibers[static_cast<size_t>(i)].metric,
                             s.fibers[static_cast<size_t>(i)].dim, fiber_slice(s, i, x));
}

// Full product metric at a point (block diagonal by construction).
inline Eigen::MatrixXd assemble_metric(const ProductSpec& s, const Eigen::VectorXd& x) {
  if (x.size() != s.total_dim()) throw DimensionError("assemble_metric: wrong point length");
  int n = s.total_dim();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  g.topLeftCorner(s.base.dim, s.base.dim) = base_metric_value(s, x);
  for (int i = 0; i < s.num_fibers(); ++i) {
    double b = warp_value(s, i, x);
    int off = s.fiber_offset(i), d = s.fibers[static_cast<size_t>(i)].dim;
    g.block(off, off, d, d) = (b * b) * fiber_metric_value(s, i, x);
  }
  return g;
}

// ---- jet assembly ----------------------------------------------------------

// Seed vector for an expression whose scope maps to the given global slots;
// the poly variables are indexed by global coordinate.
inline std::vector<TruncPoly> seed_slots(const std::shared_ptr<const PolyBasis>& basis,
                                         const std::vector<int>& global_slots,
                                         const Eigen::VectorXd& x) {
  std::vector<TruncPoly> seeds;
  seeds.reserve(global_slots.size());
  for (int gs : global_slots) seeds.push_back(TruncPoly::variable(basis, gs, x[gs]));
  return seeds;
}

inline std::vector<int> base_slots(const ProductSpec& s) {
  std::vector<int> v(static_cast<size_t>(s.base.dim));
  for (int i = 0; i < s.base.dim; ++i) v[static_cast<size_t>(i)] = i;
  return v;
}
inline std::vector<int> fiber_slots(const ProductSpec& s, int i) {
  std::vector<int> v(static_cast<size_t>(s.fibers[static_cast<size_t>(i)].dim));
  for (int k = 0; k < s.fibers[static_cast<size_t>(i)].dim; ++k)
    v[static_cast<size_t>(k)] = s.fiber_offset(i) + k;
  return v;
}
inline std::vector<int> warp_slots(const ProductSpec& s, int i) {
  std::vector<int> v = base_slots(s);
  std::vector<int> f = fiber_slots(s, i);
  v.insert(v.end(), f.begin(), f.end());
  return v;
}

inline TruncPoly warp_poly(const ProductSpec& s, int i,
                           const std::shared_ptr<const PolyBasis>& basis,
                           const Eigen::VectorXd& x) {
  TruncPoly b = s.warps[static_cast<size_t>(i)].expr.eval_poly(seed_slots(basis, warp_slots(s, i), x));
  if (!(b.value() > 0.0))
    throw PositivityLoss("scale function for fiber '" + s.fibers[static_cast<size_t>(i)].name +
                         "' non-positive at a sampled point");
  return b;
}

// Product metric entries as jets of given order over all coordinates.
inline std::vector<TruncPoly> metric_poly(const ProductSpec& s, const Eigen::VectorXd& x,
                                          int order) {
  int n = s.total_dim();
  auto basis = PolyBasis::get(n, order);
  std::vector<TruncPoly> g(static_cast<size_t>(n) * static_cast<size_t>(n), TruncPoly(basis));
  auto bseeds = seed_slots(basis, base_slots(s), x);
  for (int a = 0; a < s.base.dim; ++a)
    for (int b = 0; b < s.base.dim; ++b)
      g[static_cast<size_t>(a * n + b)] =
          s.base.metric[static_cast<size_t>(a * s.base.dim + b)].eval_poly(bseeds);
  for (int i = 0; i < s.num_fibers(); ++i) {
    TruncPoly b2 = warp_poly(s, i, basis, x);
    b2 = b2 * b2;
    int off = s.fiber_offset(i), d = s.fibers[static_cast<size_t>(i)].dim;
    auto fseeds = seed_slots(basis, fiber_slots(s, i), x);
    for (int a = 0; a < d; ++a)
      for (int c = 0; c < d; ++c)
        g[static_cast<size_t>((off + a) * n + (off + c))] =
            b2 * s.fibers[static_cast<size_t>(i)].metric[static_cast<size_t>(a * d + c)].eval_poly(fseeds);
  }
  return g;
}

// Factor metric entries as jets over the factor's local coordinates.
inline std::vector<TruncPoly> factor_metric_poly(const std::vector<Expr>& entries, int dim,
                                                 const Eigen::VectorXd& xloc, int order) {
  auto basis = PolyBasis::get(dim, order);
  std::vector<TruncPoly> seeds;
  for (int v = 0; v < dim; ++v) seeds.push_back(TruncPoly::variable(basis, v, xloc[v]));
  std::vector<TruncPoly> g(static_cast<size_t>(dim) * static_cast<size_t>(dim), TruncPoly(basis));
  for (int a = 0; a < dim; ++a)
    for (int b = 0; b < dim; ++b)
      g[static_cast<size_t>(a * dim + b)] = entries[static_cast<size_t>(a * dim + b)].eval_poly(seeds);
  return g;
}

// ---- grids and sampling ----------------------------------------------------

inline Eigen::MatrixXd grid_points(const Eigen::MatrixX2d& box, int per_axis) {
  int n = static_cast<int>(box.rows());
  long total = 1;
  for (int i = 0; i < n; ++i) total *= per_axis;
  Eigen::MatrixXd pts(total, n);
  for (long r = 0; r < total; ++r) {
    long q = r;
    for (int i = 0; i < n; ++i) {
      int k = static_cast<int>(q % per_axis);
      q /= per_axis;
      double f = per_axis == 1 ? 0.5 : static_cast<double>(k) / (per_axis - 1);
      pts(r, i) = box(i, 0) + f * (box(i, 1) - box(i, 0));
    }
  }
  return pts;
}

template <class Rng>
Eigen::VectorXd random_point(const Eigen::MatrixX2d& box, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd x(box.rows());
  for (int i = 0; i < box.rows(); ++i) x[i] = box(i, 0) + u(rng) * (box(i, 1) - box(i, 0));
  return x;
}

// ---- validation ------------------------------------------------------------

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> failures;
  std::vector<bool> warp_is_twisted;      // per fiber: depends on fiber coordinates
  std::vector<std::vector<int>> fiber_signature;  // measured eigen-sign pattern per fiber
  std::vector<int> base_signature;        // measured at box center

  void fail(const std::string& msg) {
    ok = false;
    failures.push_back(msg);
  }
};

inline std::vector<int> eigen_signs(const Eigen::MatrixXd& g, double tol) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (g + g.transpose()));
  std::vector<int> signs;
  for (int i = 0; i < g.rows(); ++i) {
    double v = es.eigenvalues()[i];
    if (std::abs(v) < tol) throw NonDegenerateViolation("metric eigenvalue below tolerance");
    signs.push_back(v > 0 ? 1 : -1);
  }
  return signs;  // ascending eigenvalue order: negatives first
}

inline std::string point_str(const Eigen::VectorXd& x) {
  std::string s = "(";
  char buf[32];
  for (int i = 0; i < x.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.4g", x[i]);
    s += std::string(i ? ", " : "") + buf;
  }
  return s + ")";
}

// Structural checks plus a grid sweep: scale positivity, metric symmetry and
// invertibility, declared base signature, block scale-function classification.
inline ValidationReport validate_spec(const ProductSpec& s, int per_axis = 5) {
  ValidationReport rep;
  const double kTolFlat = 1e-9;
  if (s.base.dim < 1) rep.fail("base dimension must be >= 1");
  if (static_cast<int>(s.base.coords.size()) != s.base.dim) rep.fail("base coords/dim mismatch");
  if (static_cast<int>(s.base.metric.size()) != s.base.dim * s.base.dim)
    rep.fail("base metric needs dim^2 entries");
  if (static_cast<int>(s.base.signature.size()) != s.base.dim)
    rep.fail("base signature needs one entry per base direction");
  for (int e : s.base.signature)
    if (e != 1 && e != -1) rep.fail("base signature entries must be +1 or -1");
  if (s.warps.size() != s.fibers.size()) rep.fail("need exactly one scale function per fiber");
  for (int i = 0; i < s.num_fibers(); ++i) {
    const auto& f = s.fibers[static_cast<size_t>(i)];
    if (f.dim < 1) rep.fail("fiber '" + f.name + "' dimension must be >= 1");
    if (static_cast<int>(f.coords.size()) != f.dim) rep.fail("fiber '" + f.name + "' coords/dim mismatch");
    if (static_cast<int>(f.metric.size()) != f.dim * f.dim)
      rep.fail("fiber '" + f.name + "' metric needs dim^2 entries");
  }
  if (s.domain_box.rows() != s.total_dim()) rep.fail("domain box needs one row per coordinate");
  for (int r = 0; r < s.domain_box.rows(); ++r)
    if (!(s.domain_box(r, 0) < s.domain_box(r, 1))) rep.fail("domain box rows must satisfy lo < hi");
  if (s.torsion.loc == TorsionLoc::Fiber &&
      (s.torsion.fiber < 0 || s.torsion.fiber >= s.num_fibers()))
    rep.fail("torsion fiber index out of range");
  if (s.torsion.loc != TorsionLoc::None) {
    int d = s.torsion.loc == TorsionLoc::Base ? s.base.dim
                                              : s.fibers[static_cast<size_t>(s.torsion.fiber)].dim;
    if (static_cast<int>(s.torsion.components.size()) != d)
      rep.fail("torsion components must match carrying factor dimension");
  }
  if (!rep.ok) return rep;

  rep.warp_is_twisted.assign(static_cast<size_t>(s.num_fibers()), false);
  Eigen::MatrixXd pts = grid_points(s.domain_box, per_axis);
  int det_sign = 0;
  for (long r = 0; r < pts.rows(); ++r) {
    Eigen::VectorXd x = pts.row(r).transpose();
    for (int i = 0; i < s.num_fibers(); ++i) {
      double b;
      try {
        b = warp_value(s, i, x);
      } catch (const PositivityLoss&) {
        rep.fail("scale function " + std::to_string(i + 1) + " non-positive at " + point_str(x));
        continue;
      }
      (void)b;
      // fiber-coordinate dependence classifies warped vs twisted
      auto basis = PolyBasis::get(s.base.dim + s.fibers[static_cast<size_t>(i)].dim, 1);
      Eigen::VectorXd w = warp_slice(s, i, x);
      std::vector<TruncPoly> seeds;
      for (int v = 0; v < w.size(); ++v) seeds.push_back(TruncPoly::variable(basis, v, w[v]));
      TruncPoly bp = s.warps[static_cast<size_t>(i)].expr.eval_poly(seeds);
      for (int v = s.base.dim; v < w.size(); ++v)
        if (std::abs(bp.d1(v)) > kTolFlat) rep.warp_is_twisted[static_cast<size_t>(i)] = true;
    }
    Eigen::MatrixXd g;
    try {
      g = assemble_metric(s, x);
    } catch (const std::exception& ex) {
      rep.fail(std::string("metric evaluation failed at ") + point_str(x) + ": " + ex.what());
      continue;
    }
    double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      rep.fail("metric not symmetric at " + point_str(x));
    double det = g.determinant();
    if (std::abs(det) < 1e-12)
      rep.fail("metric near-degenerate at " + point_str(x));
    else {
      int sgn = det > 0 ? 1 : -1;
      if (det_sign == 0) det_sign = sgn;
      else if (det_sign != sgn) rep.fail("metric determinant changes sign across the box");
    }
  }

  // signature checks at box center
  Eigen::VectorXd c = 0.5 * (s.domain_box.col(0) + s.domain_box.col(1));
  try {
    std::vector<int> found = eigen_signs(base_metric_value(s, c), 1e-12);
    std::vector<int> want = s.base.signature;
    std::vector<int> fs = found, ws = want;
    std::sort(fs.begin(), fs.end());
    std::sort(ws.begin(), ws.end());
    if (fs != ws) rep.fail("base metric eigenvalue signs do not match declared signature");
    rep.base_signature = found;
    for (int i = 0; i < s.num_fibers(); ++i)
      rep.fiber_signature.push_back(eigen_signs(fiber_metric_value(s, i, c), 1e-12));
  } catch (const NonDegenerateViolation&) {
    rep.fail("factor metric near-degenerate at box center");
  }
  return rep;
}

// Measured fiber signature at a point (fibers carry no declared signature).
inline std::vector<int> fiber_signature_at(const ProductSpec& s, int i, const Eigen::VectorXd& x) {
  return eigen_signs(fiber_metric_value(s, i, x), 1e-12);
}

}  // namespace twistgeo
