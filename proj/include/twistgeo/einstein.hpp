#pragma once

// Closed-form scale functions that make a product chart with the distinguished
// connection an Einstein space, or give it constant scalar curvature, plus
// per-condition evaluators for the corresponding classification systems.
// Every family builder measures its own residual on a verification grid
// before reporting; failed families come back flagged, never dropped.

#include "twistgeo/numerics.hpp"
#include "twistgeo/srcfmt.hpp"
#include "twistgeo/ss_blocks.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace twistgeo {

namespace detail {

inline TruncPoly time_jet(const Expr& f, double t) {
  auto basis = PolyBasis::get(1, 3);
  std::vector<TruncPoly> seeds = {TruncPoly::variable(basis, 0, t)};
  return f.eval_poly(seeds);
}

}  // namespace detail

// max over a [0,1] grid of |f'' + a1 f' + a0 f - rhs| for a scale expression f(t)
inline double linear2_residual(const Expr& f, double a1, double a0, double rhs, int pts = 21) {
  double worst = 0;
  for (int k = 0; k < pts; ++k) {
    double t = static_cast<double>(k) / (pts - 1);
    TruncPoly j = detail::time_jet(f, t);
    worst = std::max(worst, std::abs(j.d2(0, 0) + a1 * j.d1(0) + a0 * j.value() - rhs));
  }
  return worst;
}

// ---- model fibers of constant Ricci proportion ------------------------------------

// Chart whose unscaled Ricci tensor equals lambda * metric in this engine's
// curvature sign convention (round charts come out negative-proportional, the
// exp-built charts positive).  The overall scale is calibrated against the
// factor oracle rather than assumed, and re-verified before returning.
inline FiberSpec make_einstein_fiber(int dim, double lambda, const std::string& name = "F",
                                     std::vector<std::string> coords = {}) {
  if (coords.empty()) {
    const char* defaults[] = {"x", "y", "z", "u4", "u5"};
    for (int i = 0; i < dim; ++i) coords.push_back(defaults[i]);
  }
  if (static_cast<int>(coords.size()) != dim)
    throw DimensionError("make_einstein_fiber: coordinate count != dim");
  FiberSpec f;
  f.name = name;
  f.dim = dim;
  f.coords = coords;

  auto zero = Expr::parse("0", coords);
  f.metric.assign(static_cast<size_t>(dim) * static_cast<size_t>(dim), zero);
  auto set_diag = [&](const std::vector<std::string>& diag) {
    for (int a = 0; a < dim; ++a)
      f.metric[static_cast<size_t>(a * dim + a)] = Expr::parse(diag[static_cast<size_t>(a)], coords);
  };

  if (lambda == 0.0 || dim == 1) {
    if (lambda != 0.0)
      throw PreconditionError("make_einstein_fiber: a 1-dimensional factor has zero Ricci");
    std::vector<std::string> diag(static_cast<size_t>(dim), "1");
    set_diag(diag);
    return f;
  }

  // nested polar chart: g_kk = prod_{j<k} w_j(x_j)^2.  The negative-proportion
  // family is the all-circular round chart; the positive one replaces only the
  // first link with (e^x - e^-x)/2 (the remaining links stay circular).
  auto wsq = [&](const std::string& c, bool hyperbolic_link) {
    return hyperbolic_link ? "((exp(" + c + ")-exp(-" + c + "))/2)^2" : "sin(" + c + ")^2";
  };
  bool positive = lambda > 0.0;
  std::vector<std::string> unit(static_cast<size_t>(dim));
  unit[0] = "1";
  for (int k = 1; k < dim; ++k) {
    std::string link = wsq(coords[static_cast<size_t>(k - 1)], positive && k == 1);
    unit[static_cast<size_t>(k)] = unit[static_cast<size_t>(k - 1)] == "1"
                                       ? link
                                       : unit[static_cast<size_t>(k - 1)] + "*" + link;
  }
  set_diag(unit);

  // measure the unit chart's proportion at a reference point, then scale
  Eigen::VectorXd ref = Eigen::VectorXd::Ones(dim);
  OracleData od = oracle_from_metric_poly(factor_metric_poly(f.metric, dim, ref, 3), dim);
  double kappa = od.ricci(0, 0) / od.g(0, 0);
  double a2 = kappa / lambda;
  if (!(a2 > 0.0))
    throw PreconditionError("make_einstein_fiber: requested proportion has the wrong sign");
  for (auto& s : unit) s = detail::fmt(a2) + (s == "1" ? "" : "*" + s);
  set_diag(unit);

  OracleData chk = oracle_from_metric_poly(factor_metric_poly(f.metric, dim, ref, 3), dim);
  double err = (chk.ricci - lambda * chk.g).cwiseAbs().maxCoeff();
  if (err > 1e-8)
    throw PreconditionError("make_einstein_fiber: calibration failed, residual " +
                            std::to_string(err));
  return f;
}

// ---- spec assembly ------------------------------------------------------------------

// Lorentzian line base, one or more fibers scaled by expressions of t, and the
// distinguished field P = unit base section.
inline ProductSpec line_base_spec(const std::vector<FiberSpec>& fibers,
                                  const std::vector<std::string>& warp_exprs, double t0, double t1,
                                  double splo = 0.8, double sphi = 1.2) {
  ProductSpec s;
  s.base.dim = 1;
  s.base.coords = {"t"};
  s.base.metric = {Expr::parse("-1", {"t"})};
  s.base.signature = {-1};
  s.fibers = fibers;
  for (size_t i = 0; i < fibers.size(); ++i) {
    std::vector<std::string> scope = {"t"};
    scope.insert(scope.end(), fibers[i].coords.begin(), fibers[i].coords.end());
    s.warps.push_back(WarpFn{Expr::parse(warp_exprs[i], scope)});
  }
  s.torsion.loc = TorsionLoc::Base;
  s.torsion.components = {Expr::parse("1", {"t"})};
  int n = s.total_dim();
  s.domain_box.resize(n, 2);
  s.domain_box(0, 0) = t0;
  s.domain_box(0, 1) = t1;
  for (int i = 1; i < n; ++i) {
    s.domain_box(i, 0) = splo;
    s.domain_box(i, 1) = sphi;
  }
  return s;
}

// ---- scale families for the Einstein condition --------------------------------------

struct GRWParams {
  int l = 1;             // fiber dimension
  double lambda = 0;     // Einstein proportion of the product
  double c1 = 1, c2 = 0; // integration constants
  double lambda_F = 0;   // fiber proportion (dim > 1 families)
};

// Scale function f(t) with f'' - f' + lambda f = 0; branch decided by the
// discriminant 1 - 4 lambda.
inline Expr grw_einstein_solution(double lambda, double c1, double c2) {
  using detail::fmt;
  using detail::fmt_raw;
  std::string src;
  double disc = 1.0 - 4.0 * lambda;
  if (std::abs(disc) < 1e-12) {
    src = fmt(c1) + "*exp(0.5*t)+" + fmt(c2) + "*t*exp(0.5*t)";
  } else if (disc > 0) {
    double rp = 0.5 * (1.0 + std::sqrt(disc)), rm = 0.5 * (1.0 - std::sqrt(disc));
    src = fmt(c1) + "*exp(" + fmt(rp) + "*t)+" + fmt(c2) + "*exp(" + fmt(rm) + "*t)";
  } else {
    double h = 0.5 * std::sqrt(-disc);
    src = "exp(0.5*t)*(" + fmt(c1) + "*cos(" + fmt(h) + "*t)+" + fmt(c2) + "*sin(" + fmt(h) +
          "*t))";
  }
  return Expr::parse(src, {"t"});
}

struct GRWFamily {
  GRWParams params;
  Expr f;
  ProductSpec spec;
  bool verified = false;
  double max_residual = 0;
  std::string note;
};

// Fiber dimension l > 1: the only Einstein branch is lambda = 0 with
// f = c1 e^t + c2 and fiber proportion (l-1) c2^2.
inline GRWFamily grw_einstein_highdim(int l, double c1, double c2, int per_axis = 5) {
  if (l < 2) throw PreconditionError("grw_einstein_highdim: needs fiber dimension > 1");
  GRWFamily fam;
  fam.params = GRWParams{l, 0.0, c1, c2, (l - 1) * c2 * c2};
  std::string src = detail::fmt(c1) + "*exp(t)+" + detail::fmt(c2);
  fam.f = Expr::parse(src, {"t"});
  FiberSpec fib = make_einstein_fiber(l, fam.params.lambda_F);
  fam.spec = line_base_spec({fib}, {src}, 0.0, 1.0);
  EinsteinResidual er = einstein_residual(make_semisym_context(fam.spec), 0.0, per_axis);
  fam.max_residual = er.max_abs;
  fam.verified = er.max_abs < 1e-5;
  fam.note = "exponential-plus-constant scale, flat-or-curved fiber";
  return fam;
}

// ---- scale families for constant scalar curvature -----------------------------------

struct ScalarFamily {
  int l = 1;
  double Sbar = 0, SF = 0;
  std::string branch;
  bool closed_form = true;
  Expr v;          // f^2 when closed_form
  Expr f;
  OdeTrajectory w; // sampled (w, w') when numeric
  double wpow = 1; // f = w^wpow for the substitution families
  ProductSpec spec;        // verification chart (closed_form only)
  bool verified = false;
  double max_residual = 0; // scalar deviation from Sbar on the grid
  double stddev = 0;
};

namespace detail {

// positivity of an expression of t on a [0,1] grid
inline void require_positive_on_grid(const Expr& e, const std::string& what, int pts = 201) {
  for (int k = 0; k < pts; ++k) {
    double t = static_cast<double>(k) / (pts - 1);
    Eigen::VectorXd xt(1);
    xt[0] = t;
    if (!(e.eval(xt) > 0.0))
      throw PositivityLoss(what + " non-positive at t = " + std::to_string(t));
  }
}

inline std::string scalar_family_v_src(double Sbar, double SF, double c1, double c2) {
  // v'' - 3 v' + (2 + Sbar/3) v = SF/3; roots (3 +- sqrt(1 - 4 Sbar/3))/2
  if (std::abs(Sbar + 6.0) < 1e-12)
    return fmt(c1) + "+" + fmt(-SF / 9.0) + "*t+" + fmt(c2) + "*exp(3*t)";
  std::string part = fmt(SF / (6.0 + Sbar));
  double disc = 1.0 - 4.0 * Sbar / 3.0;
  if (std::abs(disc) < 1e-12)
    return fmt(c1) + "*exp(1.5*t)+" + fmt(c2) + "*t*exp(1.5*t)+" + part;
  if (disc > 0) {
    double rp = 0.5 * (3.0 + std::sqrt(disc)), rm = 0.5 * (3.0 - std::sqrt(disc));
    return fmt(c1) + "*exp(" + fmt(rp) + "*t)+" + fmt(c2) + "*exp(" + fmt(rm) + "*t)+" + part;
  }
  double om = 0.5 * std::sqrt(-disc);
  return "exp(1.5*t)*(" + fmt(c1) + "*cos(" + fmt(om) + "*t)+" + fmt(c2) + "*sin(" + fmt(om) +
         "*t))+" + part;
}

}  // namespace detail

struct ScalarGridStats {
  double mean = 0, stddev = 0, max_dev_from_target = 0;
  Eigen::VectorXd worst_point;
};

inline ScalarGridStats ss_scalar_stats(const ProductSpec& s, double target, int per_axis = 5) {
  ScalarGridStats st;
  Eigen::MatrixXd pts = grid_points(s.domain_box, per_axis);
  std::vector<double> vals;
  vals.reserve(static_cast<size_t>(pts.rows()));
  for (Eigen::Index r = 0; r < pts.rows(); ++r) {
    Eigen::VectorXd x = pts.row(r);
    SemiSymPointData d = semisym_point_data(s, x, 3);
    double v = ss_scalar(d).value;
    vals.push_back(v);
    st.mean += v;
    if (std::abs(v - target) > st.max_dev_from_target) {
      st.max_dev_from_target = std::abs(v - target);
      st.worst_point = x;
    }
  }
  st.mean /= static_cast<double>(vals.size());
  for (double v : vals) st.stddev += (v - st.mean) * (v - st.mean);
  st.stddev = std::sqrt(st.stddev / static_cast<double>(vals.size()));
  return st;
}

// Scale function for the product over a Lorentzian line with one l-dimensional
// fiber (P = unit base section) whose scalar curvature is the constant Sbar;
// the fiber has constant scalar curvature SF.
//   l == 3: closed forms in v = f^2;
//   l != 3, SF == 0: closed forms in w, f = w^{2/(l+1)};
//   l != 3, SF != 0: numerically integrated w.
inline ScalarFamily grw_scalar_solution(int l, double Sbar, double SF, double c1, double c2,
                                        int per_axis = 5) {
  if (l < 1) throw PreconditionError("grw_scalar_solution: fiber dimension must be positive");
  ScalarFamily fam;
  fam.l = l;
  fam.Sbar = Sbar;
  fam.SF = SF;
  using detail::fmt;
  using detail::fmt_raw;

  if (l == 3) {
    std::string vsrc = detail::scalar_family_v_src(Sbar, SF, c1, c2);
    fam.v = Expr::parse(vsrc, {"t"});
    detail::require_positive_on_grid(fam.v, "squared scale v");
    fam.f = Expr::parse("sqrt(" + vsrc + ")", {"t"});
    fam.branch = std::abs(Sbar + 6.0) < 1e-12   ? "pinned-linear"
                 : 1.0 - 4.0 * Sbar / 3.0 > 1e-12 ? "two-exponential"
                 : std::abs(1.0 - 4.0 * Sbar / 3.0) <= 1e-12 ? "double-root"
                                                             : "oscillatory";
  } else if (SF == 0.0) {
    double A = (l + 1) * 0.25 * (l - 1 + Sbar / l);
    double disc = l * l - 4.0 * A;  // roots of r^2 - l r + A
    std::string wsrc;
    if (std::abs(disc) < 1e-12) {
      wsrc = fmt(c1) + "*exp(" + fmt(l * 0.5) + "*t)+" + fmt(c2) + "*t*exp(" + fmt(l * 0.5) +
             "*t)";
      fam.branch = "double-root";
    } else if (disc > 0) {
      double rp = 0.5 * (l + std::sqrt(disc)), rm = 0.5 * (l - std::sqrt(disc));
      wsrc = fmt(c1) + "*exp(" + fmt(rp) + "*t)+" + fmt(c2) + "*exp(" + fmt(rm) + "*t)";
      fam.branch = "two-exponential";
    } else {
      double om = 0.5 * std::sqrt(-disc);
      wsrc = "exp(" + fmt(l * 0.5) + "*t)*(" + fmt(c1) + "*cos(" + fmt(om) + "*t)+" + fmt(c2) +
             "*sin(" + fmt(om) + "*t))";
      fam.branch = "oscillatory";
    }
    Expr w = Expr::parse(wsrc, {"t"});
    detail::require_positive_on_grid(w, "substitution function w");
    fam.wpow = 2.0 / (l + 1);
    fam.v = Expr::parse("(" + wsrc + ")^" + fmt_raw(4.0 / (l + 1)), {"t"});
    fam.f = Expr::parse("(" + wsrc + ")^" + fmt_raw(fam.wpow), {"t"});
  } else {
    // w'' = l w' - (l+1)/4 (l-1+Sbar/l) w + (l+1)/4 (SF/l) w^{1-4/(l+1)}
    fam.closed_form = false;
    fam.branch = "numeric";
    fam.wpow = 2.0 / (l + 1);
    double A = (l + 1) * 0.25 * (l - 1 + Sbar / l);
    double B = (l + 1) * 0.25 * (SF / l);
    double expo = 1.0 - 4.0 / (l + 1);
    Eigen::VectorXd y0(2);
    y0 << c1, c2;
    if (!(c1 > 0)) throw PositivityLoss("numeric substitution function starts non-positive");
    fam.w = integrate_ode(
        [&](double, const Eigen::VectorXd& y) {
          if (!(y[0] > 0.0)) throw PositivityLoss("substitution function crossed zero");
          Eigen::VectorXd dy(2);
          dy << y[1], l * y[1] - A * y[0] + B * std::pow(y[0], expo);
          return dy;
        },
        y0, 0.0, 1.0, 1e-3);
  }

  if (fam.closed_form) {
    if (l == 1 && SF != 0.0)
      throw PreconditionError("grw_scalar_solution: 1-dimensional fiber forces SF = 0");
    FiberSpec fib = make_einstein_fiber(l, l == 1 ? 0.0 : SF / l);
    fam.spec = line_base_spec({fib}, {fam.f.source()}, 0.0, 1.0);
    ScalarGridStats st = ss_scalar_stats(fam.spec, Sbar, per_axis);
    fam.max_residual = st.max_dev_from_target;
    fam.stddev = st.stddev;
    fam.verified = st.stddev < 1e-5 && st.max_dev_from_target < 1e-4;
  }
  return fam;
}

// ---- Kasner-type charts --------------------------------------------------------------

struct KasnerParams {
  std::vector<double> p;  // exponents
  std::vector<int> l;     // fiber dimensions
  double zeta = 0, eta = 0;
};

inline KasnerParams kasner_parameters(const std::vector<double>& p, const std::vector<int>& l) {
  if (p.size() != l.size())
    throw DimensionError("kasner_parameters: exponent/dimension count mismatch");
  KasnerParams k;
  k.p = p;
  k.l = l;
  for (size_t i = 0; i < p.size(); ++i) {
    k.zeta += l[i] * p[i];
    k.eta += l[i] * p[i] * p[i];
  }
  return k;
}

struct KasnerFamily {
  KasnerParams params;
  double c0 = 1;
  double lambda = 0;                   // product Einstein proportion
  std::vector<double> fiber_lambda;    // per-fiber proportions used
  Expr phi;
  ProductSpec spec;
  bool verified = false;
  double max_residual = 0;
  std::string note;
};

namespace detail {

// phi = c0 e^{k t}  =>  b_i = phi^{p_i} = c0^{p_i} e^{k p_i t}
inline std::string power_warp(double c0, double k, double p) {
  if (p == 0.0) return "1";
  return fmt(std::pow(c0, p)) + "*exp(" + fmt(k * p) + "*t)";
}

inline KasnerFamily kasner_family_common(const KasnerParams& kp, double c0, double k,
                                         const std::vector<double>& fiber_lambda,
                                         const std::string& note, int per_axis) {
  KasnerFamily fam;
  fam.params = kp;
  fam.c0 = c0;
  fam.fiber_lambda = fiber_lambda;
  fam.phi = Expr::parse(fmt(c0) + "*exp(" + fmt(k) + "*t)", {"t"});
  fam.note = note;

  static const std::vector<std::vector<std::string>> coord_pool = {
      {"x", "y", "z"}, {"p", "q", "r"}, {"h", "k", "m"}};
  std::vector<FiberSpec> fibers;
  std::vector<std::string> warps;
  for (size_t i = 0; i < kp.p.size(); ++i) {
    std::vector<std::string> coords(coord_pool[i].begin(),
                                    coord_pool[i].begin() + kp.l[i]);
    fibers.push_back(make_einstein_fiber(kp.l[i], fiber_lambda[i],
                                         "F" + std::to_string(i + 1), coords));
    warps.push_back(power_warp(c0, k, kp.p[i]));
  }
  fam.spec = line_base_spec(fibers, warps, 0.0, 1.0);
  EinsteinResidual er = einstein_residual(make_semisym_context(fam.spec), fam.lambda, per_axis);
  fam.max_residual = er.max_abs;
  fam.verified = er.max_abs < 1e-5;
  return fam;
}

}  // namespace detail

// The two-fiber type (dimensions 1 and 2).  Three Einstein branches, all with
// product proportion 0; the verification grid decides each family's flag.
inline std::vector<KasnerFamily> kasner_einstein_families_two_fiber(double c0, double pval,
                                                                    int per_axis = 4) {
  if (pval == 0.0) throw PreconditionError("two-fiber families need a nonzero exponent");
  std::vector<KasnerFamily> out;
  {
    KasnerParams kp = kasner_parameters({pval, 0.0}, {1, 2});
    out.push_back(detail::kasner_family_common(kp, c0, 1.0 / pval, {0.0, 1.0},
                                               "second exponent zero, curved fiber", per_axis));
  }
  {
    KasnerParams kp = kasner_parameters({0.0, pval}, {1, 2});
    out.push_back(detail::kasner_family_common(kp, c0, 1.0 / pval, {0.0, 0.0},
                                               "first exponent zero, flat fiber", per_axis));
  }
  {
    KasnerParams kp = kasner_parameters({4.0 * pval, pval}, {1, 2});
    out.push_back(detail::kasner_family_common(kp, c0, 1.0 / (3.0 * pval), {0.0, 0.0},
                                               "exponent ratio four, flat fiber", per_axis));
  }
  return out;
}

// The three-line type. Einstein forces proportion 0, 2 eta = zeta^2, and an
// exponential profile; equal exponents are excluded by assumption.
inline KasnerFamily kasner_einstein_family_three_fiber(const std::vector<double>& p, double c0,
                                                       int per_axis = 4) {
  if (p.size() != 3) throw DimensionError("three-fiber family needs three exponents");
  if (p[0] == p[1] && p[1] == p[2])
    throw PreconditionError("three-fiber family: exponents must not be all equal");
  KasnerParams kp = kasner_parameters(p, {1, 1, 1});
  if (std::abs(2.0 * kp.eta - kp.zeta * kp.zeta) > 1e-12)
    throw PreconditionError("three-fiber family: exponents need 2 eta = zeta^2");
  return detail::kasner_family_common(kp, c0, 2.0 / kp.zeta, {0.0, 0.0, 0.0},
                                      "balanced exponents", per_axis);
}

// Constant-scalar profile for the three-line type: solves
//   psi'' - 3 psi' + (Sbar+6)(eta+zeta^2)/(4 zeta^2) psi = 0,   phi = psi^{2 zeta/(eta+zeta^2)}
// (zeta != 0), or the direct zeta = 0 branches.
inline KasnerFamily kasner_scalar_solution(const KasnerParams& kp, double Sbar, double c1,
                                           double c2, int per_axis = 4) {
  if (kp.l != std::vector<int>{1, 1, 1})
    throw PreconditionError("kasner_scalar_solution: three one-dimensional fibers expected");
  using detail::fmt;
  using detail::fmt_raw;
  KasnerFamily fam;
  fam.params = kp;
  fam.lambda = Sbar;  // reused as the scalar target in this family
  std::string phisrc;
  if (kp.zeta == 0.0 && kp.eta == 0.0) {
    if (std::abs(Sbar + 6.0) > 1e-12)
      throw PreconditionError("flat profile pins the scalar; requested value unreachable");
    phisrc = fmt(std::abs(c1));
    fam.note = "all exponents zero";
  } else if (kp.zeta == 0.0) {
    if (Sbar + 6.0 > 1e-12)
      throw PreconditionError("no real profile for this scalar with zeta = 0");
    if (std::abs(Sbar + 6.0) <= 1e-12) {
      phisrc = fmt(std::abs(c1));
      fam.note = "constant profile";
    } else {
      double k = std::sqrt(-(Sbar + 6.0) / kp.eta);
      phisrc = fmt(std::abs(c1)) + "*exp(" + fmt(k) + "*t)";
      fam.note = "pure exponential, zeta = 0";
    }
  } else {
    double K = (Sbar + 6.0) * (kp.eta + kp.zeta * kp.zeta) / (4.0 * kp.zeta * kp.zeta);
    double disc = 9.0 - 4.0 * K;
    std::string psisrc;
    if (std::abs(disc) < 1e-12) {
      psisrc = fmt(c1) + "*exp(1.5*t)+" + fmt(c2) + "*t*exp(1.5*t)";
      fam.note = "double-root";
    } else if (disc > 0) {
      double rp = 0.5 * (3.0 + std::sqrt(disc)), rm = 0.5 * (3.0 - std::sqrt(disc));
      psisrc = fmt(c1) + "*exp(" + fmt(rp) + "*t)+" + fmt(c2) + "*exp(" + fmt(rm) + "*t)";
      fam.note = "two-exponential";
    } else {
      double om = 0.5 * std::sqrt(-disc);
      psisrc = "exp(1.5*t)*(" + fmt(c1) + "*cos(" + fmt(om) + "*t)+" + fmt(c2) + "*sin(" +
               fmt(om) + "*t))";
      fam.note = "oscillatory";
    }
    Expr psi = Expr::parse(psisrc, {"t"});
    detail::require_positive_on_grid(psi, "profile root psi");
    double alpha = 2.0 * kp.zeta / (kp.eta + kp.zeta * kp.zeta);
    phisrc = "(" + psisrc + ")^" + fmt_raw(alpha);
  }
  fam.phi = Expr::parse(phisrc, {"t"});

  static const char* coord_pool[] = {"x", "p", "h"};
  std::vector<FiberSpec> fibers;
  std::vector<std::string> warps;
  for (size_t i = 0; i < 3; ++i) {
    fibers.push_back(make_einstein_fiber(1, 0.0, "F" + std::to_string(i + 1),
                                         {coord_pool[i]}));
    if (kp.p[i] == 0.0)
      warps.push_back("1");
    else
      warps.push_back("(" + phisrc + ")^" + fmt_raw(kp.p[i]));
  }
  fam.spec = line_base_spec(fibers, warps, 0.0, 1.0);
  fam.fiber_lambda = {0.0, 0.0, 0.0};
  ScalarGridStats st = ss_scalar_stats(fam.spec, Sbar, per_axis);
  fam.max_residual = st.max_dev_from_target;
  fam.verified = st.stddev < 1e-5 && st.max_dev_from_target < 1e-4;
  return fam;
}

// ---- per-condition evaluators ---------------------------------------------------------

// Shared shape for the two classification systems: per-fiber proportion checks
// plus the scalar balance equations, each reported as a max residual over a
// verification grid.
struct ConditionReport {
  double lambda = 0;
  std::vector<double> fiber_lambda;
  std::vector<double> fiber_einstein_residual;
  double balance_residual = 0;                  // base-direction equation
  std::vector<double> fiber_balance_residual;   // per-fiber equation
  // fiber-carried extras
  double carrier_const_residual = 0;
  double mu0 = 0, mu1 = 0;
  double carrier_fiber_residual = 0;

  double worst() const {
    double w = std::max(balance_residual, carrier_const_residual);
    w = std::max(w, carrier_fiber_residual);
    for (double v : fiber_einstein_residual) w = std::max(w, v);
    for (double v : fiber_balance_residual) w = std::max(w, v);
    return w;
  }
  bool pass(double tol = 1e-5) const { return worst() < tol; }
};

namespace detail {

// measured Einstein proportion of an unscaled fiber, plus the residual of
// Ric = lambda g over a local grid
inline std::pair<double, double> fiber_proportion(const ProductSpec& s, int i, int per_axis) {
  const FiberSpec& f = s.fibers[static_cast<size_t>(i)];
  int off = s.fiber_offset(i);
  Eigen::MatrixX2d box = s.domain_box.block(off, 0, f.dim, 2);
  Eigen::MatrixXd pts = grid_points(box, per_axis);
  double lambda = 0, resid = 0;
  for (Eigen::Index r = 0; r < pts.rows(); ++r) {
    Eigen::VectorXd xloc = pts.row(r);
    OracleData od = oracle_from_metric_poly(factor_metric_poly(f.metric, f.dim, xloc, 3), f.dim);
    if (r == 0) lambda = od.ricci(0, 0) / od.g(0, 0);
    resid = std::max(resid, (od.ricci - lambda * od.g).cwiseAbs().maxCoeff());
  }
  return {lambda, resid};
}

// b_i(t) jets for a chart over a Lorentzian line with base-only scales
inline void require_line_base(const ProductSpec& s) {
  if (s.base.dim != 1) throw PreconditionError("classification needs a 1-dimensional base");
  Eigen::VectorXd t0(1);
  t0[0] = 0.5 * (s.domain_box(0, 0) + s.domain_box(0, 1));
  if (std::abs(factor_metric_value(s.base.metric, 1, t0)(0, 0) + 1.0) > 1e-12)
    throw PreconditionError("classification needs base metric -1");
  for (int i = 0; i < s.num_fibers(); ++i) {
    int off = s.fiber_offset(i), d = s.fibers[static_cast<size_t>(i)].dim;
    if (s.warps[static_cast<size_t>(i)].expr.uses_any(1, 1 + d))
      throw PreconditionError("classification needs scale functions of t only");
    (void)off;
  }
}

struct WarpJets {
  double b, b1, b2;  // value and t-derivatives
};

inline WarpJets warp_jets_at(const ProductSpec& s, int i, double t) {
  auto basis = PolyBasis::get(1 + s.fibers[static_cast<size_t>(i)].dim, 3);
  Eigen::VectorXd w0 = Eigen::VectorXd::Ones(1 + s.fibers[static_cast<size_t>(i)].dim);
  w0[0] = t;
  std::vector<TruncPoly> seeds;
  for (int v = 0; v < w0.size(); ++v) seeds.push_back(TruncPoly::variable(basis, v, w0[v]));
  TruncPoly b = s.warps[static_cast<size_t>(i)].expr.eval_poly(seeds);
  if (!(b.value() > 0.0)) throw PositivityLoss("scale function non-positive on the line");
  return {b.value(), b.d1(0), b.d2(0, 0)};
}

}  // namespace detail

// Conditions for the chart over a Lorentzian line with P = unit base section
// to be Einstein with the given proportion: every fiber has constant Ricci
// proportion, and two scale-function balances hold along the line.
inline ConditionReport base_carried_einstein_conditions(const ProductSpec& s, double lambda,
                                                        int per_axis = 5, int tpts = 21) {
  detail::require_line_base(s);
  if (s.torsion.loc != TorsionLoc::Base)
    throw WrongConnectionError("conditions assume the distinguished field on the base");
  int m = s.num_fibers();
  int nbar = s.total_dim();
  ConditionReport rep;
  rep.lambda = lambda;
  for (int i = 0; i < m; ++i) {
    auto [li_lambda, resid] = detail::fiber_proportion(s, i, per_axis);
    rep.fiber_lambda.push_back(li_lambda);
    rep.fiber_einstein_residual.push_back(resid);
  }
  rep.fiber_balance_residual.assign(static_cast<size_t>(m), 0.0);
  for (int k = 0; k < tpts; ++k) {
    double t = s.domain_box(0, 0) +
               (s.domain_box(0, 1) - s.domain_box(0, 0)) * k / static_cast<double>(tpts - 1);
    std::vector<detail::WarpJets> wj;
    for (int i = 0; i < m; ++i) wj.push_back(detail::warp_jets_at(s, i, t));
    double bal = 0;
    for (int i = 0; i < m; ++i)
      bal += s.fibers[static_cast<size_t>(i)].dim * (wj[i].b1 / wj[i].b - wj[i].b2 / wj[i].b);
    rep.balance_residual = std::max(rep.balance_residual, std::abs(bal - lambda));
    for (int i = 0; i < m; ++i) {
      int li = s.fibers[static_cast<size_t>(i)].dim;
      double sum_other = 0;
      for (int j = 0; j < m; ++j)
        if (j != i) sum_other += s.fibers[static_cast<size_t>(j)].dim * wj[j].b1 / wj[j].b;
      double lhs = rep.fiber_lambda[static_cast<size_t>(i)] - wj[i].b * wj[i].b2 -
                   (li - 1) * wj[i].b1 * wj[i].b1 +
                   (wj[i].b * wj[i].b - wj[i].b * wj[i].b1) * sum_other +
                   (2 - nbar) * wj[i].b * wj[i].b + (nbar + li - 2) * wj[i].b * wj[i].b1;
      rep.fiber_balance_residual[static_cast<size_t>(i)] =
          std::max(rep.fiber_balance_residual[static_cast<size_t>(i)],
                   std::abs(lhs - lambda * wj[i].b * wj[i].b));
    }
  }
  return rep;
}

// Conditions for the fiber-carried field (unit-proportioned on fiber r):
// other fibers Einstein, carrier scale constant, the mu-balance
// mu0 - mu1 + lambda = (nbar - 2) b_r^2 (the proof-consistent sign; the stated
// form with the opposite sign rejects measured solutions), the carrier-fiber
// modified proportion equation, and the per-fiber balances.
inline ConditionReport fiber_carried_einstein_conditions(const ProductSpec& s, double lambda,
                                                         int per_axis = 5, int tpts = 21) {
  detail::require_line_base(s);
  if (s.torsion.loc != TorsionLoc::Fiber)
    throw WrongConnectionError("conditions assume the distinguished field on a fiber");
  int m = s.num_fibers(), r = s.torsion.fiber, nbar = s.total_dim();
  if (nbar <= 2) throw PreconditionError("classification needs total dimension > 2");
  ConditionReport rep;
  rep.lambda = lambda;
  for (int i = 0; i < m; ++i) {
    if (i == r) {
      rep.fiber_lambda.push_back(0.0);
      rep.fiber_einstein_residual.push_back(0.0);
      continue;
    }
    auto [li_lambda, resid] = detail::fiber_proportion(s, i, per_axis);
    rep.fiber_lambda.push_back(li_lambda);
    rep.fiber_einstein_residual.push_back(resid);
  }

  // carrier constancy, mu0, and the balance along the line
  double br = detail::warp_jets_at(s, r, 0.5 * (s.domain_box(0, 0) + s.domain_box(0, 1))).b;
  double mu0 = 0;
  for (int k = 0; k < tpts; ++k) {
    double t = s.domain_box(0, 0) +
               (s.domain_box(0, 1) - s.domain_box(0, 0)) * k / static_cast<double>(tpts - 1);
    std::vector<detail::WarpJets> wj;
    for (int i = 0; i < m; ++i) wj.push_back(detail::warp_jets_at(s, i, t));
    rep.carrier_const_residual = std::max(rep.carrier_const_residual, std::abs(wj[r].b1));
    double m0 = 0;
    for (int i = 0; i < m; ++i) m0 += s.fibers[static_cast<size_t>(i)].dim * wj[i].b2 / wj[i].b;
    if (k == 0) mu0 = m0;
    rep.balance_residual = std::max(rep.balance_residual, std::abs(m0 - mu0));
  }
  rep.mu0 = mu0;

  // mu1 = fiber divergence of the field on the carrier, checked constant and
  // the modified proportion equation on the carrier fiber, over a grid
  Eigen::MatrixXd pts = grid_points(s.domain_box, std::min(per_axis, 3));
  double mu1 = 0;
  bool mu1_set = false;
  int offr = s.fiber_offset(r), dr = s.fibers[static_cast<size_t>(r)].dim;
  for (Eigen::Index row = 0; row < pts.rows(); ++row) {
    Eigen::VectorXd x = pts.row(row);
    SemiSymPointData d = semisym_point_data(s, x, 3);
    if (!mu1_set) {
      mu1 = d.divFrP;
      mu1_set = true;
    }
    rep.carrier_const_residual =
        std::max(rep.carrier_const_residual, std::abs(d.divFrP - mu1));
    double lambda_bar = br * br * ((nbar - 2) * br * br + mu1 - lambda);
    const FactorGeometry& fr = d.lc.fibers[static_cast<size_t>(r)];
    for (int u = 0; u < dr; ++u)
      for (int v = 0; v < dr; ++v) {
        double lhs = fr.od.ricci(u, v) + lambda_bar * fr.od.g(u, v);
        Eigen::VectorXd nP = detail::nabla_P(d, offr + u);
        double rhs = (nbar - 2) * (d.pi[offr + u] * d.pi[offr + v] -
                                   detail::g_dot(d, offr + v, nP));
        rep.carrier_fiber_residual = std::max(rep.carrier_fiber_residual, std::abs(lhs - rhs));
      }
  }
  rep.mu1 = mu1;
  rep.balance_residual = std::max(
      rep.balance_residual, std::abs(mu0 - mu1 + lambda - (nbar - 2) * br * br));

  // per-fiber balances for i != r
  rep.fiber_balance_residual.assign(static_cast<size_t>(m), 0.0);
  for (int k = 0; k < tpts; ++k) {
    double t = s.domain_box(0, 0) +
               (s.domain_box(0, 1) - s.domain_box(0, 0)) * k / static_cast<double>(tpts - 1);
    std::vector<detail::WarpJets> wj;
    for (int i = 0; i < m; ++i) wj.push_back(detail::warp_jets_at(s, i, t));
    for (int i = 0; i < m; ++i) {
      if (i == r) continue;
      int li = s.fibers[static_cast<size_t>(i)].dim;
      double sum_other = 0;
      for (int j = 0; j < m; ++j)
        if (j != i) sum_other += s.fibers[static_cast<size_t>(j)].dim * wj[j].b1 / wj[j].b;
      double lhs = rep.fiber_lambda[static_cast<size_t>(i)] - wj[i].b * wj[i].b2 +
                   (nbar - 2) * wj[i].b * wj[i].b * br * br -
                   wj[i].b * wj[i].b1 * sum_other - (li - 1) * wj[i].b1 * wj[i].b1;
      rep.fiber_balance_residual[static_cast<size_t>(i)] =
          std::max(rep.fiber_balance_residual[static_cast<size_t>(i)],
                   std::abs(lhs - (lambda - mu1) * wj[i].b * wj[i].b));
    }
  }
  return rep;
}

}  // namespace twistgeo
