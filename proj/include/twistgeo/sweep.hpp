#pragma once
// Randomized chart generation and structured-vs-oracle sweeps. A sweep draws
// specs from the pinned random family (base dim <= 2, up to two fibers of
// dim <= 2, scale functions from the exponential / affine / fiber-quadratic
// exponential families), evaluates connection, curvature, Ricci, and scalar
// through both the blockwise formulas and the coordinate oracle at random
// interior points, and reports the worst scaled difference per object. Any
// entry beyond tolerance becomes a FormulaDiscrepancy naming the clause of
// the blockwise formula that produced it.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "twistgeo/chart.hpp"
#include "twistgeo/finsler.hpp"
#include "twistgeo/lc_blocks.hpp"
#include "twistgeo/oracle.hpp"
#include "twistgeo/report.hpp"
#include "twistgeo/specio.hpp"
#include "twistgeo/srcfmt.hpp"
#include "twistgeo/ss_blocks.hpp"

namespace twistgeo {

// -- random specs ---------------------------------------------------------------

struct RandomSpecOptions {
  bool with_torsion = false;    // attach a semi-symmetric torsion vector
  int max_base_dim = 2;
  int max_fibers = 2;
  int max_fiber_dim = 2;
};

namespace detail {

inline std::string warp_source(int family, const std::vector<std::string>& base_coords,
                               const std::vector<std::string>& fiber_coords,
                               std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ua(0.1, 0.5), uA(0.3, 0.8), uB(1.5, 2.5),
      ub(0.05, 0.3);
  std::bernoulli_distribution flip(0.5);
  const std::string& t = base_coords.front();
  switch (family) {
    case 0: {  // exponential in the first base coordinate
      double a = ua(rng) * (flip(rng) ? 1.0 : -1.0);
      return "exp(" + fmt(a) + "*" + t + ")";
    }
    case 1: {  // affine in the first base coordinate, positive on [-1, 1]
      double A = uA(rng) * (flip(rng) ? 1.0 : -1.0), B = uB(rng);
      return fmt(A) + "*" + t + "+" + fmt(B);
    }
    default: {  // exponential with a fiber-quadratic term: genuinely twisted
      double a = ua(rng) * (flip(rng) ? 1.0 : -1.0), b = ub(rng) * (flip(rng) ? 1.0 : -1.0);
      return "exp(" + fmt(a) + "*" + t + "+" + fmt(b) + "*" + fiber_coords.front() + "^2)";
    }
  }
}

inline std::vector<Expr> random_diag_metric(const std::vector<std::string>& coords,
                                            const std::vector<int>& signs,
                                            std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uc(0.0, 0.35);
  int d = static_cast<int>(coords.size());
  std::vector<Expr> m;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (i != j) {
        m.push_back(Expr::parse("0", coords));
        continue;
      }
      std::string body = "1+" + fmt(uc(rng)) + "*" + coords[static_cast<size_t>((i + 1) % d)] + "^2";
      if (d == 1) body = "1";
      m.push_back(Expr::parse(signs[static_cast<size_t>(i)] < 0 ? "-(" + body + ")" : body, coords));
    }
  return m;
}

}  // namespace detail

inline ProductSpec random_product_spec(std::mt19937_64& rng, const RandomSpecOptions& opt = {}) {
  std::uniform_int_distribution<int> ubd(1, opt.max_base_dim), unf(1, opt.max_fibers),
      ufd(1, opt.max_fiber_dim), uwf(0, 2);
  std::bernoulli_distribution flip(0.5);

  ProductSpec s;
  s.base.dim = ubd(rng);
  s.base.coords = default_base_coords(s.base.dim);
  s.base.signature.assign(static_cast<size_t>(s.base.dim), 1);
  if (flip(rng)) s.base.signature[0] = -1;
  s.base.metric = detail::random_diag_metric(s.base.coords, s.base.signature, rng);

  int nf = unf(rng);
  for (int i = 0; i < nf; ++i) {
    FiberSpec f;
    f.dim = ufd(rng);
    f.name = "F" + std::to_string(i + 1);
    f.coords = default_fiber_coords(i, f.dim);
    f.metric = detail::random_diag_metric(f.coords, std::vector<int>(static_cast<size_t>(f.dim), 1), rng);
    s.fibers.push_back(std::move(f));
  }

  for (int i = 0; i < nf; ++i) {
    std::vector<std::string> scope = s.base.coords;
    const auto& fc = s.fibers[static_cast<size_t>(i)].coords;
    scope.insert(scope.end(), fc.begin(), fc.end());
    WarpFn w;
    w.expr = Expr::parse(detail::warp_source(uwf(rng), s.base.coords, fc, rng), scope);
    s.warps.push_back(std::move(w));
  }

  if (opt.with_torsion) {
    std::uniform_real_distribution<double> uc(-0.6, 0.6);
    std::uniform_int_distribution<int> upick(0, nf);  // 0 = base, else fiber index
    int where = upick(rng);
    std::vector<std::string> carrier;
    if (where == 0) {
      s.torsion.loc = TorsionLoc::Base;
      carrier = s.base.coords;
    } else {
      s.torsion.loc = TorsionLoc::Fiber;
      s.torsion.fiber = where - 1;
      carrier = s.fibers[static_cast<size_t>(where - 1)].coords;
    }
    for (size_t k = 0; k < carrier.size(); ++k) {
      std::string src = k == 0 ? detail::fmt(uc(rng)) + "+" + detail::fmt(uc(rng)) + "*" + carrier[0]
                               : detail::fmt(uc(rng));
      s.torsion.components.push_back(Expr::parse(src, carrier));
    }
  }

  int n = s.total_dim();
  s.domain_box.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    s.domain_box(i, 0) = -1.0;
    s.domain_box(i, 1) = 1.0;
  }
  return s;
}

inline Eigen::VectorXd random_point(const Eigen::MatrixX2d& box, std::mt19937_64& rng) {
  Eigen::VectorXd x(box.rows());
  for (Eigen::Index i = 0; i < box.rows(); ++i) {
    std::uniform_real_distribution<double> u(box(i, 0), box(i, 1));
    x[i] = u(rng);
  }
  return x;
}

// -- structured vs oracle -------------------------------------------------------

struct FormulaDiscrepancy {
  std::string spec;
  std::string object;  // "gamma" | "riemann" | "ricci" | "scalar"
  std::string clause;  // blockwise-formula clause that produced the entry
  double diff = 0;     // absolute difference
  double scaled = 0;   // diff / max(tol_abs, tol_rel * magnitude); > 1 fails
  Eigen::VectorXd point;
};

struct ObjectDiff {
  double max_diff = 0;
  double max_scaled = 0;
  std::string worst_clause;
  Eigen::VectorXd worst_point;

  void feed(double a, double b, const std::string& clause, const Eigen::VectorXd& x,
            double tol_rel, double tol_abs) {
    double diff = std::abs(a - b);
    double scaled = diff / std::max(tol_abs, tol_rel * std::max(std::abs(a), std::abs(b)));
    max_diff = std::max(max_diff, diff);
    if (scaled >= max_scaled) {
      max_scaled = scaled;
      worst_clause = clause;
      worst_point = x;
    }
  }
};

struct SpecDiff {
  std::string name;
  std::string digest;
  ObjectDiff gamma, riemann, ricci, scalar;
  double torsion_residual = 0;  // semi-symmetric sweeps only
};

struct OracleDiffReport {
  std::string connection;  // "lc" | "ss"
  std::uint64_t seed = 0;
  int specs = 0;
  int points = 0;
  double tol_rel = 1e-6;
  double tol_abs = 1e-8;
  std::vector<SpecDiff> per_spec;
  std::vector<FormulaDiscrepancy> discrepancies;

  bool pass() const { return discrepancies.empty(); }
};

namespace detail {

template <class PointData, class ConnFn, class CurvFn, class RicciFn, class ScalarFn>
void diff_one_point(SpecDiff& out, const PointData& d, const OracleData& od,
                    const Eigen::VectorXd& x, double tol_rel, double tol_abs, ConnFn conn,
                    CurvFn curv, RicciFn ricci, ScalarFn scalar) {
  int n = od.n;
  Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  for (int mu = 0; mu < n; ++mu)
    for (int nu = 0; nu < n; ++nu) {
      BlockTensorResult r = conn(d, id.col(mu), id.col(nu));
      for (int k = 0; k < n; ++k)
        out.gamma.feed(r.components[k], od.gamma[static_cast<size_t>(idx3(n, k, mu, nu))].value(),
                       r.clause, x, tol_rel, tol_abs);
      BlockScalarResult rc = ricci(d, id.col(mu), id.col(nu));
      out.ricci.feed(rc.value, od.ricci(mu, nu), rc.clause, x, tol_rel, tol_abs);
      for (int rho = 0; rho < n; ++rho) {
        BlockTensorResult rr = curv(d, id.col(mu), id.col(nu), id.col(rho));
        for (int l = 0; l < n; ++l)
          out.riemann.feed(rr.components[l],
                           od.riemann[static_cast<size_t>(idx4(n, l, mu, nu, rho))], rr.clause, x,
                           tol_rel, tol_abs);
      }
    }
  auto sc = scalar(d);
  out.scalar.feed(sc.first, od.scalar, sc.second, x, tol_rel, tol_abs);
}

inline void collect(OracleDiffReport& rep, const SpecDiff& sd) {
  auto flag = [&](const ObjectDiff& o, const char* object) {
    if (o.max_scaled <= 1.0) return;
    FormulaDiscrepancy f;
    f.spec = sd.name;
    f.object = object;
    f.clause = o.worst_clause;
    f.diff = o.max_diff;
    f.scaled = o.max_scaled;
    f.point = o.worst_point;
    rep.discrepancies.push_back(std::move(f));
  };
  flag(sd.gamma, "gamma");
  flag(sd.riemann, "riemann");
  flag(sd.ricci, "ricci");
  flag(sd.scalar, "scalar");
  rep.per_spec.push_back(sd);
}

}  // namespace detail

// One spec against the coordinate oracle at random interior points.
inline SpecDiff oracle_diff_spec(const ProductSpec& s, const std::string& name, int points,
                                 std::mt19937_64& rng, const std::string& connection,
                                 double tol_rel, double tol_abs) {
  SpecDiff sd;
  sd.name = name;
  sd.digest = json_digest(product_spec_to_json(s));
  for (int p = 0; p < points; ++p) {
    Eigen::VectorXd x = random_point(s.domain_box, rng);
    if (connection == "ss") {
      SemiSymPointData d = semisym_point_data(s, x, 3);
      OracleData od = ss_oracle(s, x, 3);
      sd.torsion_residual = std::max(sd.torsion_residual, torsion_residual(d));
      detail::diff_one_point(
          sd, d, od, x, tol_rel, tol_abs,
          [](const SemiSymPointData& dd, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
            return ss_connection(dd, a, b);
          },
          [](const SemiSymPointData& dd, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
             const Eigen::VectorXd& c) { return ss_curvature(dd, a, b, c); },
          [](const SemiSymPointData& dd, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
            return ss_ricci(dd, a, b);
          },
          [](const SemiSymPointData& dd) {
            BlockScalarResult r = ss_scalar(dd);
            return std::make_pair(r.value, r.clause);
          });
    } else {
      TwistedPointData d = twisted_point_data(s, x, 3);
      OracleData od = lc_oracle(s, x, 3);
      detail::diff_one_point(
          sd, d, od, x, tol_rel, tol_abs,
          [](const TwistedPointData& dd, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
            return lc_connection(dd, a, b);
          },
          [](const TwistedPointData& dd, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
             const Eigen::VectorXd& c) { return lc_curvature(dd, a, b, c); },
          [](const TwistedPointData& dd, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
            return lc_ricci(dd, a, b);
          },
          [](const TwistedPointData& dd) {
            return std::make_pair(lc_scalar(dd), std::string("scalar.total"));
          });
    }
  }
  return sd;
}

// The full randomized protocol: fresh specs from the pinned family, each
// swept at random points.
inline OracleDiffReport oracle_diff_sweep(int num_specs, int points_per_spec, std::uint64_t seed,
                                          const std::string& connection, double tol_rel = 1e-6,
                                          double tol_abs = 1e-8) {
  OracleDiffReport rep;
  rep.connection = connection;
  rep.seed = seed;
  rep.specs = num_specs;
  rep.points = points_per_spec;
  rep.tol_rel = tol_rel;
  rep.tol_abs = tol_abs;
  std::mt19937_64 rng(seed);
  RandomSpecOptions opt;
  opt.with_torsion = (connection == "ss");
  for (int i = 0; i < num_specs; ++i) {
    ProductSpec s = random_product_spec(rng, opt);
    detail::collect(rep, oracle_diff_spec(s, "spec_" + std::to_string(i), points_per_spec, rng,
                                          connection, tol_rel, tol_abs));
  }
  return rep;
}

// Sweep over a single loaded spec (the CLI path for `oracle-diff file.json`).
inline OracleDiffReport oracle_diff_single(const ProductSpec& s, int points, std::uint64_t seed,
                                           const std::string& connection, double tol_rel = 1e-6,
                                           double tol_abs = 1e-8) {
  OracleDiffReport rep;
  rep.connection = connection;
  rep.seed = seed;
  rep.specs = 1;
  rep.points = points;
  rep.tol_rel = tol_rel;
  rep.tol_abs = tol_abs;
  std::mt19937_64 rng(seed);
  detail::collect(rep, oracle_diff_spec(s, "spec_0", points, rng, connection, tol_rel, tol_abs));
  return rep;
}

// -- report serialization ---------------------------------------------------------

inline nlohmann::json to_json(const ObjectDiff& o) {
  nlohmann::json j;
  j["max_diff"] = o.max_diff;
  j["max_scaled"] = o.max_scaled;
  j["worst_clause"] = o.worst_clause;
  j["worst_point"] = std::vector<double>(o.worst_point.data(),
                                         o.worst_point.data() + o.worst_point.size());
  return j;
}

inline nlohmann::json to_json(const OracleDiffReport& rep) {
  nlohmann::json j;
  j["connection"] = rep.connection;
  j["seed"] = rep.seed;
  j["specs"] = rep.specs;
  j["points_per_spec"] = rep.points;
  j["tol_rel"] = rep.tol_rel;
  j["tol_abs"] = rep.tol_abs;
  j["pass"] = rep.pass();
  j["per_spec"] = nlohmann::json::array();
  for (const auto& sd : rep.per_spec) {
    nlohmann::json js;
    js["name"] = sd.name;
    js["digest"] = sd.digest;
    js["gamma"] = to_json(sd.gamma);
    js["riemann"] = to_json(sd.riemann);
    js["ricci"] = to_json(sd.ricci);
    js["scalar"] = to_json(sd.scalar);
    if (rep.connection == "ss") js["torsion_residual"] = sd.torsion_residual;
    j["per_spec"].push_back(js);
  }
  j["discrepancies"] = nlohmann::json::array();
  for (const auto& f : rep.discrepancies) {
    nlohmann::json jf;
    jf["spec"] = f.spec;
    jf["object"] = f.object;
    jf["clause"] = f.clause;
    jf["diff"] = f.diff;
    jf["scaled"] = f.scaled;
    jf["point"] = std::vector<double>(f.point.data(), f.point.data() + f.point.size());
    j["discrepancies"].push_back(jf);
  }
  return j;
}

// -- random norm products ---------------------------------------------------------

// Random product norms for the structured-vs-generic spray protocol. Factor
// kinds rotate through flat, curved Riemannian, quartic, and drift norms, so
// every sweep sees at least one non-Riemannian factor.
inline ProductFinslerSpec random_finsler_spec(std::mt19937_64& rng, int index) {
  std::uniform_int_distribution<int> udim(1, 2), unf(1, 2), ukind(0, 2), utw(0, 3);
  std::uniform_real_distribution<double> uc(0.1, 0.4);

  auto make_factor = [&](const std::string& stem, int kind, int dim) {
    switch (kind) {
      case 0:
        return euclidean_factor(stem, dim);
      case 1: {
        std::vector<std::string> entries;
        for (int i = 0; i < dim; ++i)
          for (int j = 0; j < dim; ++j) {
            if (i != j)
              entries.push_back("0");
            else if (i == 0)
              entries.push_back("1");
            else
              entries.push_back("1+" + detail::fmt(uc(rng)) + "*" + stem + "x1^2");
          }
        return riemannian_factor(stem, dim, entries, detail::unit_box(dim));
      }
      default: {
        if (dim == 1) return euclidean_factor(stem, dim);  // quartic in 1D is flat
        return quartic_factor(stem, dim);
      }
    }
  };

  // The base must stay non-degenerate under direction jets; drift norms are
  // reserved for fibers so the rotation still covers them.
  FinslerFactor base = make_factor("b", ukind(rng), udim(rng));
  int nf = unf(rng);
  std::vector<FinslerFactor> fibers;
  std::vector<std::string> twists;
  for (int i = 0; i < nf; ++i) {
    std::string stem = "f" + std::to_string(i + 1);
    int kind = (index + i) % 4;
    if (kind == 3) {
      int dim = udim(rng);
      Eigen::VectorXd drift = Eigen::VectorXd::Zero(dim);
      drift[0] = 0.3;
      fibers.push_back(randers_factor(stem, dim, drift));
    } else {
      fibers.push_back(make_factor(stem, kind, udim(rng)));
    }
    switch (utw(rng)) {
      case 0:
        twists.push_back(detail::fmt(1.0 + uc(rng)));
        break;
      case 1:
        twists.push_back("exp(" + detail::fmt(uc(rng)) + "*bx1)");
        break;
      case 2:
        twists.push_back(detail::fmt(1.5) + "+" + detail::fmt(uc(rng)) + "*sin(" + stem + "x1)");
        break;
      default:
        twists.push_back("exp(" + detail::fmt(uc(rng)) + "*bx1+" + detail::fmt(uc(rng)) + "*" +
                         stem + "x1^2)");
        break;
    }
  }
  return finsler_product("finsler_" + std::to_string(index), std::move(base), std::move(fibers),
                         twists);
}

}  // namespace twistgeo
