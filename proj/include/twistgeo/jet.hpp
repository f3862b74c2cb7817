#pragma once

// Order-3 jets of scalar expressions: value, gradient, symmetric second and
// third derivative arrays with respect to a chosen subset of scope variables.
// Backed by TruncPoly; central finite differences provide an independent
// cross-check path.

#include "twistgeo/expr.hpp"
#include "twistgeo/poly.hpp"

#include <Eigen/Dense>

#include <vector>

namespace twistgeo {

struct Jet3 {
  double value = 0.0;
  Eigen::VectorXd grad;    // k
  Eigen::MatrixXd hess;    // k x k, symmetric
  std::vector<double> third;  // k^3 flat, symmetric; index (i*k+j)*k+l
  int k = 0;

  double d3(int i, int j, int l) const {
    return third[static_cast<size_t>((i * k + j) * k + l)];
  }
};

// Jets with respect to vars[wrt[0..k-1]]; all other scope slots held fixed.
inline Jet3 jet3(const Expr& e, const Eigen::VectorXd& vars, const std::vector<int>& wrt) {
  int k = static_cast<int>(wrt.size());
  auto basis = PolyBasis::get(k, 3);
  std::vector<TruncPoly> seeds;
  seeds.reserve(static_cast<size_t>(vars.size()));
  std::vector<int> slot_of(static_cast<size_t>(vars.size()), -1);
  for (int i = 0; i < k; ++i) slot_of[static_cast<size_t>(wrt[static_cast<size_t>(i)])] = i;
  for (int v = 0; v < vars.size(); ++v) {
    if (slot_of[static_cast<size_t>(v)] >= 0)
      seeds.push_back(TruncPoly::variable(basis, slot_of[static_cast<size_t>(v)], vars[v]));
    else
      seeds.push_back(TruncPoly::constant(basis, vars[v]));
  }
  TruncPoly p = e.eval_poly(seeds);
  Jet3 j;
  j.k = k;
  j.value = p.value();
  j.grad.resize(k);
  j.hess.resize(k, k);
  j.third.assign(static_cast<size_t>(k) * k * k, 0.0);
  for (int a = 0; a < k; ++a) {
    j.grad[a] = p.d1(a);
    for (int b = 0; b < k; ++b) {
      j.hess(a, b) = p.d2(a, b);
      for (int c = 0; c < k; ++c)
        j.third[static_cast<size_t>((a * k + b) * k + c)] = p.d3(a, b, c);
    }
  }
  return j;
}

inline Jet3 jet3(const Expr& e, const Eigen::VectorXd& vars) {
  std::vector<int> wrt(static_cast<size_t>(vars.size()));
  for (int i = 0; i < vars.size(); ++i) wrt[static_cast<size_t>(i)] = i;
  return jet3(e, vars, wrt);
}

// Central differences, step 1e-5 * (1 + |x|): the independent derivative path.
inline double fd_partial(const Expr& e, const Eigen::VectorXd& vars, int slot) {
  double h = 1e-5 * (1.0 + std::abs(vars[slot]));
  Eigen::VectorXd p = vars, m = vars;
  p[slot] += h;
  m[slot] -= h;
  return (e.eval(p) - e.eval(m)) / (2.0 * h);
}

inline double fd_partial2(const Expr& e, const Eigen::VectorXd& vars, int s1, int s2) {
  double h1 = 1e-5 * (1.0 + std::abs(vars[s1]));
  double h2 = 1e-5 * (1.0 + std::abs(vars[s2]));
  if (s1 == s2) {
    Eigen::VectorXd p = vars, m = vars;
    p[s1] += h1;
    m[s1] -= h1;
    return (e.eval(p) - 2.0 * e.eval(vars) + e.eval(m)) / (h1 * h1);
  }
  Eigen::VectorXd pp = vars, pm = vars, mp = vars, mm = vars;
  pp[s1] += h1; pp[s2] += h2;
  pm[s1] += h1; pm[s2] -= h2;
  mp[s1] -= h1; mp[s2] += h2;
  mm[s1] -= h1; mm[s2] -= h2;
  return (e.eval(pp) - e.eval(pm) - e.eval(mp) + e.eval(mm)) / (4.0 * h1 * h2);
}

}  // namespace twistgeo
