#pragma once

// Fixed-step numerics: classical RK4 integration and composite Simpson
// quadrature.  Both are deterministic given their inputs.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace twistgeo {

struct IntegrationBlowup : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct QuadratureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OdeTrajectory {
  Eigen::VectorXd times;   // n+1 samples including both ends
  Eigen::MatrixXd states;  // row per sample
};

// Classical fixed-step RK4.  Throws IntegrationBlowup if any state component
// exceeds `bound` (default 1e8) or turns non-finite.
inline OdeTrajectory integrate_ode(
    const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& y0, double t0, double t1, double step, double bound = 1e8) {
  if (!(step > 0.0) || !(t1 > t0)) throw std::invalid_argument("integrate_ode: need t1 > t0, step > 0");
  int n = std::max(1, static_cast<int>(std::ceil((t1 - t0) / step - 1e-12)));
  double h = (t1 - t0) / n;
  OdeTrajectory tr;
  tr.times.resize(n + 1);
  tr.states.resize(n + 1, y0.size());
  Eigen::VectorXd y = y0;
  tr.times[0] = t0;
  tr.states.row(0) = y.transpose();
  for (int i = 0; i < n; ++i) {
    double t = t0 + i * h;
    Eigen::VectorXd k1 = f(t, y);
    Eigen::VectorXd k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    Eigen::VectorXd k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    Eigen::VectorXd k4 = f(t + h, y + h * k3);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!y.allFinite() || y.cwiseAbs().maxCoeff() > bound)
      throw IntegrationBlowup("integrate_ode: state exceeded bound " + std::to_string(bound) +
                              " near t = " + std::to_string(t + h));
    tr.times[i + 1] = t + h;
    tr.states.row(i + 1) = y.transpose();
  }
  return tr;
}

// Composite Simpson with a fixed panel count; panels < 1 selects the default
// of 2000 panels per unit span (rounded up, at least 2).
inline double quad(const std::function<double(double)>& f, double a, double b, int panels = -1) {
  if (!(b > a)) throw QuadratureError("quad: need b > a");
  if (panels < 1) panels = std::max(2, static_cast<int>(std::ceil(2000.0 * (b - a))));
  if (panels % 2 == 1) ++panels;  // Simpson needs an even subdivision count
  double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  double out = s * h / 3.0;
  if (!std::isfinite(out)) throw QuadratureError("quad: non-finite integrand");
  return out;
}

}  // namespace twistgeo
