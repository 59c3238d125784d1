#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <type_traits>

#include "emff/error.hpp"

namespace emff {

// One classical 4th-order Runge-Kutta step. `rhs(t, y)` must return a vector
// of the same size as `y`.
template <typename Rhs>
Eigen::VectorXd rk4_step(const Rhs& rhs, double t, const Eigen::VectorXd& y,
                         double h) {
  if (!(h > 0.0)) throw Error("integration_blowup", "step size must be positive");
  auto check = [&](const Eigen::VectorXd& k, double ts) {
    if (!k.allFinite())
      throw Error("integration_blowup",
                  "non-finite derivative at t=" + std::to_string(ts));
  };
  Eigen::VectorXd k1 = rhs(t, y);
  check(k1, t);
  Eigen::VectorXd k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1);
  check(k2, t + 0.5 * h);
  Eigen::VectorXd k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2);
  check(k3, t + 0.5 * h);
  Eigen::VectorXd k4 = rhs(t + h, y + h * k3);
  check(k4, t + h);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct AdaptiveOptions {
  double rtol = 1e-6;
  double atol = 1e-8;
  // Optional per-component tolerances overriding the scalars (sized like the
  // state, or empty).
  Eigen::VectorXd rtol_vec;
  Eigen::VectorXd atol_vec;
  // Optional hard bound on the per-step change of each component (empty =
  // none). Unlike the error test, this cannot be fooled when both the coarse
  // and fine solutions jump together across a kink in the right-hand side.
  Eigen::VectorXd max_delta_vec;
  // Optional invariant guard: a scalar that the exact flow cannot take from
  // positive to negative (the surface guard = 0 is invariant). Steps whose
  // endpoint would cross downward are rejected so that integration error
  // cannot push the trajectory into a dynamically unreachable region.
  std::function<double(double, const Eigen::VectorXd&)> guard;
  // Landing inside [-guard_tol, 0) is accepted: when the flow hugs the
  // surface the guard value sits at its evaluation noise floor, and a zero
  // threshold would reject half of all steps on noise alone.
  double guard_tol = 0.0;
  double max_step = 1e-2;
  double min_step = 1e-9;
  double initial_step = 1e-2;
};

// Advances y from t0 to t1 with step-doubling error control: each step is
// compared against two half steps and halved until the elementwise error
// (scaled by atol + rtol*|y|) is acceptable. The closed loop is extremely
// stiff whenever the safety filter corrects along a nearly degenerate
// gradient direction, so steps span many orders of magnitude. When the
// trajectory slides along a constraint surface the right-hand side is
// effectively discontinuous and no step satisfies the error test; steps at
// min_step are accepted anyway, which bounds the chattering band instead of
// stalling.
template <typename Rhs>
Eigen::VectorXd rk4_adaptive_advance(const Rhs& rhs, double t0, double t1,
                                     Eigen::VectorXd y,
                                     const AdaptiveOptions& opt,
                                     double* h_inout) {
  double t = t0;
  double h = std::min(h_inout ? *h_inout : opt.initial_step, t1 - t0);
  while (t < t1) {
    const bool floored = h <= opt.min_step;
    h = std::min(std::max(h, opt.min_step), t1 - t);
    const Eigen::VectorXd coarse = rk4_step(rhs, t, y, h);
    Eigen::VectorXd fine = rk4_step(rhs, t, y, 0.5 * h);
    fine = rk4_step(rhs, t + 0.5 * h, fine, 0.5 * h);
    double err = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double rt = opt.rtol_vec.size() ? opt.rtol_vec[i] : opt.rtol;
      const double at = opt.atol_vec.size() ? opt.atol_vec[i] : opt.atol;
      const double scale = at + rt * std::abs(fine[i]);
      err = std::max(err, std::abs(fine[i] - coarse[i]) / (15.0 * scale));
    }
    if (opt.max_delta_vec.size()) {
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double jump = std::abs(fine[i] - y[i]);
        if (jump > opt.max_delta_vec[i])
          err = std::max(err, 32.0 * jump / opt.max_delta_vec[i]);
      }
    }
    if (opt.guard && err <= 1.0 && !floored &&
        opt.guard(t, y) > -opt.guard_tol &&
        opt.guard(t + h, fine) < -opt.guard_tol) {
      err = 32.0;  // downward crossing of the invariant surface: retry smaller
    }
    if (err <= 1.0 || floored) {
      t += h;
      y = std::move(fine);
      double grow = (err > 0.0) ? std::min(0.9 * std::pow(err, -0.2), 5.0) : 5.0;
      if (floored) grow = 1.5;  // keep probing for the end of a sliding phase
      h = std::min(h * grow, opt.max_step);
    } else {
      h *= std::max(0.9 * std::pow(err, -0.2), 0.1);
    }
  }
  if (h_inout) *h_inout = h;
  return y;
}

template <typename Rhs>
Eigen::VectorXd rk4_adaptive_advance(const Rhs& rhs, double t0, double t1,
                                     Eigen::VectorXd y,
                                     const AdaptiveOptions& opt = {}) {
  return rk4_adaptive_advance(rhs, t0, t1, std::move(y), opt, nullptr);
}

// Composite-Simpson average of g over [a, b] with n subintervals (n even).
// Works for any value type supporting scalar multiplication and addition.
template <typename G>
auto quadrature_average(const G& g, double a, double b, int n)
    -> std::decay_t<decltype(g(a))> {
  if (!(b > a)) throw Error("bad_panel_count", "interval must satisfy b > a");
  if (n < 2 || n % 2 != 0)
    throw Error("bad_panel_count", "Simpson rule needs an even n >= 2");
  using Value = std::decay_t<decltype(g(a))>;
  const double h = (b - a) / n;
  Value acc = g(a);
  acc += g(b);
  for (int k = 1; k < n; ++k) {
    const double w = (k % 2 == 1) ? 4.0 : 2.0;
    acc += w * g(a + k * h);
  }
  Value avg = (h / (3.0 * (b - a))) * acc;
  return avg;
}

// Central-difference gradient of a scalar function. `eps` may be a scalar
// applied to every coordinate or a per-coordinate vector.
inline Eigen::VectorXd finite_difference_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, const Eigen::VectorXd& eps) {
  Eigen::VectorXd grad(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double e = eps[i];
    xp[i] = x[i] + e;
    const double fp = f(xp);
    xp[i] = x[i] - e;
    const double fm = f(xp);
    xp[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw Error("fd_nonfinite", "non-finite evaluation in finite differences");
    grad[i] = (fp - fm) / (2.0 * e);
  }
  return grad;
}

inline Eigen::VectorXd finite_difference_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double eps) {
  if (!(eps > 0.0)) throw Error("fd_nonfinite", "eps must be positive");
  return finite_difference_gradient(
      f, x, Eigen::VectorXd::Constant(x.size(), eps));
}

}  // namespace emff
