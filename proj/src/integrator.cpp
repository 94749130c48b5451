#include "tllarch/integrator.hpp"

#include <cmath>

#include "tllarch/error.hpp"

namespace tllarch {
namespace {

template <typename OnStep>
Vec rk4(const VectorField& f, const VectorFunction& controller, std::span<const double> x0, double tau, double step,
        OnStep&& on_step) {
  const std::size_t steps = step_count(tau, step);
  const double h = tau / static_cast<double>(steps);
  const std::size_t n = x0.size();
  Vec x(x0.begin(), x0.end());
  Vec tmp(n);
  auto stage = [&](std::span<const double> s, Vec& u_out) {
    u_out = controller(s);
    Vec k = f(s, u_out);
    if (k.size() != n || !all_finite(k)) throw Error(ErrorCode::NonFiniteState, "vector field returned non-finite values");
    return k;
  };
  Vec u1, u2, u3, u4;
  for (std::size_t s = 0; s < steps; ++s) {
    const Vec k1 = stage(x, u1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    const Vec k2 = stage(tmp, u2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    const Vec k3 = stage(tmp, u3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
    const Vec k4 = stage(tmp, u4);
    for (std::size_t i = 0; i < n; ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!all_finite(x)) throw Error(ErrorCode::NonFiniteState, "state blew up at step " + std::to_string(s));
    on_step(static_cast<double>(s + 1) * h, x, u1, u2, u3, u4);
  }
  return x;
}

}  // namespace

std::size_t step_count(double tau, double step) {
  if (!(tau > 0.0) || !std::isfinite(tau) || !(step > 0.0) || !std::isfinite(step)) {
    throw Error(ErrorCode::StepInvalid, "tau and step must be positive and finite");
  }
  const double ratio = tau / step;
  if (ratio > 1e8) throw Error(ErrorCode::StepInvalid, "step too small for tau");
  // Tolerate rounding when step divides tau.
  return static_cast<std::size_t>(std::max(1.0, std::ceil(ratio - 1e-9)));
}

Trajectory integrate_closed_loop(const VectorField& f, const VectorFunction& controller, std::span<const double> x0,
                                 double tau, double step) {
  if (!all_finite(x0)) throw Error(ErrorCode::NonFiniteState, "initial state is not finite");
  Trajectory traj;
  traj.step = tau / static_cast<double>(step_count(tau, step));
  traj.times.push_back(0.0);
  traj.states.emplace_back(x0.begin(), x0.end());
  rk4(f, controller, x0, tau, step,
      [&](double t, const Vec& x, const Vec& u1, const Vec& u2, const Vec& u3, const Vec& u4) {
        traj.times.push_back(t);
        traj.states.push_back(x);
        traj.controls.insert(traj.controls.end(), {u1, u2, u3, u4});
      });
  traj.times.back() = tau;
  return traj;
}

Vec flow_endpoint(const VectorField& f, const VectorFunction& controller, std::span<const double> x0, double tau,
                  double step) {
  if (!all_finite(x0)) throw Error(ErrorCode::NonFiniteState, "initial state is not finite");
  return rk4(f, controller, x0, tau, step, [](double, const Vec&, const Vec&, const Vec&, const Vec&, const Vec&) {});
}

}  // namespace tllarch
