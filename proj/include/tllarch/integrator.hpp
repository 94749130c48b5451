#pragma once

#include <vector>

#include "tllarch/models.hpp"

namespace tllarch {

struct Trajectory {
  double step = 0.0;
  std::vector<double> times;
  std::vector<Vec> states;
  /// Controls at the four RK stages of every step, in order.
  std::vector<Vec> controls;

  const Vec& endpoint() const { return states.back(); }
};

/// Number of RK4 steps over [0, tau]: tau/step rounded up, so the effective
/// step never exceeds the requested one.
std::size_t step_count(double tau, double step);

/// Classical RK4 with the controller evaluated at each stage state.
/// Throws StepInvalid for non-positive tau or step and NonFiniteState on
/// blow-up.
Trajectory integrate_closed_loop(const VectorField& f, const VectorFunction& controller, std::span<const double> x0,
                                 double tau, double step);

inline Trajectory integrate_closed_loop(const ControlSystemModel& model, const VectorFunction& controller,
                                        std::span<const double> x0, double tau, double step) {
  return integrate_closed_loop(model.f, controller, x0, tau, step);
}

/// Endpoint only, without storing the path.
Vec flow_endpoint(const VectorField& f, const VectorFunction& controller, std::span<const double> x0, double tau,
                  double step);

}  // namespace tllarch
