#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tllarch/geometry.hpp"

namespace tllarch {

using VectorField = std::function<Vec(std::span<const double> x, std::span<const double> u)>;

/// Continuous-time plant x' = f(x, u) with Lipschitz constants under the
/// max-norm on X x U: |f(x,u) - f(y,v)| <= K_x |x - y| + K_u |u - v|.
struct ControlSystemModel {
  std::string name;
  std::size_t n = 0;
  std::size_t m = 0;
  VectorField f;
  Box x_box;
  Box u_box;
  double k_x = 0.0;
  double k_u = 0.0;
  std::string constants_note;
  /// Exact flow under zero control, when known.
  std::function<Vec(std::span<const double> x0, double t)> zero_input_flow;
};

/// Damped pendulum x1' = x2, x2' = -sin x1 - 0.5 x2 + u on [-1,1]^2, U = [-2,2].
ControlSystemModel pendulum_model();
/// Controlled Van der Pol x1' = x2, x2' = (1 - x1^2) x2 - x1 + u on [-1,1]^2, U = [-1,1].
ControlSystemModel van_der_pol_model();
/// x' = a x + b u on [-1,1], U = [-1,1].
ControlSystemModel linear_model(double a = -1.0, double b = 1.0);

std::vector<ControlSystemModel> builtin_models();
std::optional<ControlSystemModel> find_model(const std::string& name);

/// Controllers shipped with the tool, keyed by name. Each entry records its
/// output dimension and a Lipschitz constant under the max-norm.
struct NamedController {
  std::string name;
  std::size_t n = 0;
  std::size_t m = 0;
  double k_lip = 0.0;
  VectorFunction fn;
};

/// -tanh(x1) - 0.5 tanh(x2), Lipschitz 1.5.
NamedController pendulum_stabilizer();
std::vector<NamedController> builtin_controllers();
std::optional<NamedController> find_controller(const std::string& name);

struct ModelLipschitzAudit {
  double worst_ratio = 0.0;  // max of |df| / (K_x |dx| + K_u |du|)
  std::size_t pairs = 0;
  bool pass = false;
};

/// Random pairs in X x U checked against the declared constants.
ModelLipschitzAudit audit_model_constants(const ControlSystemModel& model, std::size_t pairs, std::uint64_t seed);

}  // namespace tllarch
