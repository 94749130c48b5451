#include "tllarch/models.hpp"

#include <cmath>
#include <random>

namespace tllarch {

ControlSystemModel pendulum_model() {
  ControlSystemModel m;
  m.name = "pendulum";
  m.n = 2;
  m.m = 1;
  m.f = [](std::span<const double> x, std::span<const double> u) {
    return Vec{x[1], -std::sin(x[0]) - 0.5 * x[1] + u[0]};
  };
  m.x_box = Box({-1.0, -1.0}, {1.0, 1.0});
  m.u_box = Box({-2.0}, {2.0});
  // Jacobian rows (0, 1) and (-cos x1, -0.5): row sums at most 1 and 1.5.
  m.k_x = 1.5;
  m.k_u = 1.0;
  m.constants_note = "K_x = max row sum of |df/dx| = |cos x1| + 0.5 <= 1.5; K_u = 1";
  return m;
}

ControlSystemModel van_der_pol_model() {
  ControlSystemModel m;
  m.name = "vanderpol";
  m.n = 2;
  m.m = 1;
  m.f = [](std::span<const double> x, std::span<const double> u) {
    return Vec{x[1], (1.0 - x[0] * x[0]) * x[1] - x[0] + u[0]};
  };
  m.x_box = Box({-1.0, -1.0}, {1.0, 1.0});
  m.u_box = Box({-1.0}, {1.0});
  // Second row (-2 x1 x2 - 1, 1 - x1^2): |1 + 2 x1 x2| + 1 - x1^2 <= 2 + 2|x1| - x1^2 <= 3.
  m.k_x = 3.0;
  m.k_u = 1.0;
  m.constants_note = "K_x = max over the box of |1 + 2 x1 x2| + |1 - x1^2| = 3 at |x1| = |x2| = 1; K_u = 1";
  return m;
}

ControlSystemModel linear_model(double a, double b) {
  ControlSystemModel m;
  m.name = "linear";
  m.n = 1;
  m.m = 1;
  m.f = [a, b](std::span<const double> x, std::span<const double> u) { return Vec{a * x[0] + b * u[0]}; };
  m.x_box = Box({-1.0}, {1.0});
  m.u_box = Box({-1.0}, {1.0});
  m.k_x = std::abs(a);
  m.k_u = std::abs(b);
  m.constants_note = "K_x = |a|, K_u = |b|";
  m.zero_input_flow = [a](std::span<const double> x0, double t) { return Vec{x0[0] * std::exp(a * t)}; };
  return m;
}

std::vector<ControlSystemModel> builtin_models() {
  return {pendulum_model(), van_der_pol_model(), linear_model()};
}

std::optional<ControlSystemModel> find_model(const std::string& name) {
  for (auto& m : builtin_models()) {
    if (m.name == name) return m;
  }
  return std::nullopt;
}

NamedController pendulum_stabilizer() {
  return {"pendulum-stabilizer", 2, 1, 1.5,
          [](std::span<const double> x) { return Vec{-std::tanh(x[0]) - 0.5 * std::tanh(x[1])}; }};
}

std::vector<NamedController> builtin_controllers() {
  return {
      pendulum_stabilizer(),
      {"vanderpol-damper", 2, 1, 1.0, [](std::span<const double> x) { return Vec{-x[1]}; }},
      {"linear-feedback", 1, 1, 0.5, [](std::span<const double> x) { return Vec{-0.5 * x[0]}; }},
      {"zero-2d", 2, 1, 1.0, [](std::span<const double>) { return Vec{0.0}; }},
      {"zero-1d", 1, 1, 1.0, [](std::span<const double>) { return Vec{0.0}; }},
  };
}

std::optional<NamedController> find_controller(const std::string& name) {
  for (auto& c : builtin_controllers()) {
    if (c.name == name) return c;
  }
  return std::nullopt;
}

ModelLipschitzAudit audit_model_constants(const ControlSystemModel& model, std::size_t pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto sample = [&](const Box& b) {
    Vec v(b.dim());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = b.lower[i] + unit(rng) * (b.upper[i] - b.lower[i]);
    return v;
  };
  ModelLipschitzAudit out;
  out.pairs = pairs;
  for (std::size_t k = 0; k < pairs; ++k) {
    const Vec x = sample(model.x_box), y = sample(model.x_box);
    const Vec u = sample(model.u_box), v = sample(model.u_box);
    const double lhs = max_norm_distance(model.f(x, u), model.f(y, v));
    const double rhs = model.k_x * max_norm_distance(x, y) + model.k_u * max_norm_distance(u, v);
    if (rhs > 0.0) out.worst_ratio = std::max(out.worst_ratio, lhs / rhs);
  }
  out.pass = out.worst_ratio <= 1.0 + 1e-12;
  return out;
}

}  // namespace tllarch
