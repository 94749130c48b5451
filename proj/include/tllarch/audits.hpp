#pragma once

#include <functional>
#include <optional>

#include "json.hpp"

#include "tllarch/integrator.hpp"
#include "tllarch/tll.hpp"

namespace tllarch {

/// Builds a fresh controller (or vector field) per worker, so stateful
/// evaluators such as TllEvaluator are never shared between threads.
using ControllerFactory = std::function<VectorFunction()>;
using FieldFactory = std::function<VectorField()>;

ControllerFactory share(VectorFunction fn);
ControllerFactory tll_controller(const TllNetwork& net);

struct InvarianceReport {
  std::size_t edge_samples = 0;
  std::size_t interior_samples = 0;
  std::size_t edge_violations = 0;
  std::size_t interior_violations = 0;
  bool pass = false;
  std::string note;
  nlohmann::json examples = nlohmann::json::array();

  nlohmann::json to_json() const;
};

/// Sampling audit of delta,tau positive invariance on a box: starts in the
/// delta-edge band must end strictly inside the delta-interior after tau, and
/// interior starts must stay there at every integration node.
InvarianceReport check_delta_tau_invariance(const ControlSystemModel& model, const ControllerFactory& controller,
                                            double delta, double tau, double step, std::size_t per_axis,
                                            std::size_t workers = 1);

struct DeviationReport {
  std::size_t probes = 0;
  double max_deviation = 0.0;
  Vec worst_start;
  double mu = 0.0;
  double bound = 0.0;
  double delta = 0.0;
  double tolerance = 0.0;
  /// Trajectories that left `region`, where the error mu was measured.
  std::size_t left_region = 0;
  bool pass = false;

  nlohmann::json to_json() const;
};

/// sup over probes of |endpoint(f, psi) - endpoint(f, upsilon)| against
/// min(delta, K_u mu tau e^{(K_x + K_u K_lip) tau}) + tolerance.
DeviationReport deviation_audit(const ControlSystemModel& model, const ControllerFactory& psi,
                                const ControllerFactory& upsilon, const std::vector<Vec>& probes, double tau,
                                double step, double mu, double k_lip, double delta, double tolerance,
                                std::optional<Box> region = std::nullopt, std::size_t workers = 1);

/// Same closed loop under the true and a surrogate vector field, against
/// K_u mu tau e^{(K_x + K_u K_cont) tau} + tolerance.
DeviationReport sysid_deviation_audit(const ControlSystemModel& model, const FieldFactory& surrogate,
                                      const ControllerFactory& psi, const std::vector<Vec>& probes, double tau,
                                      double step, double mu, double k_cont, double tolerance,
                                      std::optional<Box> region = std::nullopt, std::size_t workers = 1);

/// sup |a(p) - b(p)| over points.
double measure_sup_error(const std::function<Vec(std::span<const double>)>& a,
                         const std::function<Vec(std::span<const double>)>& b, const std::vector<Vec>& points,
                         std::size_t workers = 1);

struct Surrogate {
  CpwaInterpolant interp;
  TllNetwork net;
  Box domain;  // X x U
};

/// TLL interpolant of z = (x, u) -> f(x, u) on X x U.
Surrogate fit_vector_field_surrogate(const ControlSystemModel& model, double eta);

FieldFactory surrogate_field(const TllNetwork& net);

}  // namespace tllarch
