#include "tllarch/audits.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "tllarch/error.hpp"
#include "tllarch/probes.hpp"
#include "tllarch/sizing.hpp"

namespace tllarch {
namespace {

bool strictly_inside(const Box& box, double delta, std::span<const double> x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > box.lower[i] + delta && x[i] < box.upper[i] - delta)) return false;
  }
  return true;
}

std::vector<Vec> edge_samples(const Box& box, double delta, std::size_t per_axis) {
  const std::size_t n = box.dim();
  const double insets[] = {0.0, delta / 2.0, delta * (1.0 - 1e-9)};
  std::vector<Vec> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Vec> face;
    if (n == 1) {
      face.push_back(Vec{});
    } else {
      Vec lo, hi;
      for (std::size_t k = 0; k < n; ++k) {
        if (k == i) continue;
        lo.push_back(box.lower[k]);
        hi.push_back(box.upper[k]);
      }
      face = probe_lattice(Box(lo, hi), per_axis);
    }
    for (int side = 0; side < 2; ++side) {
      for (double inset : insets) {
        for (const auto& f : face) {
          Vec p(n);
          std::size_t fk = 0;
          for (std::size_t k = 0; k < n; ++k) {
            if (k == i) {
              p[k] = side == 0 ? box.lower[k] + inset : box.upper[k] - inset;
            } else {
              p[k] = f[fk++];
            }
          }
          out.push_back(std::move(p));
        }
      }
    }
  }
  return out;
}

}  // namespace

ControllerFactory share(VectorFunction fn) {
  auto shared = std::make_shared<VectorFunction>(std::move(fn));
  return [shared] { return *shared; };
}

ControllerFactory tll_controller(const TllNetwork& net) {
  auto shared = std::make_shared<TllNetwork>(net);
  return [shared]() -> VectorFunction {
    auto ev = std::make_shared<TllEvaluator>(*shared);
    return [shared, ev](std::span<const double> x) { return (*ev)(x); };
  };
}

nlohmann::json InvarianceReport::to_json() const {
  nlohmann::json j = {{"edge_samples", edge_samples},
                      {"interior_samples", interior_samples},
                      {"edge_violations", edge_violations},
                      {"interior_violations", interior_violations},
                      {"pass", pass},
                      {"scope", "sampling-based audit, not a proof"},
                      {"examples", examples}};
  if (!note.empty()) j["note"] = note;
  return j;
}

InvarianceReport check_delta_tau_invariance(const ControlSystemModel& model, const ControllerFactory& controller,
                                            double delta, double tau, double step, std::size_t per_axis,
                                            std::size_t workers) {
  InvarianceReport rep;
  const Box& box = model.x_box;
  double min_width = box.upper[0] - box.lower[0];
  for (std::size_t i = 0; i < box.dim(); ++i) min_width = std::min(min_width, box.upper[i] - box.lower[i]);
  if (!(delta > 0.0)) throw Error(ErrorCode::NonPositiveBudget, "delta must be positive");
  if (delta >= min_width / 2.0) {
    rep.note = "EdgeConsumesDomain: the delta-edge band covers the whole box";
    rep.pass = false;
    return rep;
  }
  const std::vector<Vec> edge = edge_samples(box, delta, per_axis);
  const double inset = delta * (1.0 + 1e-6);
  Vec lo(box.dim()), hi(box.dim());
  for (std::size_t i = 0; i < box.dim(); ++i) {
    lo[i] = box.lower[i] + inset;
    hi[i] = box.upper[i] - inset;
  }
  const std::vector<Vec> interior = probe_lattice(Box(lo, hi), per_axis);
  rep.edge_samples = edge.size();
  rep.interior_samples = interior.size();

  std::vector<char> edge_bad(edge.size(), 0), interior_bad(interior.size(), 0);
  parallel_for(edge.size(), workers, [&](std::size_t k) {
    const Vec end = flow_endpoint(model.f, controller(), edge[k], tau, step);
    edge_bad[k] = strictly_inside(box, delta, end) ? 0 : 1;
  });
  parallel_for(interior.size(), workers, [&](std::size_t k) {
    const Trajectory t = integrate_closed_loop(model, controller(), interior[k], tau, step);
    for (const auto& s : t.states) {
      if (!strictly_inside(box, delta, s)) {
        interior_bad[k] = 1;
        break;
      }
    }
  });
  for (std::size_t k = 0; k < edge.size(); ++k) {
    if (!edge_bad[k]) continue;
    ++rep.edge_violations;
    if (rep.examples.size() < 5) rep.examples.push_back({{"kind", "edge"}, {"start", edge[k]}});
  }
  for (std::size_t k = 0; k < interior.size(); ++k) {
    if (!interior_bad[k]) continue;
    ++rep.interior_violations;
    if (rep.examples.size() < 10) rep.examples.push_back({{"kind", "interior"}, {"start", interior[k]}});
  }
  rep.pass = rep.edge_violations == 0 && rep.interior_violations == 0;
  return rep;
}

nlohmann::json DeviationReport::to_json() const {
  return {{"probes", probes},       {"max_deviation", max_deviation}, {"worst_start", worst_start},
          {"mu", mu},               {"bound", bound},                 {"delta", delta},
          {"tolerance", tolerance}, {"left_region", left_region},     {"pass", pass}};
}

namespace {

DeviationReport run_pairs(const std::vector<Vec>& probes, std::size_t workers, const std::optional<Box>& region,
                          const std::function<std::pair<Trajectory, Trajectory>(const Vec&)>& run) {
  DeviationReport rep;
  rep.probes = probes.size();
  std::vector<double> dev(probes.size(), 0.0);
  std::vector<char> left(probes.size(), 0);
  parallel_for(probes.size(), workers, [&](std::size_t k) {
    const auto [a, b] = run(probes[k]);
    dev[k] = max_norm_distance(a.endpoint(), b.endpoint());
    if (region) {
      for (const auto* t : {&a, &b}) {
        for (const auto& s : t->states) {
          if (!region->contains(s)) left[k] = 1;
        }
      }
    }
  });
  for (std::size_t k = 0; k < probes.size(); ++k) {
    if (dev[k] >= rep.max_deviation) {
      rep.max_deviation = dev[k];
      rep.worst_start = probes[k];
    }
    rep.left_region += left[k] ? 1 : 0;
  }
  return rep;
}

}  // namespace

DeviationReport deviation_audit(const ControlSystemModel& model, const ControllerFactory& psi,
                                const ControllerFactory& upsilon, const std::vector<Vec>& probes, double tau,
                                double step, double mu, double k_lip, double delta, double tolerance,
                                std::optional<Box> region, std::size_t workers) {
  DeviationReport rep = run_pairs(probes, workers, region, [&](const Vec& x0) {
    return std::make_pair(integrate_closed_loop(model, psi(), x0, tau, step),
                          integrate_closed_loop(model, upsilon(), x0, tau, step));
  });
  rep.mu = mu;
  rep.bound = gronwall_bound(mu, model.k_x, model.k_u, k_lip, tau);
  rep.delta = delta;
  rep.tolerance = tolerance;
  rep.pass = rep.max_deviation <= std::min(delta, rep.bound) + tolerance;
  return rep;
}

DeviationReport sysid_deviation_audit(const ControlSystemModel& model, const FieldFactory& surrogate,
                                      const ControllerFactory& psi, const std::vector<Vec>& probes, double tau,
                                      double step, double mu, double k_cont, double tolerance,
                                      std::optional<Box> region, std::size_t workers) {
  DeviationReport rep = run_pairs(probes, workers, region, [&](const Vec& x0) {
    return std::make_pair(integrate_closed_loop(model.f, psi(), x0, tau, step),
                          integrate_closed_loop(surrogate(), psi(), x0, tau, step));
  });
  rep.mu = mu;
  rep.bound = sysid_budget(mu, model.k_x, model.k_u, k_cont, tau);
  rep.delta = rep.bound;
  rep.tolerance = tolerance;
  rep.pass = rep.max_deviation <= rep.bound + tolerance;
  return rep;
}

double measure_sup_error(const std::function<Vec(std::span<const double>)>& a,
                         const std::function<Vec(std::span<const double>)>& b, const std::vector<Vec>& points,
                         std::size_t workers) {
  std::vector<double> err(points.size(), 0.0);
  parallel_for(points.size(), workers, [&](std::size_t k) { err[k] = max_norm_distance(a(points[k]), b(points[k])); });
  return err.empty() ? 0.0 : *std::max_element(err.begin(), err.end());
}

Surrogate fit_vector_field_surrogate(const ControlSystemModel& model, double eta) {
  const Box domain = Box::product(model.x_box, model.u_box);
  const std::size_t n = model.n;
  VectorFunction g = [&model, n](std::span<const double> z) { return model.f(z.first(n), z.subspan(n)); };
  CpwaInterpolant interp = build_interpolant(g, domain, eta, n, model.k_x + model.k_u);
  const auto bound = sysid_size(static_cast<int>(n), static_cast<int>(model.m), extent(domain), eta);
  const std::uint64_t bound_n =
      bound.exact > BigInt(std::numeric_limits<std::uint64_t>::max()) ? std::numeric_limits<std::uint64_t>::max()
                                                                       : bound.exact.convert_to<std::uint64_t>();
  TllNetwork net = compile_tll(interp, bound_n);
  return {std::move(interp), std::move(net), domain};
}

FieldFactory surrogate_field(const TllNetwork& net) {
  auto shared = std::make_shared<TllNetwork>(net);
  return [shared]() -> VectorField {
    auto ev = std::make_shared<TllEvaluator>(*shared);
    return [shared, ev](std::span<const double> x, std::span<const double> u) {
      Vec z(x.begin(), x.end());
      z.insert(z.end(), u.begin(), u.end());
      return (*ev)(z);
    };
  };
}

}  // namespace tllarch
