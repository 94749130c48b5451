#include "tllarch/transition_system.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "tllarch/error.hpp"
#include "tllarch/hexfloat.hpp"

namespace tllarch {

FiniteTransitionSystem::FiniteTransitionSystem(std::vector<Vec> states, std::vector<Transition> transitions)
    : states_(std::move(states)), transitions_(std::move(transitions)) {
  for (std::size_t k = 1; k < states_.size(); ++k) {
    if (states_[k].size() != states_[0].size()) throw Error(ErrorCode::DimensionMismatch, "state coordinates differ in length");
  }
  for (const auto& t : transitions_) {
    if (t.src >= states_.size() || t.dst >= states_.size()) {
      throw Error(ErrorCode::InvariantViolation, "transition endpoint is not a listed state");
    }
  }
  normalize();
}

void FiniteTransitionSystem::normalize() {
  std::sort(transitions_.begin(), transitions_.end());
  transitions_.erase(std::unique(transitions_.begin(), transitions_.end()), transitions_.end());
}

std::size_t FiniteTransitionSystem::add_state(Vec coords) {
  if (!states_.empty() && coords.size() != states_[0].size()) {
    throw Error(ErrorCode::DimensionMismatch, "state coordinates differ in length");
  }
  states_.push_back(std::move(coords));
  return states_.size() - 1;
}

void FiniteTransitionSystem::add_transition(std::size_t src, std::string label, std::size_t dst) {
  if (src >= states_.size() || dst >= states_.size()) {
    throw Error(ErrorCode::InvariantViolation, "transition endpoint is not a listed state");
  }
  Transition t{src, std::move(label), dst};
  auto it = std::lower_bound(transitions_.begin(), transitions_.end(), t);
  if (it == transitions_.end() || *it != t) transitions_.insert(it, std::move(t));
}

std::vector<std::vector<std::size_t>> FiniteTransitionSystem::outgoing() const {
  std::vector<std::vector<std::size_t>> out(states_.size());
  for (std::size_t k = 0; k < transitions_.size(); ++k) out[transitions_[k].src].push_back(k);
  return out;
}

bool FiniteTransitionSystem::is_deterministic() const {
  for (std::size_t k = 1; k < transitions_.size(); ++k) {
    if (transitions_[k].src == transitions_[k - 1].src && transitions_[k].label == transitions_[k - 1].label) {
      return false;
    }
  }
  return true;
}

nlohmann::json FiniteTransitionSystem::to_json() const {
  nlohmann::json states = nlohmann::json::array();
  for (std::size_t k = 0; k < states_.size(); ++k) states.push_back({{"id", k}, {"coords", hex_array(states_[k])}});
  nlohmann::json trans = nlohmann::json::array();
  for (const auto& t : transitions_) trans.push_back({{"src", t.src}, {"label", t.label}, {"dst", t.dst}});
  return {{"states", states}, {"transitions", trans}};
}

FiniteTransitionSystem FiniteTransitionSystem::from_json(const nlohmann::json& doc) {
  try {
    const auto& sj = doc.at("states");
    std::vector<Vec> states(sj.size());
    std::vector<bool> seen(sj.size(), false);
    for (const auto& s : sj) {
      const auto id = s.at("id").get<std::size_t>();
      if (id >= states.size() || seen[id]) throw Error(ErrorCode::SchemaError, "state ids must be 0..count-1 without repeats");
      seen[id] = true;
      states[id] = vec_from_json(s.at("coords"));
    }
    std::vector<Transition> trans;
    for (const auto& t : doc.at("transitions")) {
      std::string label = t.at("label").is_string() ? t.at("label").get<std::string>() : t.at("label").dump();
      trans.push_back({t.at("src").get<std::size_t>(), std::move(label), t.at("dst").get<std::size_t>()});
    }
    return FiniteTransitionSystem(std::move(states), std::move(trans));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
}

FiniteTransitionSystem perturb(const FiniteTransitionSystem& ts, double delta) {
  if (!(delta >= 0.0)) throw Error(ErrorCode::NonPositiveBudget, "delta must be >= 0");
  FiniteTransitionSystem out = ts;
  for (const auto& t : ts.transitions()) {
    const Vec& target = ts.states()[t.dst];
    for (std::size_t y = 0; y < ts.size(); ++y) {
      if (max_norm_distance(ts.states()[y], target) <= delta) out.add_transition(t.src, t.label, y);
    }
  }
  return out;
}

FiniteTransitionSystem unify_labels(const FiniteTransitionSystem& ts, const std::string& label) {
  std::vector<Transition> trans;
  for (auto t : ts.transitions()) {
    t.label = label;
    trans.push_back(std::move(t));
  }
  return FiniteTransitionSystem(ts.states(), std::move(trans));
}

FiniteTransitionSystem with_states(const FiniteTransitionSystem& ts, const std::vector<Vec>& coords) {
  FiniteTransitionSystem out = ts;
  for (const auto& c : coords) {
    const bool present = std::any_of(out.states().begin(), out.states().end(), [&](const Vec& s) { return s == c; });
    if (!present) out.add_state(c);
  }
  return out;
}

nlohmann::json SimulationResult::to_json() const {
  nlohmann::json rel = nlohmann::json::array();
  for (auto [x, y] : relation) rel.push_back({x, y});
  nlohmann::json j = {{"total", total}, {"relation", rel}, {"iterations", iterations},
                      {"verdict_scope", "audit on sampled abstraction"}};
  j["counterexample"] = counterexample ? nlohmann::json(*counterexample) : nlohmann::json(nullptr);
  return j;
}

namespace {

// Removes pairs violating the transfer condition until nothing changes.
SimulationResult refine(const FiniteTransitionSystem& a, const FiniteTransitionSystem& b,
                        std::vector<std::vector<char>> rel, bool match_labels) {
  const auto out_a = a.outgoing();
  const auto out_b = b.outgoing();
  SimulationResult res;
  bool changed = true;
  while (changed) {
    changed = false;
    ++res.iterations;
    for (std::size_t x = 0; x < a.size(); ++x) {
      for (std::size_t y = 0; y < b.size(); ++y) {
        if (!rel[x][y]) continue;
        bool ok = true;
        for (std::size_t ta : out_a[x]) {
          const Transition& t = a.transitions()[ta];
          bool answered = false;
          for (std::size_t tb : out_b[y]) {
            const Transition& s = b.transitions()[tb];
            if (match_labels && s.label != t.label) continue;
            if (rel[t.dst][s.dst]) {
              answered = true;
              break;
            }
          }
          if (!answered) {
            ok = false;
            break;
          }
        }
        if (!ok) {
          rel[x][y] = 0;
          changed = true;
        }
      }
    }
  }
  res.total = true;
  for (std::size_t x = 0; x < a.size(); ++x) {
    bool any = false;
    for (std::size_t y = 0; y < b.size(); ++y) {
      if (rel[x][y]) {
        res.relation.emplace_back(x, y);
        any = true;
      }
    }
    if (!any && res.total) {
      res.total = false;
      res.counterexample = x;
    }
  }
  return res;
}

std::vector<std::vector<char>> seed_pairs(const FiniteTransitionSystem& a, const FiniteTransitionSystem& b,
                                          std::optional<double> gate) {
  std::vector<std::vector<char>> rel(a.size(), std::vector<char>(b.size(), 1));
  if (gate) {
    for (std::size_t x = 0; x < a.size(); ++x) {
      for (std::size_t y = 0; y < b.size(); ++y) {
        rel[x][y] = max_norm_distance(a.states()[x], b.states()[y]) <= *gate ? 1 : 0;
      }
    }
  }
  return rel;
}

}  // namespace

SimulationResult check_simulation(const FiniteTransitionSystem& a, const FiniteTransitionSystem& b,
                                  std::optional<double> distance_gate) {
  return refine(a, b, seed_pairs(a, b, distance_gate), true);
}

SimulationResult check_ads(const FiniteTransitionSystem& a, const FiniteTransitionSystem& b, double delta) {
  const FiniteTransitionSystem pa = perturb(a, delta);
  return refine(pa, b, seed_pairs(pa, b, delta), false);
}

std::string control_segment_label(const std::vector<Vec>& controls) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](std::uint64_t v) {
    for (int k = 0; k < 8; ++k) {
      h ^= (v >> (8 * k)) & 0xffu;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& u : controls) {
    for (double v : u) mix(static_cast<std::uint64_t>(std::llround(v * 1e9)));
    mix(0x9e3779b97f4a7c15ULL);
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "u:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

FiniteTransitionSystem embed_tau_sampled(const VectorField& f, const VectorFunction& controller,
                                         const std::vector<Vec>& samples, const EmbedOptions& options) {
  FiniteTransitionSystem ts;
  auto nearest = [&](const Vec& p) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    double best_d = 0.0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
      const double d = max_norm_distance(ts.states()[k], p);
      if (d <= options.snap_tol && (!best || d < best_d)) {
        best = k;
        best_d = d;
      }
    }
    return best;
  };
  std::vector<std::size_t> sources;
  for (const auto& s : samples) {
    if (!nearest(s)) sources.push_back(ts.add_state(s));
  }
  for (std::size_t src : sources) {
    const Vec x0 = ts.states()[src];
    const Trajectory traj = integrate_closed_loop(f, controller, x0, options.tau, options.step);
    const std::string label = control_segment_label(traj.controls);
    const auto hit = nearest(traj.endpoint());
    const std::size_t dst = hit ? *hit : ts.add_state(traj.endpoint());
    ts.add_transition(src, label, dst);
  }
  return ts;
}

}  // namespace tllarch
