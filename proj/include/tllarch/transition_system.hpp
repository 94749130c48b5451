#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "tllarch/integrator.hpp"

namespace tllarch {

struct Transition {
  std::size_t src = 0;
  std::string label;
  std::size_t dst = 0;

  friend bool operator==(const Transition&, const Transition&) = default;
  friend auto operator<=>(const Transition&, const Transition&) = default;
};

/// Finite transition system whose states carry coordinates in a shared
/// max-norm metric space. Transitions are kept sorted and unique.
class FiniteTransitionSystem {
 public:
  FiniteTransitionSystem() = default;
  FiniteTransitionSystem(std::vector<Vec> states, std::vector<Transition> transitions);

  const std::vector<Vec>& states() const { return states_; }
  const std::vector<Transition>& transitions() const { return transitions_; }
  std::size_t size() const { return states_.size(); }

  std::size_t add_state(Vec coords);
  void add_transition(std::size_t src, std::string label, std::size_t dst);

  /// Transitions leaving each state, as indices into transitions().
  std::vector<std::vector<std::size_t>> outgoing() const;
  bool is_deterministic() const;

  nlohmann::json to_json() const;
  static FiniteTransitionSystem from_json(const nlohmann::json& doc);

 private:
  void normalize();

  std::vector<Vec> states_;
  std::vector<Transition> transitions_;
};

/// Adds x -u-> y for every state y within delta of the target of an existing
/// x -u-> x'. Existing transitions are kept.
FiniteTransitionSystem perturb(const FiniteTransitionSystem& ts, double delta);

/// Same system with every label replaced by `label`.
FiniteTransitionSystem unify_labels(const FiniteTransitionSystem& ts, const std::string& label = "*");

/// Copy of `ts` extended with states at the given coordinates (no outgoing
/// transitions); coordinates already present are not duplicated.
FiniteTransitionSystem with_states(const FiniteTransitionSystem& ts, const std::vector<Vec>& coords);

using StatePair = std::pair<std::size_t, std::size_t>;

struct SimulationResult {
  /// Greatest relation satisfying the transfer condition, sorted.
  std::vector<StatePair> relation;
  /// Every left state is related to some right state.
  bool total = false;
  /// First left state without a partner, if any.
  std::optional<std::size_t> counterexample;
  std::size_t iterations = 0;

  nlohmann::json to_json() const;
};

/// Greatest simulation of `a` by `b` with matching labels, by fixpoint
/// refinement from all pairs, or only pairs within `distance_gate` when given.
SimulationResult check_simulation(const FiniteTransitionSystem& a, const FiniteTransitionSystem& b,
                                  std::optional<double> distance_gate = std::nullopt);

/// Abstract-disturbance simulation: pairs start at distance <= delta, the
/// left side moves in perturb(a, delta) and the right side may answer with a
/// transition under any label.
SimulationResult check_ads(const FiniteTransitionSystem& a, const FiniteTransitionSystem& b, double delta);

/// Opaque label for a control segment: FNV-1a over the stage controls
/// rounded to 1e-9.
std::string control_segment_label(const std::vector<Vec>& controls);

struct EmbedOptions {
  double tau = 0.1;
  double step = 0.001;
  /// Targets within this distance of a listed state are snapped to it;
  /// samples within it of each other are merged.
  double snap_tol = 0.0;
};

/// One closed-loop transition of duration tau from each distinct sample.
FiniteTransitionSystem embed_tau_sampled(const VectorField& f, const VectorFunction& controller,
                                         const std::vector<Vec>& samples, const EmbedOptions& options);

}  // namespace tllarch
