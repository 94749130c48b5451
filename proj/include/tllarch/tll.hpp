#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

#include "tllarch/cpwa.hpp"

namespace tllarch {

/// One output of a two-level lattice: out(x) = max_k min_{i in selectors[k]} bank[i](x).
struct ScalarTll {
  std::vector<AffinePiece> bank;
  std::vector<std::vector<std::uint32_t>> selectors;

  double eval(std::span<const double> x) const;
};

struct TllProvenance {
  double eta = 0.0;
  double k_cont = 0.0;
  std::uint64_t bound_n = 0;
};

struct TllNetwork {
  std::size_t n = 0;
  std::vector<ScalarTll> outputs;
  TllProvenance provenance;

  std::size_t m() const { return outputs.size(); }
  /// Largest sum |w_i| over all bank entries and outputs.
  double max_gradient_norm() const;
};

struct LatticeOptions {
  /// Drop duplicate selector sets and any set containing another one. Both
  /// leave the max-of-mins unchanged.
  bool prune = true;
  double dominance_tol = 1e-9;
};

/// Lattice form of a CPWA function given as one affine piece per region and
/// each region's vertex set. Pieces are deduplicated by rounding to 1e-12;
/// region k contributes the selector {i : bank[i] >= piece_k - tol at every
/// vertex of region k}.
ScalarTll compile_lattice(const std::vector<AffinePiece>& pieces, const std::vector<std::vector<Vec>>& vertices,
                          const LatticeOptions& options = {});

ScalarTll compile_scalar_tll(const CpwaInterpolant& interp, std::size_t output, const LatticeOptions& options = {});

/// Every output compiled and composed in parallel; provenance filled from
/// the interpolant and `bound_n`.
TllNetwork compile_tll(const CpwaInterpolant& interp, std::uint64_t bound_n, const LatticeOptions& options = {});

/// Stacks single- or multi-output networks sharing an input dimension.
TllNetwork parallel_compose(const std::vector<TllNetwork>& nets);

Vec eval_tll(const TllNetwork& net, std::span<const double> x);

/// Evaluator for repeated nearby queries (closed-loop integration). It starts
/// each query from the selector set that won last time, and tests first the
/// member that ended each set's scan last time. Results are identical to
/// eval_tll. Not thread-safe; use one per thread.
class TllEvaluator {
 public:
  explicit TllEvaluator(const TllNetwork& net);
  Vec operator()(std::span<const double> x);

 private:
  const TllNetwork* net_;
  std::vector<std::size_t> last_winner_;
  std::vector<std::vector<std::uint32_t>> witness_;
  Vec values_;
};

struct ArchDescriptor {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<std::size_t> bank_sizes;      // N per output
  std::vector<std::size_t> selector_counts; // M per output
  /// Input n, hidden ReLU widths, output m.
  std::vector<std::size_t> layers;
  std::size_t neurons = 0;

  nlohmann::json to_json() const;
};

/// Hidden widths of the ReLU expansion per output: balanced pairwise min
/// trees over each selector set, then a balanced max tree over the set
/// minima. A 2-input gadget costs 3 ReLUs, carrying a value costs 2.
std::vector<std::size_t> relu_widths(const ScalarTll& out);

/// Throws BoundViolated if some output's N exceeds `bound_n`.
ArchDescriptor arch_descriptor(const TllNetwork& net, std::uint64_t bound_n);

struct DenseLayer {
  std::vector<Vec> weights;  // rows = outputs
  Vec bias;
  bool relu = true;
};

/// Materializes the ReLU expansion whose shapes arch_descriptor reports.
/// Refuses networks with more than `max_neurons` hidden units.
std::vector<DenseLayer> expand_relu(const TllNetwork& net, std::size_t max_neurons = 200000);
Vec eval_dense(const std::vector<DenseLayer>& layers, std::span<const double> x);

nlohmann::json export_network(const TllNetwork& net);
/// Throws SchemaError on malformed input and InvariantViolation on
/// out-of-range selectors, empty banks or sets, or dimension mismatches.
TllNetwork import_network(const nlohmann::json& doc);

}  // namespace tllarch
