#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "json.hpp"

#include "tllarch/geometry.hpp"

namespace tllarch {

/// Controller samples: values[j][i] is output j at grid point i.
struct OmegaVector {
  std::vector<Vec> values;

  std::size_t outputs() const { return values.size(); }
};

/// Evaluates the oracle at every grid point; any exception, wrong output
/// size or non-finite value becomes OracleFailure.
OmegaVector sample_controller(const VectorFunction& oracle, const EtaGrid& grid, std::size_t m);

/// Per output, the min of omega over each extra corner's grid neighbors.
/// Result is indexed [output][extra corner].
std::vector<Vec> extend_extra_corners(const OmegaVector& omega, const ExtraCornerSet& extras);

struct AffinePiece {
  Vec w;
  double b = 0.0;

  double eval(std::span<const double> x) const;
  /// Sum of |w_i|: the Lipschitz constant of the piece under the max-norm.
  double dual_norm() const;
};

/// Solves the square system A z = rhs by partial-pivot Gaussian elimination.
/// Throws SingularSystem on a vanishing pivot or a residual above 1e-9
/// relative.
Vec solve_linear(std::vector<Vec> a, Vec rhs);

/// Affine function through n+1 (vertex, value) pairs.
AffinePiece affine_piece(const std::vector<Vec>& vertices, std::span<const double> values);

/// Same on the unit-cube braid simplex identified by sigma.
AffinePiece affine_piece(const Permutation& sigma, std::span<const double> values);

/// Continuous piecewise-affine interpolant on the braid-dissected tiling.
/// Affine pieces for every (cube, simplex, output) are solved at build time.
class CpwaInterpolant {
 public:
  /// Extra-corner values follow the neighbor-min rule.
  CpwaInterpolant(std::shared_ptr<const Tiling> tiling, OmegaVector omega, double k_cont);
  /// Extra-corner values supplied explicitly, indexed [output][extra corner].
  CpwaInterpolant(std::shared_ptr<const Tiling> tiling, OmegaVector omega,
                  std::vector<Vec> extra_values, double k_cont);

  const Tiling& tiling() const { return *tiling_; }
  std::shared_ptr<const Tiling> tiling_ptr() const { return tiling_; }
  const OmegaVector& omega() const { return omega_; }
  const std::vector<Vec>& extra_values() const { return extra_values_; }
  double k_cont() const { return k_cont_; }
  std::size_t dim() const { return tiling_->dim(); }
  std::size_t outputs() const { return omega_.outputs(); }
  std::size_t simplex_count() const { return tiling_->cubes().size() * tiling_->permutations().size(); }

  double corner_value(CornerRef ref, std::size_t output) const;
  double corner_value(std::span<const std::int64_t> offset, std::size_t output) const;

  const AffinePiece& piece(std::size_t cube, std::size_t rank, std::size_t output) const {
    return pieces_[(cube * perms_ + rank) * outputs() + output];
  }

  Vec eval(std::span<const double> x) const;
  double eval(std::span<const double> x, std::size_t output) const;

  /// Copy with one piece shifted by `offset`; used to exercise audits.
  CpwaInterpolant with_corrupted_piece(std::size_t cube, std::size_t rank, std::size_t output,
                                       double offset) const;

 private:
  void build_pieces();

  std::shared_ptr<const Tiling> tiling_;
  OmegaVector omega_;
  std::vector<Vec> extra_values_;
  double k_cont_;
  std::size_t perms_ = 0;
  std::vector<AffinePiece> pieces_;
};

CpwaInterpolant build_interpolant(const VectorFunction& oracle, const Box& domain, double eta,
                                  std::size_t m, double k_cont, int max_dim = kDefaultMaxDimension);

/// Number of distinct affine pieces per output (coefficients compared after
/// rounding to 1e-12).
std::vector<std::size_t> region_count(const CpwaInterpolant& interp);

struct AuditReport {
  std::string metric;
  double value = 0.0;
  double bound = 0.0;
  bool pass = false;
  std::uint64_t seed = 0;
  nlohmann::json details = nlohmann::json::object();

  nlohmann::json to_json() const;
};

/// Max over pieces and outputs of sum |w_i| against 3 * K_cont. Throws
/// BudgetExceeded naming the offending simplex when `throw_on_fail`.
AuditReport lipschitz_audit(const CpwaInterpolant& interp, bool throw_on_fail = true);

/// Samples every shared face between neighboring simplices (inside a cube
/// and across cube faces) and compares the two adjacent pieces. Throws
/// DiscontinuityDetected when the largest jump exceeds `tol` and
/// `throw_on_fail`.
AuditReport continuity_audit(const CpwaInterpolant& interp, std::size_t samples_per_face,
                             double tol = 1e-9, std::uint64_t seed = 0, bool throw_on_fail = true);

/// sup |interp - oracle| over the probes, against `bound`.
AuditReport approximation_audit(const CpwaInterpolant& interp, const VectorFunction& oracle,
                                const std::vector<Vec>& probes, double bound, std::uint64_t seed,
                                std::size_t workers = 1);

}  // namespace tllarch
