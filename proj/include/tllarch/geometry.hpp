#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "tllarch/types.hpp"

namespace tllarch {

/// Axis-aligned box with non-empty interior.
struct Box {
  Vec lower;
  Vec upper;

  Box() = default;
  Box(Vec lower_, Vec upper_);

  std::size_t dim() const { return lower.size(); }
  bool contains(std::span<const double> x, double tol = 0.0) const;

  /// Cartesian product, used for state/input boxes in system identification.
  static Box product(const Box& a, const Box& b);
};

/// Largest coordinate width of the box.
double extent(const Box& box);

/// Dense lookup table over the bounding box of a set of lattice offsets.
class LatticeIndex {
 public:
  LatticeIndex() = default;
  LatticeIndex(IndexVec lo, IndexVec hi);

  /// -1 when absent or out of range.
  std::int64_t get(std::span<const std::int64_t> key) const;
  void set(std::span<const std::int64_t> key, std::int64_t value);

 private:
  std::optional<std::size_t> slot(std::span<const std::int64_t> key) const;

  IndexVec lo_;
  IndexVec size_;
  std::vector<std::int64_t> table_;
};

/// Rectangular lattice of points anchor + eta * offset whose closed
/// max-norm eta-balls cover the domain box.
class EtaGrid {
 public:
  /// Validates lattice membership, containment in the domain and coverage.
  EtaGrid(double eta, Vec anchor, std::vector<IndexVec> offsets, Box domain);

  double eta() const { return eta_; }
  std::size_t dim() const { return anchor_.size(); }
  std::size_t size() const { return offsets_.size(); }
  const Vec& anchor() const { return anchor_; }
  const Box& domain() const { return domain_; }
  const std::vector<IndexVec>& offsets() const { return offsets_; }

  Vec point(std::size_t i) const { return lattice_point(offsets_[i]); }
  Vec lattice_point(std::span<const std::int64_t> offset) const;
  std::optional<std::size_t> find(std::span<const std::int64_t> offset) const;

  /// Exact covering test: every lattice cell meeting the interior of the
  /// domain must have a grid point among its corners.
  bool covers_domain() const;

 private:
  double eta_;
  Vec anchor_;
  std::vector<IndexVec> offsets_;
  Box domain_;
  IndexVec lo_, hi_;
  LatticeIndex index_;
};

/// Points at lower + h/2 + k*eta per axis with h = min(eta, width), using the
/// fewest points per axis that still cover the box.
EtaGrid build_eta_grid(const Box& domain, double eta);

/// Edge-eta cube with a grid corner `base` spanning base + eta * sum rho_i e_i.
/// `lower` is the lattice offset of the cube's minimal corner and identifies
/// the cube geometrically.
struct Hypercube {
  IndexVec lower;
  Vec base;
  std::vector<int> rho;

  std::vector<Vec> corners(double eta) const;
};

/// One cube per distinct lattice cell that has a grid corner, sorted
/// lexicographically by `lower`.
std::vector<Hypercube> interpolation_hypercubes(const EtaGrid& grid);

struct ExtraCorner {
  IndexVec offset;
  Vec coords;
  /// Grid point indices within closed max-norm distance eta.
  std::vector<std::size_t> neighbors;
};

using ExtraCornerSet = std::vector<ExtraCorner>;

ExtraCornerSet extra_corners(const EtaGrid& grid);
/// Throws OrphanCorner if some corner of `cubes` has no grid neighbor.
ExtraCornerSet extra_corners(const EtaGrid& grid, const std::vector<Hypercube>& cubes);

/// Zero-based permutation: sigma[k] is the coordinate holding the k-th
/// smallest value, so a simplex is {y : y[sigma[0]] <= ... <= y[sigma[n-1]]}.
using Permutation = std::vector<int>;

inline constexpr int kDefaultMaxDimension = 6;

/// All n! orderings in lexicographic order.
std::vector<Permutation> braid_simplices(int n, int max_dim = kDefaultMaxDimension);

/// Unit-cube vertices v_0 = 0, v_t = v_{t-1} + e_{sigma[n-t]}.
std::vector<std::vector<int>> simplex_vertices(const Permutation& sigma);

/// Stable ascending argsort (equal values keep ascending index order).
Permutation ascending_order(std::span<const double> y);

std::size_t permutation_rank(const Permutation& sigma);
Permutation permutation_unrank(std::size_t rank, int n);
std::size_t factorial(int n);

struct SimplexId {
  std::size_t cube = 0;
  Permutation sigma;

  friend bool operator==(const SimplexId&, const SimplexId&) = default;
};

struct SimplexLocation {
  SimplexId id;
  /// Coordinates normalized to the unit cube of the containing hypercube.
  Vec local;
};

/// Reference to a lattice corner: a grid point or an extra corner.
struct CornerRef {
  bool extra = false;
  std::size_t index = 0;
};

/// The grid together with its interpolation hypercubes, extra corners and
/// the braid dissection of each cube. Immutable after construction.
class Tiling {
 public:
  explicit Tiling(EtaGrid grid, int max_dim = kDefaultMaxDimension);

  const EtaGrid& grid() const { return grid_; }
  std::size_t dim() const { return grid_.dim(); }
  double eta() const { return grid_.eta(); }
  const std::vector<Hypercube>& cubes() const { return cubes_; }
  const ExtraCornerSet& extras() const { return extras_; }
  const std::vector<Permutation>& permutations() const { return perms_; }

  std::optional<std::size_t> cube_at(std::span<const std::int64_t> lower) const;
  CornerRef corner(std::span<const std::int64_t> offset) const;

  /// Lattice offsets of the n+1 vertices of a simplex, in path order.
  std::vector<IndexVec> simplex_offsets(std::size_t cube, const Permutation& sigma) const;
  std::vector<Vec> simplex_points(std::size_t cube, const Permutation& sigma) const;

  Vec local_coords(std::size_t cube, std::span<const double> x) const;

  /// Containing cube (lexicographically smallest `lower` on shared
  /// boundaries) and ordering of the normalized coordinates.
  SimplexLocation locate(std::span<const double> x) const;

  /// Axis-aligned hull of all cubes.
  Box cover_box() const;

 private:
  EtaGrid grid_;
  std::vector<Hypercube> cubes_;
  ExtraCornerSet extras_;
  std::vector<Permutation> perms_;
  LatticeIndex cube_index_;
  LatticeIndex corner_index_;
  IndexVec cube_lo_, cube_hi_;
};

SimplexId locate_simplex(std::span<const double> x, const Tiling& tiling);

}  // namespace tllarch
