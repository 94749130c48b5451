#include "tllarch/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "tllarch/error.hpp"

namespace tllarch {
namespace {

// Relative slack, in lattice index units, for treating a point as lying on a
// cell boundary.
constexpr double kIndexTol = 1e-9;

bool next_binary(std::vector<int>& bits) {
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == 0) {
      bits[i] = 1;
      return true;
    }
    bits[i] = 0;
  }
  return false;
}

std::vector<std::vector<int>> unit_corners(std::size_t n) {
  std::vector<std::vector<int>> out;
  std::vector<int> bits(n, 0);
  do {
    out.push_back(bits);
  } while (next_binary(bits));
  // Lexicographic order (first axis most significant) so that the first grid
  // corner found is the lexicographically smallest one.
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

Box::Box(Vec lower_, Vec upper_) : lower(std::move(lower_)), upper(std::move(upper_)) {
  if (lower.size() != upper.size() || lower.empty()) {
    throw Error(ErrorCode::DimensionMismatch, "box bounds must be non-empty and of equal length");
  }
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i])) {
      throw Error(ErrorCode::InvariantViolation,
                  "box needs finite lower < upper on axis " + std::to_string(i));
    }
  }
}

bool Box::contains(std::span<const double> x, double tol) const {
  if (x.size() != dim()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < lower[i] - tol || x[i] > upper[i] + tol) return false;
  }
  return true;
}

Box Box::product(const Box& a, const Box& b) {
  Vec lo = a.lower, hi = a.upper;
  lo.insert(lo.end(), b.lower.begin(), b.lower.end());
  hi.insert(hi.end(), b.upper.begin(), b.upper.end());
  return Box(std::move(lo), std::move(hi));
}

double extent(const Box& box) {
  double e = 0.0;
  for (std::size_t i = 0; i < box.dim(); ++i) e = std::max(e, box.upper[i] - box.lower[i]);
  return e;
}

LatticeIndex::LatticeIndex(IndexVec lo, IndexVec hi) : lo_(std::move(lo)) {
  size_.resize(lo_.size());
  std::size_t total = 1;
  for (std::size_t i = 0; i < lo_.size(); ++i) {
    size_[i] = hi[i] - lo_[i] + 1;
    if (size_[i] <= 0) throw Error(ErrorCode::InvariantViolation, "empty lattice index range");
    total *= static_cast<std::size_t>(size_[i]);
    if (total > (std::size_t{1} << 32)) {
      throw Error(ErrorCode::BudgetExceeded, "lattice index table too large");
    }
  }
  table_.assign(total, -1);
}

std::optional<std::size_t> LatticeIndex::slot(std::span<const std::int64_t> key) const {
  if (key.size() != lo_.size() || table_.empty()) return std::nullopt;
  std::size_t s = 0;
  for (std::size_t i = key.size(); i-- > 0;) {
    const std::int64_t k = key[i] - lo_[i];
    if (k < 0 || k >= size_[i]) return std::nullopt;
    s = s * static_cast<std::size_t>(size_[i]) + static_cast<std::size_t>(k);
  }
  return s;
}

std::int64_t LatticeIndex::get(std::span<const std::int64_t> key) const {
  const auto s = slot(key);
  return s ? table_[*s] : -1;
}

void LatticeIndex::set(std::span<const std::int64_t> key, std::int64_t value) {
  const auto s = slot(key);
  if (!s) throw Error(ErrorCode::InvariantViolation, "lattice key out of range");
  table_[*s] = value;
}

EtaGrid::EtaGrid(double eta, Vec anchor, std::vector<IndexVec> offsets, Box domain)
    : eta_(eta), anchor_(std::move(anchor)), offsets_(std::move(offsets)), domain_(std::move(domain)) {
  if (!(eta_ > 0.0) || !std::isfinite(eta_)) {
    throw Error(ErrorCode::NonPositiveEta, "eta must be positive and finite");
  }
  const std::size_t n = anchor_.size();
  if (n != domain_.dim()) throw Error(ErrorCode::DimensionMismatch, "anchor and domain dimensions differ");
  if (offsets_.empty()) throw Error(ErrorCode::CoverageInfeasible, "grid has no points");
  std::sort(offsets_.begin(), offsets_.end());
  offsets_.erase(std::unique(offsets_.begin(), offsets_.end()), offsets_.end());
  lo_ = offsets_.front();
  hi_ = offsets_.front();
  for (const auto& o : offsets_) {
    if (o.size() != n) throw Error(ErrorCode::DimensionMismatch, "offset has wrong dimension");
    for (std::size_t i = 0; i < n; ++i) {
      lo_[i] = std::min(lo_[i], o[i]);
      hi_[i] = std::max(hi_[i], o[i]);
    }
  }
  index_ = LatticeIndex(lo_, hi_);
  for (std::size_t k = 0; k < offsets_.size(); ++k) index_.set(offsets_[k], static_cast<std::int64_t>(k));

  const double tol = 1e-12 * std::max(1.0, extent(domain_));
  for (std::size_t k = 0; k < offsets_.size(); ++k) {
    if (!domain_.contains(point(k), tol)) {
      throw Error(ErrorCode::InvariantViolation, "grid point lies outside the domain");
    }
  }
  if (!covers_domain()) {
    throw Error(ErrorCode::CoverageInfeasible, "closed eta-balls do not cover the domain");
  }
}

Vec EtaGrid::lattice_point(std::span<const std::int64_t> offset) const {
  Vec p(anchor_.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = anchor_[i] + eta_ * static_cast<double>(offset[i]);
  return p;
}

std::optional<std::size_t> EtaGrid::find(std::span<const std::int64_t> offset) const {
  const std::int64_t k = index_.get(offset);
  if (k < 0) return std::nullopt;
  return static_cast<std::size_t>(k);
}

bool EtaGrid::covers_domain() const {
  // A point is covered iff the lattice cell containing it has a grid corner;
  // so the box is covered iff every cell meeting its interior has one.
  const std::size_t n = dim();
  IndexVec first(n), last(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = (domain_.lower[i] - anchor_[i]) / eta_;
    const double hi = (domain_.upper[i] - anchor_[i]) / eta_;
    // Cells [k, k+1] whose interior meets (lo, hi).
    first[i] = static_cast<std::int64_t>(std::floor(lo + kIndexTol));
    last[i] = static_cast<std::int64_t>(std::ceil(hi - kIndexTol)) - 1;
    if (last[i] < first[i]) last[i] = first[i];
  }
  const auto corners = unit_corners(n);
  IndexVec cell = first;
  IndexVec probe(n);
  while (true) {
    bool has_corner = false;
    for (const auto& c : corners) {
      for (std::size_t i = 0; i < n; ++i) probe[i] = cell[i] + c[i];
      if (index_.get(probe) >= 0) {
        has_corner = true;
        break;
      }
    }
    if (!has_corner) return false;
    std::size_t i = 0;
    for (; i < n; ++i) {
      if (++cell[i] <= last[i]) break;
      cell[i] = first[i];
    }
    if (i == n) return true;
  }
}

EtaGrid build_eta_grid(const Box& domain, double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw Error(ErrorCode::NonPositiveEta, "eta must be positive and finite");
  }
  const std::size_t n = domain.dim();
  Vec anchor(n);
  std::vector<std::int64_t> count(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = domain.upper[i] - domain.lower[i];
    const double h = std::min(eta, w);
    anchor[i] = domain.lower[i] + h / 2.0;
    // The last point sits at h/2 + (K-1)eta and must reach upper - eta.
    std::int64_t k = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(w / eta - 0.5)));
    while (anchor[i] + eta * static_cast<double>(k - 1) + eta < domain.upper[i]) ++k;
    while (k > 1 && anchor[i] + eta * static_cast<double>(k - 1) > domain.upper[i]) --k;
    count[i] = k;
  }
  std::size_t total = 1;
  for (auto c : count) {
    total *= static_cast<std::size_t>(c);
    if (total > (std::size_t{1} << 28)) throw Error(ErrorCode::BudgetExceeded, "grid too large");
  }
  std::vector<IndexVec> offsets;
  offsets.reserve(total);
  IndexVec o(n, 0);
  for (std::size_t k = 0; k < total; ++k) {
    offsets.push_back(o);
    for (std::size_t i = 0; i < n; ++i) {
      if (++o[i] < count[i]) break;
      o[i] = 0;
    }
  }
  return EtaGrid(eta, std::move(anchor), std::move(offsets), domain);
}

std::vector<Vec> Hypercube::corners(double eta) const {
  const std::size_t n = base.size();
  std::vector<Vec> out;
  for (const auto& z : unit_corners(n)) {
    Vec c = base;
    for (std::size_t i = 0; i < n; ++i) c[i] += eta * rho[i] * z[i];
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Hypercube> interpolation_hypercubes(const EtaGrid& grid) {
  const std::size_t n = grid.dim();
  const auto corners = unit_corners(n);
  std::set<IndexVec> cells;
  for (const auto& g : grid.offsets()) {
    for (const auto& c : corners) {
      IndexVec cell = g;
      for (std::size_t i = 0; i < n; ++i) cell[i] -= c[i];
      cells.insert(std::move(cell));
    }
  }
  std::vector<Hypercube> cubes;
  cubes.reserve(cells.size());
  IndexVec probe(n);
  for (const auto& cell : cells) {
    for (const auto& c : corners) {
      for (std::size_t i = 0; i < n; ++i) probe[i] = cell[i] + c[i];
      if (grid.find(probe)) {
        Hypercube h;
        h.lower = cell;
        h.base = grid.lattice_point(probe);
        h.rho.resize(n);
        for (std::size_t i = 0; i < n; ++i) h.rho[i] = c[i] == 0 ? 1 : -1;
        cubes.push_back(std::move(h));
        break;
      }
    }
  }
  return cubes;
}

ExtraCornerSet extra_corners(const EtaGrid& grid) {
  return extra_corners(grid, interpolation_hypercubes(grid));
}

ExtraCornerSet extra_corners(const EtaGrid& grid, const std::vector<Hypercube>& cubes) {
  const std::size_t n = grid.dim();
  const auto corners = unit_corners(n);
  std::set<IndexVec> seen;
  IndexVec probe(n);
  for (const auto& cube : cubes) {
    for (const auto& c : corners) {
      for (std::size_t i = 0; i < n; ++i) probe[i] = cube.lower[i] + c[i];
      if (!grid.find(probe)) seen.insert(probe);
    }
  }
  // Grid neighbors within closed distance eta are exactly the lattice points
  // at integer Chebyshev distance <= 1.
  std::vector<IndexVec> shifts;
  {
    IndexVec s(n, -1);
    while (true) {
      shifts.push_back(s);
      std::size_t i = 0;
      for (; i < n; ++i) {
        if (++s[i] <= 1) break;
        s[i] = -1;
      }
      if (i == n) break;
    }
  }
  ExtraCornerSet out;
  out.reserve(seen.size());
  for (const auto& offset : seen) {
    ExtraCorner e;
    e.offset = offset;
    e.coords = grid.lattice_point(offset);
    for (const auto& s : shifts) {
      for (std::size_t i = 0; i < n; ++i) probe[i] = offset[i] + s[i];
      if (auto k = grid.find(probe)) e.neighbors.push_back(*k);
    }
    if (e.neighbors.empty()) {
      throw Error(ErrorCode::OrphanCorner, "hypercube corner has no grid point within eta");
    }
    std::sort(e.neighbors.begin(), e.neighbors.end());
    out.push_back(std::move(e));
  }
  return out;
}

std::size_t factorial(int n) {
  std::size_t f = 1;
  for (int k = 2; k <= n; ++k) f *= static_cast<std::size_t>(k);
  return f;
}

std::vector<Permutation> braid_simplices(int n, int max_dim) {
  if (n < 1) throw Error(ErrorCode::DimensionMismatch, "dimension must be at least 1");
  if (n > max_dim) {
    throw Error(ErrorCode::DimensionTooLarge,
                "dimension " + std::to_string(n) + " exceeds cap " + std::to_string(max_dim));
  }
  Permutation p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  std::vector<Permutation> out;
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

std::vector<std::vector<int>> simplex_vertices(const Permutation& sigma) {
  const std::size_t n = sigma.size();
  std::vector<std::vector<int>> out;
  std::vector<int> v(n, 0);
  out.push_back(v);
  for (std::size_t t = 1; t <= n; ++t) {
    v[static_cast<std::size_t>(sigma[n - t])] = 1;
    out.push_back(v);
  }
  return out;
}

Permutation ascending_order(std::span<const double> y) {
  Permutation p(y.size());
  std::iota(p.begin(), p.end(), 0);
  std::stable_sort(p.begin(), p.end(), [&](int a, int b) { return y[a] < y[b]; });
  return p;
}

std::size_t permutation_rank(const Permutation& sigma) {
  const std::size_t n = sigma.size();
  std::size_t rank = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t smaller = 0;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (sigma[j] < sigma[i]) ++smaller;
    }
    rank += smaller * factorial(static_cast<int>(n - 1 - i));
  }
  return rank;
}

Permutation permutation_unrank(std::size_t rank, int n) {
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  Permutation p;
  for (int i = n; i >= 1; --i) {
    const std::size_t f = factorial(i - 1);
    const std::size_t k = rank / f;
    rank %= f;
    p.push_back(pool[k]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return p;
}

Tiling::Tiling(EtaGrid grid, int max_dim) : grid_(std::move(grid)) {
  const std::size_t n = grid_.dim();
  perms_ = braid_simplices(static_cast<int>(n), max_dim);
  cubes_ = interpolation_hypercubes(grid_);
  extras_ = extra_corners(grid_, cubes_);
  cube_lo_ = cubes_.front().lower;
  cube_hi_ = cubes_.front().lower;
  for (const auto& c : cubes_) {
    for (std::size_t i = 0; i < n; ++i) {
      cube_lo_[i] = std::min(cube_lo_[i], c.lower[i]);
      cube_hi_[i] = std::max(cube_hi_[i], c.lower[i]);
    }
  }
  cube_index_ = LatticeIndex(cube_lo_, cube_hi_);
  for (std::size_t k = 0; k < cubes_.size(); ++k) cube_index_.set(cubes_[k].lower, static_cast<std::int64_t>(k));
  IndexVec corner_hi = cube_hi_;
  for (auto& v : corner_hi) ++v;
  corner_index_ = LatticeIndex(cube_lo_, corner_hi);
  for (std::size_t k = 0; k < grid_.size(); ++k) {
    corner_index_.set(grid_.offsets()[k], static_cast<std::int64_t>(k));
  }
  for (std::size_t k = 0; k < extras_.size(); ++k) {
    corner_index_.set(extras_[k].offset, -static_cast<std::int64_t>(k) - 2);
  }
}

std::optional<std::size_t> Tiling::cube_at(std::span<const std::int64_t> lower) const {
  const std::int64_t k = cube_index_.get(lower);
  if (k < 0) return std::nullopt;
  return static_cast<std::size_t>(k);
}

CornerRef Tiling::corner(std::span<const std::int64_t> offset) const {
  const std::int64_t k = corner_index_.get(offset);
  if (k >= 0) return {false, static_cast<std::size_t>(k)};
  if (k <= -2) return {true, static_cast<std::size_t>(-k - 2)};
  throw Error(ErrorCode::OutsideDomain, "lattice point is not a hypercube corner");
}

std::vector<IndexVec> Tiling::simplex_offsets(std::size_t cube, const Permutation& sigma) const {
  std::vector<IndexVec> out;
  for (const auto& v : simplex_vertices(sigma)) {
    IndexVec o = cubes_[cube].lower;
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += v[i];
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<Vec> Tiling::simplex_points(std::size_t cube, const Permutation& sigma) const {
  std::vector<Vec> out;
  for (const auto& o : simplex_offsets(cube, sigma)) out.push_back(grid_.lattice_point(o));
  return out;
}

Vec Tiling::local_coords(std::size_t cube, std::span<const double> x) const {
  const std::size_t n = dim();
  Vec y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = (x[i] - grid_.anchor()[i]) / grid_.eta() - static_cast<double>(cubes_[cube].lower[i]);
  }
  return y;
}

SimplexLocation Tiling::locate(std::span<const double> x) const {
  const std::size_t n = dim();
  if (x.size() != n) throw Error(ErrorCode::DimensionMismatch, "point has wrong dimension");
  if (!all_finite(x)) throw Error(ErrorCode::OutsideDomain, "point is not finite");
  std::vector<std::vector<std::int64_t>> choices(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = (x[i] - grid_.anchor()[i]) / grid_.eta();
    const double k = std::round(r);
    if (std::abs(r - k) <= kIndexTol * std::max(1.0, std::abs(r))) {
      const auto ki = static_cast<std::int64_t>(k);
      choices[i] = {ki - 1, ki};
    } else {
      choices[i] = {static_cast<std::int64_t>(std::floor(r))};
    }
  }
  // Enumerate candidate cells in lexicographic order; first hit wins.
  std::vector<std::size_t> pick(n, 0);
  IndexVec cell(n);
  while (true) {
    for (std::size_t i = 0; i < n; ++i) cell[i] = choices[i][pick[i]];
    if (auto c = cube_at(cell)) {
      Vec y = local_coords(*c, x);
      for (auto& v : y) v = std::clamp(v, 0.0, 1.0);
      Permutation sigma = ascending_order(y);
      return {{*c, std::move(sigma)}, std::move(y)};
    }
    std::size_t i = n;
    while (i-- > 0) {
      if (++pick[i] < choices[i].size()) break;
      pick[i] = 0;
    }
    if (i == static_cast<std::size_t>(-1)) break;
  }
  throw Error(ErrorCode::OutsideDomain, "point lies outside every interpolation hypercube");
}

Box Tiling::cover_box() const {
  const std::size_t n = dim();
  Vec lo(n), hi(n);
  for (std::size_t i = 0; i < n; ++i) {
    lo[i] = grid_.anchor()[i] + grid_.eta() * static_cast<double>(cube_lo_[i]);
    hi[i] = grid_.anchor()[i] + grid_.eta() * static_cast<double>(cube_hi_[i] + 1);
  }
  return Box(std::move(lo), std::move(hi));
}

SimplexId locate_simplex(std::span<const double> x, const Tiling& tiling) {
  return tiling.locate(x).id;
}

}  // namespace tllarch
