#include "tllarch/cpwa.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "tllarch/error.hpp"
#include "tllarch/probes.hpp"

namespace tllarch {

OmegaVector sample_controller(const VectorFunction& oracle, const EtaGrid& grid, std::size_t m) {
  OmegaVector omega;
  omega.values.assign(m, Vec(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec x = grid.point(i);
    Vec u;
    try {
      u = oracle(x);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::OracleFailure, "oracle raised at grid point " + std::to_string(i) + ": " + e.what());
    }
    if (u.size() != m) {
      throw Error(ErrorCode::OracleFailure, "oracle returned " + std::to_string(u.size()) +
                                                " outputs, expected " + std::to_string(m));
    }
    if (!all_finite(u)) {
      throw Error(ErrorCode::OracleFailure, "oracle returned a non-finite value at grid point " +
                                                std::to_string(i));
    }
    for (std::size_t j = 0; j < m; ++j) omega.values[j][i] = u[j];
  }
  return omega;
}

std::vector<Vec> extend_extra_corners(const OmegaVector& omega, const ExtraCornerSet& extras) {
  std::vector<Vec> out(omega.outputs(), Vec(extras.size()));
  for (std::size_t e = 0; e < extras.size(); ++e) {
    if (extras[e].neighbors.empty()) {
      throw Error(ErrorCode::OrphanCorner, "extra corner " + std::to_string(e) + " has no neighbors");
    }
    for (std::size_t j = 0; j < omega.outputs(); ++j) {
      double v = omega.values[j][extras[e].neighbors.front()];
      for (std::size_t k : extras[e].neighbors) v = std::min(v, omega.values[j][k]);
      out[j][e] = v;
    }
  }
  return out;
}

double AffinePiece::eval(std::span<const double> x) const {
  double s = b;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
  return s;
}

double AffinePiece::dual_norm() const {
  double s = 0.0;
  for (double v : w) s += std::abs(v);
  return s;
}

Vec solve_linear(std::vector<Vec> a, Vec rhs) {
  const std::size_t n = rhs.size();
  const std::vector<Vec> a0 = a;
  const Vec rhs0 = rhs;
  double scale = 0.0;
  for (const auto& row : a) scale = std::max(scale, max_norm(row));
  if (scale == 0.0) throw Error(ErrorCode::SingularSystem, "zero matrix");
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (std::abs(a[pivot][col]) <= 1e-14 * scale) {
      throw Error(ErrorCode::SingularSystem, "vanishing pivot in column " + std::to_string(col));
    }
    std::swap(a[col], a[pivot]);
    std::swap(rhs[col], rhs[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (std::size_t k = col; k < n; ++k) a[r][k] -= f * a[col][k];
      rhs[r] -= f * rhs[col];
    }
  }
  Vec z(n);
  for (std::size_t r = n; r-- > 0;) {
    double s = rhs[r];
    for (std::size_t k = r + 1; k < n; ++k) s -= a[r][k] * z[k];
    z[r] = s / a[r][r];
  }
  double rhs_scale = max_norm(rhs0);
  double z_scale = max_norm(z);
  for (std::size_t r = 0; r < n; ++r) {
    double s = -rhs0[r];
    for (std::size_t k = 0; k < n; ++k) s += a0[r][k] * z[k];
    if (std::abs(s) > 1e-9 * std::max({1.0, rhs_scale, scale * z_scale})) {
      throw Error(ErrorCode::SingularSystem, "residual check failed");
    }
  }
  return z;
}

AffinePiece affine_piece(const std::vector<Vec>& vertices, std::span<const double> values) {
  const std::size_t n = vertices.empty() ? 0 : vertices.front().size();
  if (vertices.size() != n + 1 || values.size() != n + 1) {
    throw Error(ErrorCode::DimensionMismatch, "affine piece needs n+1 vertices and values");
  }
  std::vector<Vec> a(n + 1, Vec(n + 1));
  for (std::size_t r = 0; r <= n; ++r) {
    for (std::size_t k = 0; k < n; ++k) a[r][k] = vertices[r][k];
    a[r][n] = 1.0;
  }
  const Vec z = solve_linear(std::move(a), Vec(values.begin(), values.end()));
  return {Vec(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n)), z[n]};
}

AffinePiece affine_piece(const Permutation& sigma, std::span<const double> values) {
  std::vector<Vec> verts;
  for (const auto& v : simplex_vertices(sigma)) verts.emplace_back(v.begin(), v.end());
  return affine_piece(verts, values);
}

CpwaInterpolant::CpwaInterpolant(std::shared_ptr<const Tiling> tiling, OmegaVector omega, double k_cont)
    : tiling_(std::move(tiling)), omega_(std::move(omega)), k_cont_(k_cont) {
  extra_values_ = extend_extra_corners(omega_, tiling_->extras());
  build_pieces();
}

CpwaInterpolant::CpwaInterpolant(std::shared_ptr<const Tiling> tiling, OmegaVector omega,
                                 std::vector<Vec> extra_values, double k_cont)
    : tiling_(std::move(tiling)), omega_(std::move(omega)), extra_values_(std::move(extra_values)),
      k_cont_(k_cont) {
  if (extra_values_.size() != omega_.outputs()) {
    throw Error(ErrorCode::DimensionMismatch, "extra-corner values need one row per output");
  }
  for (const auto& row : extra_values_) {
    if (row.size() != tiling_->extras().size() || !all_finite(row)) {
      throw Error(ErrorCode::InvariantViolation, "extra-corner value row has wrong length or non-finite entries");
    }
  }
  build_pieces();
}

void CpwaInterpolant::build_pieces() {
  if (omega_.outputs() == 0) throw Error(ErrorCode::DimensionMismatch, "interpolant needs at least one output");
  for (const auto& row : omega_.values) {
    if (row.size() != tiling_->grid().size() || !all_finite(row)) {
      throw Error(ErrorCode::InvariantViolation, "omega row has wrong length or non-finite entries");
    }
  }
  if (!(k_cont_ > 0.0)) throw Error(ErrorCode::InvariantViolation, "K_cont must be positive");
  const std::size_t n = dim();
  const std::size_t m = outputs();
  const double eta = tiling_->eta();
  perms_ = tiling_->permutations().size();
  pieces_.resize(tiling_->cubes().size() * perms_ * m);
  std::vector<Vec> rel(n + 1, Vec(n));
  Vec values(n + 1);
  for (std::size_t c = 0; c < tiling_->cubes().size(); ++c) {
    const Vec origin = tiling_->grid().lattice_point(tiling_->cubes()[c].lower);
    for (std::size_t r = 0; r < perms_; ++r) {
      const auto& sigma = tiling_->permutations()[r];
      const auto verts = simplex_vertices(sigma);
      const auto offsets = tiling_->simplex_offsets(c, sigma);
      for (std::size_t t = 0; t <= n; ++t) {
        for (std::size_t i = 0; i < n; ++i) rel[t][i] = eta * verts[t][i];
      }
      std::vector<CornerRef> refs;
      for (const auto& o : offsets) refs.push_back(tiling_->corner(o));
      for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t t = 0; t <= n; ++t) values[t] = corner_value(refs[t], j);
        AffinePiece p = affine_piece(rel, values);
        for (std::size_t i = 0; i < n; ++i) p.b -= p.w[i] * origin[i];
        pieces_[(c * perms_ + r) * m + j] = std::move(p);
      }
    }
  }
}

double CpwaInterpolant::corner_value(CornerRef ref, std::size_t output) const {
  return ref.extra ? extra_values_[output][ref.index] : omega_.values[output][ref.index];
}

double CpwaInterpolant::corner_value(std::span<const std::int64_t> offset, std::size_t output) const {
  return corner_value(tiling_->corner(offset), output);
}

Vec CpwaInterpolant::eval(std::span<const double> x) const {
  const auto loc = tiling_->locate(x);
  const std::size_t r = permutation_rank(loc.id.sigma);
  Vec out(outputs());
  for (std::size_t j = 0; j < outputs(); ++j) out[j] = piece(loc.id.cube, r, j).eval(x);
  return out;
}

double CpwaInterpolant::eval(std::span<const double> x, std::size_t output) const {
  const auto loc = tiling_->locate(x);
  return piece(loc.id.cube, permutation_rank(loc.id.sigma), output).eval(x);
}

CpwaInterpolant CpwaInterpolant::with_corrupted_piece(std::size_t cube, std::size_t rank, std::size_t output,
                                                      double offset) const {
  CpwaInterpolant copy = *this;
  copy.pieces_.at((cube * perms_ + rank) * outputs() + output).b += offset;
  return copy;
}

CpwaInterpolant build_interpolant(const VectorFunction& oracle, const Box& domain, double eta,
                                  std::size_t m, double k_cont, int max_dim) {
  auto tiling = std::make_shared<const Tiling>(build_eta_grid(domain, eta), max_dim);
  OmegaVector omega = sample_controller(oracle, tiling->grid(), m);
  return CpwaInterpolant(std::move(tiling), std::move(omega), k_cont);
}

std::vector<std::size_t> region_count(const CpwaInterpolant& interp) {
  const std::size_t cubes = interp.tiling().cubes().size();
  const std::size_t perms = interp.tiling().permutations().size();
  std::vector<std::size_t> counts;
  for (std::size_t j = 0; j < interp.outputs(); ++j) {
    std::set<Vec> seen;
    for (std::size_t c = 0; c < cubes; ++c) {
      for (std::size_t r = 0; r < perms; ++r) {
        const auto& p = interp.piece(c, r, j);
        Vec key;
        for (double v : p.w) key.push_back(std::round(v * 1e12) / 1e12 + 0.0);
        key.push_back(std::round(p.b * 1e12) / 1e12 + 0.0);
        seen.insert(std::move(key));
      }
    }
    counts.push_back(seen.size());
  }
  return counts;
}

nlohmann::json AuditReport::to_json() const {
  nlohmann::json j = {{"metric", metric}, {"value", value}, {"bound", bound}, {"pass", pass}, {"seed", seed}};
  if (!details.empty()) j["details"] = details;
  return j;
}

AuditReport lipschitz_audit(const CpwaInterpolant& interp, bool throw_on_fail) {
  AuditReport rep;
  rep.metric = "lipschitz";
  rep.bound = 3.0 * interp.k_cont();
  std::size_t worst_cube = 0, worst_rank = 0, worst_out = 0;
  const std::size_t perms = interp.tiling().permutations().size();
  for (std::size_t c = 0; c < interp.tiling().cubes().size(); ++c) {
    for (std::size_t r = 0; r < perms; ++r) {
      for (std::size_t j = 0; j < interp.outputs(); ++j) {
        const double g = interp.piece(c, r, j).dual_norm();
        if (g > rep.value) {
          rep.value = g;
          worst_cube = c;
          worst_rank = r;
          worst_out = j;
        }
      }
    }
  }
  rep.pass = rep.value <= rep.bound + 1e-9;
  rep.details = {{"cube_lower", interp.tiling().cubes()[worst_cube].lower},
                 {"sigma", permutation_unrank(worst_rank, static_cast<int>(interp.dim()))},
                 {"output", worst_out},
                 {"norm", "sum of |w_i| per output, max across outputs"}};
  if (!rep.pass && throw_on_fail) {
    throw Error(ErrorCode::BudgetExceeded,
                "piece gradient norm " + std::to_string(rep.value) + " exceeds " + std::to_string(rep.bound) +
                    " on simplex " + rep.details.dump());
  }
  return rep;
}

AuditReport continuity_audit(const CpwaInterpolant& interp, std::size_t samples_per_face, double tol,
                             std::uint64_t seed, bool throw_on_fail) {
  const Tiling& tiling = interp.tiling();
  const std::size_t n = interp.dim();
  const std::size_t m = interp.outputs();
  const auto& perms = tiling.permutations();
  const auto& grid = tiling.grid();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  AuditReport rep;
  rep.metric = "continuity";
  rep.bound = tol;
  rep.seed = seed;
  std::size_t faces = 0;
  auto global = [&](std::size_t cube, const Vec& y) {
    Vec x(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = grid.anchor()[i] + grid.eta() * (static_cast<double>(tiling.cubes()[cube].lower[i]) + y[i]);
    }
    return x;
  };
  auto jump = [&](std::size_t c1, std::size_t r1, std::size_t c2, std::size_t r2, const Vec& x) {
    double worst = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      worst = std::max(worst, std::abs(interp.piece(c1, r1, j).eval(x) - interp.piece(c2, r2, j).eval(x)));
    }
    return worst;
  };

  for (std::size_t c = 0; c < tiling.cubes().size(); ++c) {
    // Faces between simplices of the same cube: y[sigma[k]] == y[sigma[k+1]].
    for (std::size_t r = 0; r < perms.size(); ++r) {
      for (std::size_t k = 0; k + 1 < n; ++k) {
        Permutation other = perms[r];
        std::swap(other[k], other[k + 1]);
        const std::size_t r2 = permutation_rank(other);
        if (r2 < r) continue;
        ++faces;
        for (std::size_t s = 0; s < samples_per_face; ++s) {
          Vec u(n);
          for (auto& v : u) v = unit(rng);
          std::sort(u.begin(), u.end());
          u[k + 1] = u[k];
          Vec y(n);
          for (std::size_t t = 0; t < n; ++t) y[static_cast<std::size_t>(perms[r][t])] = u[t];
          rep.value = std::max(rep.value, jump(c, r, c, r2, global(c, y)));
        }
      }
    }
    // Faces shared with the neighboring cube along each axis.
    for (std::size_t i = 0; i < n; ++i) {
      IndexVec up = tiling.cubes()[c].lower;
      ++up[i];
      const auto nb = tiling.cube_at(up);
      if (!nb) continue;
      ++faces;
      for (std::size_t s = 0; s < samples_per_face; ++s) {
        Vec y(n);
        for (auto& v : y) v = unit(rng);
        y[i] = 1.0;
        Vec y2 = y;
        y2[i] = 0.0;
        const Vec x = global(c, y);
        const std::size_t r1 = permutation_rank(ascending_order(y));
        const std::size_t r2 = permutation_rank(ascending_order(y2));
        rep.value = std::max(rep.value, jump(c, r1, *nb, r2, x));
      }
    }
  }
  rep.pass = rep.value <= tol;
  rep.details = {{"faces", faces}, {"samples_per_face", samples_per_face}};
  if (!rep.pass && throw_on_fail) {
    throw Error(ErrorCode::DiscontinuityDetected, "max face jump " + std::to_string(rep.value) +
                                                      " exceeds " + std::to_string(tol));
  }
  return rep;
}

AuditReport approximation_audit(const CpwaInterpolant& interp, const VectorFunction& oracle,
                                const std::vector<Vec>& probes, double bound, std::uint64_t seed,
                                std::size_t workers) {
  std::vector<double> err(probes.size(), 0.0);
  parallel_for(probes.size(), workers, [&](std::size_t k) {
    const Vec a = interp.eval(probes[k]);
    const Vec b = oracle(probes[k]);
    err[k] = max_norm_distance(a, b);
  });
  AuditReport rep;
  rep.metric = "approx";
  rep.bound = bound;
  rep.seed = seed;
  std::size_t worst = 0;
  for (std::size_t k = 0; k < err.size(); ++k) {
    if (err[k] > rep.value) {
      rep.value = err[k];
      worst = k;
    }
  }
  rep.pass = rep.value <= bound;
  rep.details = {{"probes", probes.size()}};
  if (!probes.empty()) rep.details["worst_point"] = probes[worst];
  return rep;
}

}  // namespace tllarch
