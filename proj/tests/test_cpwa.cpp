#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "tllarch/cpwa.hpp"
#include "tllarch/error.hpp"
#include "tllarch/probes.hpp"
#include "tllarch/serialization.hpp"

using namespace tllarch;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::ConfigError;
}

std::shared_ptr<const Tiling> tiling(const Box& box, double eta) {
  return std::make_shared<const Tiling>(build_eta_grid(box, eta));
}

OmegaVector random_omega(const Tiling& t, std::size_t m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  OmegaVector w;
  w.values.assign(m, Vec(t.grid().size()));
  for (auto& row : w.values) {
    for (auto& v : row) v = u(rng);
  }
  return w;
}

}  // namespace

TEST_CASE("sampling a controller on the grid") {
  const EtaGrid g = build_eta_grid(Box({0.0, 0.0}, {1.0, 1.0}), 0.3);
  const auto c = sample_controller([](std::span<const double>) { return Vec{2.5}; }, g, 1);
  for (double v : c.values[0]) CHECK(v == 2.5);

  const auto a = sample_controller([](std::span<const double> x) { return Vec{x[0] - 3 * x[1], 1.0}; }, g, 2);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec p = g.point(i);
    CHECK(a.values[0][i] == p[0] - 3 * p[1]);
    CHECK(a.values[1][i] == 1.0);
  }

  CHECK(code_of([&] {
          sample_controller([&](std::span<const double> x) { return Vec{x[0] > 0.5 ? std::nan("") : 0.0}; }, g, 1);
        }) == ErrorCode::OracleFailure);
  CHECK(code_of([&] {
          sample_controller([](std::span<const double>) -> Vec { throw std::runtime_error("down"); }, g, 1);
        }) == ErrorCode::OracleFailure);
  CHECK(code_of([&] { sample_controller([](std::span<const double>) { return Vec{1.0, 2.0}; }, g, 1); }) ==
        ErrorCode::OracleFailure);
}

TEST_CASE("extra corners take the neighbor minimum") {
  const EtaGrid g = build_eta_grid(Box({0.0}, {1.0}), 0.5);
  OmegaVector w;
  w.values = {{3.0, 7.0}};
  const auto ext = extend_extra_corners(w, extra_corners(g));
  CHECK(ext[0][0] == 3.0);
  CHECK(ext[0][1] == 7.0);

  OmegaVector three;
  three.values = {{1.0, 2.0, -4.0}, {5.0, 5.0, 5.0}};
  ExtraCornerSet manual(1);
  manual[0].neighbors = {0, 1, 2};
  const auto v = extend_extra_corners(three, manual);
  CHECK(v[0][0] == -4.0);
  CHECK(v[1][0] == 5.0);

  manual[0].neighbors.clear();
  CHECK(code_of([&] { extend_extra_corners(three, manual); }) == ErrorCode::OrphanCorner);
}

TEST_CASE("affine piece solves") {
  const AffinePiece c = affine_piece(Permutation{1, 0}, Vec{4.0, 4.0, 4.0});
  CHECK(c.w == Vec{0.0, 0.0});
  CHECK(c.b == 4.0);

  // alpha(x) = x1 + 2 x2 on (0,0), (0,1), (1,1).
  const AffinePiece p = affine_piece(Permutation{0, 1}, Vec{0.0, 2.0, 3.0});
  CHECK(p.w[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p.w[1] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(std::abs(p.b) < 1e-15);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int n = 1; n <= 4; ++n) {
    for (const auto& s : braid_simplices(n)) {
      Vec vals(n + 1);
      for (auto& v : vals) v = u(rng);
      const AffinePiece q = affine_piece(s, vals);
      const auto verts = simplex_vertices(s);
      for (int t = 0; t <= n; ++t) {
        Vec x(verts[t].begin(), verts[t].end());
        CHECK(q.eval(x) == doctest::Approx(vals[t]).epsilon(1e-12));
      }
      const auto [w, b] = oracle::path_piece(s, vals, 1.0, Vec(n, 0.0));
      for (int i = 0; i < n; ++i) CHECK(q.w[i] == doctest::Approx(w[i]).epsilon(1e-12));
      CHECK(q.b == doctest::Approx(b).epsilon(1e-12));
    }
  }
  CHECK(code_of([] { affine_piece(std::vector<Vec>{{0.0}, {0.0}}, Vec{1.0, 2.0}); }) == ErrorCode::SingularSystem);
}

TEST_CASE("cached pieces match the path-difference oracle") {
  for (std::size_t n = 1; n <= 3; ++n) {
    const Box box(Vec(n, -0.5), Vec(n, 0.6));
    auto t = tiling(box, 0.3);
    const CpwaInterpolant f(t, random_omega(*t, 2, n), 1.0);
    for (std::size_t c = 0; c < t->cubes().size(); ++c) {
      const Vec origin = t->grid().lattice_point(t->cubes()[c].lower);
      for (std::size_t r = 0; r < t->permutations().size(); ++r) {
        const auto& s = t->permutations()[r];
        for (std::size_t j = 0; j < 2; ++j) {
          Vec vals;
          for (const auto& o : t->simplex_offsets(c, s)) vals.push_back(f.corner_value(o, j));
          const auto [w, b] = oracle::path_piece(s, vals, t->eta(), origin);
          const auto& p = f.piece(c, r, j);
          for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(p.w[i] - w[i]) < 1e-9);
          CHECK(std::abs(p.b - b) < 1e-9);
        }
      }
    }
  }
}

TEST_CASE("evaluation at grid points and 1-D midpoints") {
  auto t = tiling(Box({0.0, 0.0}, {1.0, 1.0}), 0.2);
  const CpwaInterpolant f(t, random_omega(*t, 1, 5), 1.0);
  for (std::size_t i = 0; i < t->grid().size(); ++i) {
    CHECK(f.eval(t->grid().point(i), 0) == doctest::Approx(f.omega().values[0][i]).epsilon(1e-12));
  }

  auto t1 = tiling(Box({0.0}, {1.0}), 0.5);
  OmegaVector w;
  w.values = {{0.0, 1.0}};
  const CpwaInterpolant g(t1, w, 2.0);
  CHECK(g.eval(Vec{0.5}, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g.eval(Vec{-0.25}, 0) == 0.0);
  CHECK(g.eval(Vec{1.25}, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(code_of([&] { g.eval(Vec{2.0}); }) == ErrorCode::OutsideDomain);
}

TEST_CASE("affine data is reproduced exactly") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (std::size_t n = 1; n <= 3; ++n) {
    auto t = tiling(Box(Vec(n, 0.0), Vec(n, 1.0)), 0.27);
    Vec w(n);
    for (auto& v : w) v = u(rng);
    const double b = u(rng);
    auto ell = [&](std::span<const double> x) {
      double s = b;
      for (std::size_t i = 0; i < n; ++i) s += w[i] * x[i];
      return s;
    };
    OmegaVector om;
    om.values.assign(1, Vec{});
    for (std::size_t i = 0; i < t->grid().size(); ++i) om.values[0].push_back(ell(t->grid().point(i)));
    std::vector<Vec> ex(1);
    for (const auto& e : t->extras()) ex[0].push_back(ell(e.coords));
    const CpwaInterpolant f(t, om, ex, 3.0);
    for (const auto& p : probe_points(t->cover_box(), 2000, n)) CHECK(std::abs(f.eval(p, 0) - ell(p)) < 1e-9);
    const auto audit = lipschitz_audit(f, false);
    double g = 0.0;
    for (double v : w) g += std::abs(v);
    CHECK(audit.value == doctest::Approx(g).epsilon(1e-9));
  }
}

TEST_CASE("neighbor-min extension reproduces affine data away from the boundary cells") {
  auto t = tiling(Box({0.0, 0.0}, {1.0, 1.0}), 0.2);
  auto ell = [](std::span<const double> x) { return Vec{0.3 * x[0] - 0.7 * x[1] + 0.1}; };
  const CpwaInterpolant f(t, sample_controller(ell, t->grid(), 1), 1.0);
  const auto& g = t->grid();
  // Hull of the grid points: cells there have grid points at every corner.
  Vec lo = g.point(0), hi = g.point(0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t k = 0; k < 2; ++k) {
      lo[k] = std::min(lo[k], g.point(i)[k]);
      hi[k] = std::max(hi[k], g.point(i)[k]);
    }
  }
  for (const auto& p : probe_points(Box(lo, hi), 2000, 1)) CHECK(std::abs(f.eval(p, 0) - ell(p)[0]) < 1e-9);
}

TEST_CASE("values are sandwiched by nearby grid samples") {
  auto t = tiling(Box({0.0, 0.0}, {1.0, 1.0}), 0.23);
  const CpwaInterpolant f(t, random_omega(*t, 1, 9), 1.0);
  const auto& g = t->grid();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t c = 0; c < t->cubes().size(); ++c) {
    double lo = INFINITY, hi = -INFINITY;
    const auto corners = t->cubes()[c].corners(t->eta());
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (const auto& k : corners) {
        if (max_norm_distance(g.point(i), k) <= t->eta() * (1 + 1e-12)) {
          lo = std::min(lo, f.omega().values[0][i]);
          hi = std::max(hi, f.omega().values[0][i]);
        }
      }
    }
    for (int s = 0; s < 20; ++s) {
      Vec x(2);
      for (std::size_t k = 0; k < 2; ++k) {
        x[k] = g.anchor()[k] + t->eta() * (static_cast<double>(t->cubes()[c].lower[k]) + u(rng));
      }
      const double v = f.eval(x, 0);
      CHECK(v >= lo - 1e-12);
      CHECK(v <= hi + 1e-12);
    }
  }
}

TEST_CASE("region counts") {
  auto t = tiling(Box({0.0, 0.0}, {1.0, 1.0}), 0.3);
  OmegaVector c;
  c.values = {Vec(t->grid().size(), 1.5)};
  CHECK(region_count(CpwaInterpolant(t, c, 1.0)) == std::vector<std::size_t>{1});

  auto t1 = tiling(Box({0.0}, {1.0}), 0.5);
  const auto r1 = region_count(CpwaInterpolant(t1, random_omega(*t1, 1, 2), 1.0));
  CHECK(r1[0] <= 4);

  // Random data: count equals the number of distinct oracle pieces.
  const CpwaInterpolant f(t, random_omega(*t, 1, 8), 1.0);
  std::set<std::pair<std::vector<long long>, long long>> distinct;
  for (std::size_t cu = 0; cu < t->cubes().size(); ++cu) {
    const Vec origin = t->grid().lattice_point(t->cubes()[cu].lower);
    for (const auto& s : t->permutations()) {
      Vec vals;
      for (const auto& o : t->simplex_offsets(cu, s)) vals.push_back(f.corner_value(o, 0));
      const auto [w, b] = oracle::path_piece(s, vals, t->eta(), origin);
      distinct.insert({{std::llround(w[0] * 1e9), std::llround(w[1] * 1e9)}, std::llround(b * 1e9)});
    }
  }
  CHECK(region_count(f)[0] == distinct.size());
  CHECK(region_count(f)[0] <= 2 * 6 * 6);
}

TEST_CASE("Lipschitz audit") {
  auto t = tiling(Box({0.0, 0.0}, {1.0, 1.0}), 0.25);
  OmegaVector c;
  c.values = {Vec(t->grid().size(), -2.0)};
  const auto flat = lipschitz_audit(CpwaInterpolant(t, c, 0.5));
  CHECK(flat.value == 0.0);
  CHECK(flat.pass);

  OmegaVector wild = random_omega(*t, 1, 1);
  for (auto& v : wild.values[0]) v *= 100.0;
  const CpwaInterpolant bad(t, wild, 0.5);
  CHECK(code_of([&] { lipschitz_audit(bad); }) == ErrorCode::BudgetExceeded);
  CHECK_FALSE(lipschitz_audit(bad, false).pass);
}

TEST_CASE("continuity audit") {
  for (std::size_t n = 1; n <= 3; ++n) {
    auto t = tiling(Box(Vec(n, 0.0), Vec(n, 1.0)), 0.3);
    const CpwaInterpolant f(t, random_omega(*t, 2, 20 + n), 1.0);
    const auto rep = continuity_audit(f, 8, 1e-9, 5);
    CHECK(rep.pass);
    CHECK(rep.value <= (n == 1 ? 1e-12 : 1e-9));
    const CpwaInterpolant broken = f.with_corrupted_piece(1, 0, 1, 1e-3);
    CHECK(code_of([&] { continuity_audit(broken, 8, 1e-9, 5); }) == ErrorCode::DiscontinuityDetected);
  }
}

TEST_CASE("approximation within mu for a Lipschitz oracle") {
  const double k = 1.0, mu = 0.1;
  auto psi = [](std::span<const double> x) { return Vec{std::sin(x[0]) * 0.5 + 0.5 * std::cos(x[1])}; };
  const CpwaInterpolant f = build_interpolant(psi, Box({-1, -1}, {1, 1}), mu / (3 * k), 1, k);
  const auto rep = approximation_audit(f, psi, probe_lattice(Box({-1, -1}, {1, 1}), 101), mu, 0, 2);
  CHECK(rep.pass);
  CHECK(rep.value <= mu);
}

TEST_CASE("interpolant JSON round trip") {
  auto t = tiling(Box({0.0, 0.0}, {1.0, 0.5}), 0.2);
  const CpwaInterpolant f(t, random_omega(*t, 2, 6), 1.25);
  const auto doc = nlohmann::json::parse(interpolant_to_json(f).dump());
  const CpwaInterpolant g = interpolant_from_json(doc);
  CHECK(g.omega().values == f.omega().values);
  CHECK(g.extra_values() == f.extra_values());
  CHECK(g.k_cont() == 1.25);
  for (const auto& p : probe_points(t->cover_box(), 200, 2)) CHECK(g.eval(p) == f.eval(p));

  auto broken = doc;
  broken["extra_corners"][0]["offset"] = {99, 99};
  CHECK(code_of([&] { interpolant_from_json(broken); }) == ErrorCode::InvariantViolation);
  broken = doc;
  broken.erase("omega");
  CHECK(code_of([&] { interpolant_from_json(broken); }) == ErrorCode::SchemaError);
}
