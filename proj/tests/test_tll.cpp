#include <cstdio>
#include <fstream>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "tllarch/error.hpp"
#include "tllarch/probes.hpp"
#include "tllarch/serialization.hpp"
#include "tllarch/sizing.hpp"
#include "tllarch/tll.hpp"

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

CpwaInterpolant random_interp(std::size_t n, std::size_t m, double eta, std::uint64_t seed) {
  auto t = std::make_shared<const Tiling>(build_eta_grid(Box(Vec(n, 0.0), Vec(n, 1.0)), eta));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  OmegaVector w;
  w.values.assign(m, Vec(t->grid().size()));
  for (auto& row : w.values) {
    for (auto& v : row) v = u(rng);
  }
  return CpwaInterpolant(t, w, 1.0);
}

// Explicit lattice evaluation: max over sets of min over members.
double lattice_oracle(const ScalarTll& s, const Vec& x) {
  double best = -INFINITY;
  for (const auto& set : s.selectors) {
    double m = INFINITY;
    for (auto i : set) m = std::min(m, s.bank[i].eval(x));
    best = std::max(best, m);
  }
  return best;
}

}  // namespace

TEST_CASE("constant interpolant compiles to one function and one set") {
  const CpwaInterpolant f = build_interpolant([](std::span<const double>) { return Vec{0.75}; },
                                              Box({0, 0}, {1, 1}), 0.3, 1, 1.0);
  const TllNetwork net = compile_tll(f, 4);
  CHECK(net.outputs[0].bank.size() == 1);
  CHECK(net.outputs[0].selectors.size() == 1);
  CHECK(eval_tll(net, Vec{0.4, 0.9})[0] == 0.75);
  const auto d = arch_descriptor(net, 4);
  CHECK(d.bank_sizes == std::vector<std::size_t>{1});
  CHECK(d.layers == std::vector<std::size_t>{2, 1});
}

TEST_CASE("1-D hat function") {
  // Pieces x + 1 on [-1, 0] and 1 - x on [0, 1].
  const std::vector<AffinePiece> pieces{{{1.0}, 1.0}, {{-1.0}, 1.0}};
  const std::vector<std::vector<Vec>> verts{{{-1.0}, {0.0}}, {{0.0}, {1.0}}};
  const ScalarTll raw = compile_lattice(pieces, verts, {.prune = false});
  CHECK(raw.bank.size() == 2);
  CHECK(raw.selectors.size() == 2);
  const ScalarTll pruned = compile_lattice(pieces, verts);
  CHECK(pruned.selectors.size() == 1);
  for (double x = -1.0; x <= 1.0; x += 0.125) {
    const double hat = 1.0 - std::abs(x);
    CHECK(raw.eval(Vec{x}) == doctest::Approx(hat).epsilon(1e-15));
    CHECK(pruned.eval(Vec{x}) == doctest::Approx(hat).epsilon(1e-15));
  }

  // Convex V: each region keeps its own singleton set.
  const std::vector<AffinePiece> vee{{{-1.0}, 0.0}, {{1.0}, 0.0}};
  const ScalarTll v = compile_lattice(vee, verts);
  CHECK(v.selectors.size() == 2);
  for (double x = -1.0; x <= 1.0; x += 0.125) CHECK(v.eval(Vec{x}) == std::abs(x));
}

TEST_CASE("compiled networks agree with their interpolants") {
  for (std::size_t n = 1; n <= 3; ++n) {
    const CpwaInterpolant f = random_interp(n, 2, n == 3 ? 0.3 : 0.15, 40 + n);
    const TllNetwork net = compile_tll(f, 0);
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(net.outputs[j].bank.size() == region_count(f)[j]);
    }
    for (const auto& p : probe_points(f.tiling().cover_box(), 10000, 17 + n)) {
      const Vec a = eval_tll(net, p);
      const Vec b = f.eval(p);
      CHECK(max_norm_distance(a, b) <= 1e-9);
      CHECK(a[0] == lattice_oracle(net.outputs[0], p));
    }
    for (std::size_t i = 0; i < f.tiling().grid().size(); ++i) {
      CHECK(eval_tll(net, f.tiling().grid().point(i))[0] == doctest::Approx(f.omega().values[0][i]).epsilon(1e-12));
    }
    const auto bound = controller_size(static_cast<int>(n), 1.0, f.tiling().eta());
    for (const auto& o : net.outputs) CHECK(BigInt(o.bank.size()) <= bound.exact);
  }
}

TEST_CASE("warm-started evaluator matches plain evaluation") {
  const CpwaInterpolant f = random_interp(2, 1, 0.1, 5);
  const TllNetwork net = compile_tll(f, 0);
  TllEvaluator ev(net);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> step(0.0, 0.02);
  Vec x{0.5, 0.5};
  for (int k = 0; k < 3000; ++k) {
    CHECK(ev(x) == eval_tll(net, x));
    for (auto& v : x) v = std::clamp(v + step(rng), -0.1, 1.1);
    if (k % 500 == 0) x = {std::fmod(0.37 * k, 1.0), 0.2};
  }
}

TEST_CASE("networks are total and globally Lipschitz") {
  const CpwaInterpolant f = random_interp(2, 1, 0.2, 77);
  const TllNetwork net = compile_tll(f, 0);
  CHECK(std::isfinite(eval_tll(net, Vec{1e6, -3e5})[0]));
  const double g = net.max_gradient_norm();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  double worst = 0.0;
  for (int k = 0; k < 20000; ++k) {
    const Vec a{u(rng), u(rng)}, b{u(rng), u(rng)};
    const double d = max_norm_distance(a, b);
    if (d > 0) worst = std::max(worst, std::abs(eval_tll(net, a)[0] - eval_tll(net, b)[0]) / d);
  }
  CHECK(worst <= g + 1e-9);
}

TEST_CASE("parallel composition") {
  auto ell = [](double a, double b, double c) {
    return [=](std::span<const double> x) { return Vec{a * x[0] + b * x[1] + c}; };
  };
  const Box box({0, 0}, {1, 1});
  const TllNetwork n1 = compile_tll(build_interpolant(ell(1, -1, 0.5), box, 0.25, 1, 2.0), 100);
  const TllNetwork n2 = compile_tll(build_interpolant(ell(0.2, 0.3, -1), box, 0.25, 1, 2.0), 100);
  const TllNetwork one = parallel_compose({n1});
  const TllNetwork both = parallel_compose({n1, n2});
  CHECK(both.m() == 2);
  for (const auto& p : probe_points(box, 500, 3)) {
    CHECK(eval_tll(one, p) == eval_tll(n1, p));
    const Vec v = eval_tll(both, p);
    CHECK(v[0] == eval_tll(n1, p)[0]);
    CHECK(v[1] == eval_tll(n2, p)[0]);
  }
  // Interior probes reproduce the affine functions.
  for (const auto& p : probe_points(Box({0.2, 0.2}, {0.8, 0.8}), 200, 4)) {
    CHECK(eval_tll(both, p)[0] == doctest::Approx(p[0] - p[1] + 0.5).epsilon(1e-12));
  }
  const auto d1 = arch_descriptor(n1, 100), d2 = arch_descriptor(n2, 100), d = arch_descriptor(both, 100);
  CHECK(d.bank_sizes == std::vector<std::size_t>{d1.bank_sizes[0], d2.bank_sizes[0]});

  TllNetwork other = n1;
  other.n = 3;
  CHECK(code_of([&] { parallel_compose({n1, other}); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("architecture bound and layer shapes") {
  const CpwaInterpolant f = random_interp(1, 1, 0.5, 3);
  const TllNetwork net = compile_tll(f, 4);
  CHECK(net.outputs[0].bank.size() <= 4);
  CHECK_NOTHROW(arch_descriptor(net, 4));

  TllNetwork spurious = net;
  for (int k = 0; k < 4; ++k) spurious.outputs[0].bank.push_back({{static_cast<double>(k)}, 0.0});
  CHECK(code_of([&] { arch_descriptor(spurious, 4); }) == ErrorCode::BoundViolated);

  // Set sizes {3, 1}: min levels 3+2 + 2 = 7, then 3 + 2 = 5; max of two: 3.
  ScalarTll s;
  s.bank = {{{1.0}, 0.0}, {{2.0}, 0.0}, {{3.0}, 0.0}};
  s.selectors = {{0, 1, 2}, {1}};
  CHECK(relu_widths(s) == std::vector<std::size_t>{7, 5, 3});
}

TEST_CASE("dense ReLU expansion evaluates like the lattice") {
  for (std::size_t n = 1; n <= 2; ++n) {
    const CpwaInterpolant f = random_interp(n, 2, 0.34, 90 + n);
    const TllNetwork net = compile_tll(f, 0);
    const auto layers = expand_relu(net);
    const auto d = arch_descriptor(net, std::numeric_limits<std::uint64_t>::max());
    REQUIRE(layers.size() + 1 == d.layers.size());
    for (std::size_t k = 0; k + 1 < layers.size(); ++k) CHECK(layers[k].bias.size() == d.layers[k + 1]);
    for (const auto& p : probe_points(Box(Vec(n, -0.5), Vec(n, 1.5)), 500, 6)) {
      const Vec a = eval_dense(layers, p);
      const Vec b = eval_tll(net, p);
      CHECK(max_norm_distance(a, b) <= 1e-9);
    }
  }
}

TEST_CASE("export and import") {
  const TllNetwork net = compile_tll(random_interp(2, 2, 0.3, 12), 500);
  const TllNetwork back = import_network(nlohmann::json::parse(export_network(net).dump()));
  REQUIRE(back.m() == net.m());
  CHECK(back.n == net.n);
  for (std::size_t j = 0; j < net.m(); ++j) {
    CHECK(back.outputs[j].selectors == net.outputs[j].selectors);
    REQUIRE(back.outputs[j].bank.size() == net.outputs[j].bank.size());
    for (std::size_t i = 0; i < net.outputs[j].bank.size(); ++i) {
      CHECK(back.outputs[j].bank[i].w == net.outputs[j].bank[i].w);
      CHECK(back.outputs[j].bank[i].b == net.outputs[j].bank[i].b);
    }
  }
  CHECK(back.provenance.eta == net.provenance.eta);
  CHECK(back.provenance.bound_n == 500);

  const std::string text = export_network(net).dump();
  const std::string path = "tll_truncated_network.json";
  {
    std::ofstream out(path);
    out << text.substr(0, text.size() / 2);
  }
  CHECK(code_of([&] { import_network(read_json_file(path)); }) == ErrorCode::SchemaError);
  std::remove(path.c_str());
  nlohmann::json truncated = export_network(net);
  truncated["outputs"][0].erase("bank");
  CHECK(code_of([&] { import_network(truncated); }) == ErrorCode::SchemaError);

  nlohmann::json tampered = export_network(net);
  tampered["outputs"][0]["selectors"][0].push_back(net.outputs[0].bank.size());
  CHECK(code_of([&] { import_network(tampered); }) == ErrorCode::InvariantViolation);
}
