#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "tllarch/cli/commands.hpp"
#include "tllarch/cli/oracles.hpp"
#include "tllarch/serialization.hpp"
#include "tllarch/tll.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("tllarch_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }

  std::string write(const std::string& name, const json& doc) const {
    const auto p = (dir / name).string();
    std::ofstream(p) << doc.dump(2);
    return p;
  }
  std::string write_text(const std::string& name, const std::string& text) const {
    const auto p = (dir / name).string();
    std::ofstream(p) << text;
    return p;
  }
  // Runs the tool with a config written to <name>.json; returns the exit code.
  int run(const std::string& args, const json& config, const std::string& out = "out") const {
    const std::string cfg = write("config.json", config);
    const std::string cmd = std::string(TLLARCH_TOOL) + " --config " + cfg + " --out " + (dir / out).string() + " " +
                            args + " 2>" + (dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  }
  json report(const std::string& name, const std::string& out = "out") const {
    return tllarch::read_json_file((dir / out / (name + ".json")).string());
  }
  std::string stderr_text() const {
    std::ifstream in(dir / "stderr.txt");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
};

json unit_budget(int c, double delta = 0.05) {
  return {{"K_x", 1.0}, {"K_u", 1.0}, {"K_cont", 1.0}, {"tau", 0.1}, {"delta", delta}, {"exponent_multiplier", c}};
}

json box(std::vector<double> lo, std::vector<double> hi) { return {{"lower", lo}, {"upper", hi}}; }

}  // namespace

TEST_CASE("size") {
  Workspace ws;
  REQUIRE(ws.run("size", {{"budget", unit_budget(2)}, {"domain", box({0, 0}, {1, 1})}}) == 0);
  const json r = ws.report("size");
  CHECK(r["results"]["N_control"]["exact"] == "242");
  CHECK(r["results"]["mu_max"]["value"].get<double>() == doctest::Approx(0.37040911034085894).epsilon(1e-12));
  CHECK(r["results"]["eta"]["value"].get<double>() == doctest::Approx(0.12346970344695298).epsilon(1e-12));
  CHECK(r["config"]["domain"]["upper"] == json({1, 1}));
  CHECK(r.contains("timing"));

  REQUIRE(ws.run("size", {{"budget", unit_budget(2)}, {"domain", box({0}, {1})}, {"eta", 0.5},
                          {"control_domain", box({0}, {1})}}) == 0);
  CHECK(ws.report("size")["results"]["N_control"]["exact"] == "4");
  CHECK(ws.report("size")["results"]["N_sysid"]["exact"] == "32");

  CHECK(ws.run("size", {{"budget", unit_budget(2, 0.0)}, {"domain", box({0}, {1})}}) == 2);
  CHECK(ws.stderr_text().find("ConfigError") != std::string::npos);
  CHECK(ws.run("size", {{"budget", unit_budget(2, -1.0)}, {"domain", box({0}, {1})}}) == 2);
  CHECK(ws.run("size", {{"domain", box({0}, {1})}}) == 2);
  CHECK(ws.run("nonsense", json::object()) == 2);
}

TEST_CASE("grid, build and compile with a constant oracle") {
  Workspace ws;
  const json base = {{"domain", box({0, 0}, {1, 1})}, {"eta", 0.3}, {"K_cont", 1.0}};
  REQUIRE(ws.run("grid", base) == 0);
  CHECK(ws.report("grid")["results"]["covers_domain"] == true);
  const tllarch::EtaGrid grid = tllarch::grid_from_json(tllarch::read_json_file((ws.dir / "out/eta_grid.json").string()));

  json cfg = base;
  cfg["oracle"] = {{"builtin", "zero-2d"}};
  REQUIRE(ws.run("build", cfg) == 0);
  REQUIRE(ws.run("compile", cfg) == 0);
  const json arch = ws.report("compile")["results"]["architecture"];
  CHECK(arch["N"] == json({1}));
  CHECK(arch["M"] == json({1}));

  // The same constant through a subprocess speaking line-delimited JSON.
  const std::string script = ws.write_text(
      "oracle.py",
      "import sys, json\n"
      "for line in sys.stdin:\n"
      "    x = json.loads(line)['x']\n"
      "    print(json.dumps({'u': [0.75]}), flush=True)\n");
  cfg["oracle"] = {{"command", "python3 " + script}, {"batch", 7}};
  REQUIRE(ws.run("build", cfg, "sub") == 0);
  REQUIRE(ws.run("compile", cfg, "sub") == 0);
  const tllarch::TllNetwork net = tllarch::import_network(tllarch::read_json_file((ws.dir / "sub/network.json").string()));
  CHECK(net.outputs[0].bank.size() == 1);
  CHECK(tllarch::eval_tll(net, tllarch::Vec{0.2, 0.9})[0] == 0.75);

  // A CSV table over the grid points.
  std::string csv = "x1,x2,u\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto p = grid.point(i);
    std::ostringstream row;
    row.precision(17);
    row << p[0] << "," << p[1] << "," << (p[0] - 2 * p[1]) << "\n";
    csv += row.str();
  }
  cfg["oracle"] = {{"csv", ws.write_text("table.csv", csv)}};
  REQUIRE(ws.run("build", cfg, "csv") == 0);
  const auto interp = tllarch::interpolant_from_json(tllarch::read_json_file((ws.dir / "csv/interpolant.json").string()));
  CHECK(interp.eval(tllarch::Vec{0.5, 0.5})[0] == doctest::Approx(-0.5).epsilon(1e-12));

  cfg.erase("oracle");
  CHECK(ws.run("build", cfg, "none") == 2);
  cfg["oracle"] = {{"builtin", "no-such-controller"}};
  CHECK(ws.run("build", cfg, "none") == 2);
  cfg["oracle"] = {{"command", "echo not-json"}};
  CHECK(ws.run("build", cfg, "none") == 3);
}

TEST_CASE("pendulum pipeline: build, compile, verify, audit, export") {
  Workspace ws;
  json cfg = {{"model", "pendulum"},
              {"budget", {{"K_cont", 1.5}, {"tau", 0.1}, {"delta", 0.2}}},
              {"oracle", {{"builtin", "pendulum-stabilizer"}}},
              {"controller", "network"},
              {"probes", 2000},
              {"seed", 7}};
  REQUIRE(ws.run("build", cfg) == 0);
  REQUIRE(ws.run("compile", cfg) == 0);
  for (const char* check : {"approx", "lipschitz", "continuity", "tll-equiv", "regions"}) {
    INFO(check);
    CHECK(ws.run(std::string("verify ") + check, cfg) == 0);
    CHECK(ws.report(std::string("verify-") + check)["pass"] == true);
  }

  // Results do not depend on the worker count.
  cfg["artifacts"] = {{"interpolant", (ws.dir / "out/interpolant.json").string()},
                      {"network", (ws.dir / "out/network.json").string()}};
  REQUIRE(ws.run("verify approx --workers 3", cfg, "again") == 0);
  json a = ws.report("verify-approx"), b = ws.report("verify-approx", "again");
  CHECK(a["results"] == b["results"]);
  CHECK(a["pass"] == b["pass"]);
  REQUIRE(ws.run("verify approx --seed 8", cfg, "other") == 0);
  CHECK(ws.report("verify-approx", "other")["seed"] == 8);

  cfg["probes"] = 20;
  CHECK(ws.run("audit gronwall", cfg) == 0);
  const json g = ws.report("audit-gronwall")["results"];
  CHECK(g["max_deviation"].get<double>() <= g["bound"].get<double>() + 1e-7);
  CHECK(ws.run("audit invariance", cfg) <= 1);
  CHECK(ws.report("audit-invariance")["results"]["scope"] == "sampling-based audit, not a proof");

  REQUIRE(ws.run("export", cfg) == 0);
  const json dense = tllarch::read_json_file((ws.dir / "out/dense.json").string());
  const json arch = ws.report("export")["results"]["architecture"];
  CHECK(dense["layers"].size() + 1 == arch["layers"].size());

  // A verify run against a tighter approximation bound fails with exit 1.
  cfg["mu"] = 1e-6;
  CHECK(ws.run("verify approx", cfg) == 1);
  CHECK(ws.report("verify-approx")["pass"] == false);

  // Corrupted artifacts are configuration errors.
  ws.write_text("out/network.json", "{\"n\": 2, \"outputs\": [");
  CHECK(ws.run("verify tll-equiv", cfg) == 2);
  CHECK(ws.run("verify bogus", cfg) == 2);
  CHECK(ws.run("audit bogus", cfg) == 2);
}

TEST_CASE("sysid and its audit") {
  Workspace ws;
  const json cfg = {{"model", "linear"},
                    {"eta", 0.25},
                    {"budget", {{"K_cont", 0.5}, {"tau", 0.1}, {"delta", 0.05}}},
                    {"oracle", {{"builtin", "linear-feedback"}}}};
  REQUIRE(ws.run("sysid", cfg) == 0);
  const json r = ws.report("sysid")["results"];
  // Boundary cells take neighbour minima at extra corners; the error stays
  // within 3 K eta with K = K_x + K_u.
  CHECK(r["mu_measured"].get<double>() <= 3.0 * 2.0 * 0.25);
  CHECK(ws.run("audit sysid", cfg) == 0);
  CHECK(ws.report("audit-sysid")["results"]["pass"] == true);
}

TEST_CASE("ads-check") {
  Workspace ws;
  const json loop = {{"states", {{{"id", 0}, {"coords", {0.0}}}}},
                     {"transitions", {{{"src", 0}, {"label", "a"}, {"dst", 0}}}}};
  json chain = {{"states", json::array()}, {"transitions", json::array()}};
  for (int k = 0; k < 5; ++k) chain["states"].push_back({{"id", k}, {"coords", {double(k)}}});
  for (int k = 0; k < 4; ++k) chain["transitions"].push_back({{"src", k}, {"label", "go"}, {"dst", k + 1}});
  const json target = {{"states", {{{"id", 0}, {"coords", {0.0}}}, {{"id", 1}, {"coords", {1.0}}}}},
                     {"transitions", {{{"src", 0}, {"label", "x"}, {"dst", 1}}, {{"src", 1}, {"label", "x"}, {"dst", 1}}}}};
  const auto l = ws.write("loop.json", loop), c = ws.write("chain.json", chain), s = ws.write("target.json", target);

  CHECK(ws.run("ads-check", {{"ts_a", l}, {"ts_b", l}, {"delta", 0.5}}) == 0);
  CHECK(ws.report("ads-check")["results"]["relation"] == json({{0, 0}}));
  CHECK(ws.run("ads-check", {{"ts_a", c}, {"ts_b", s}, {"delta", 0.4}}) == 1);
  CHECK(ws.report("ads-check")["results"]["counterexample"] == 0);
  CHECK(ws.run("ads-check", {{"ts_a", c}, {"ts_b", s}, {"delta", -1}}) == 2);
  CHECK(ws.run("ads-check", {{"ts_a", (ws.dir / "missing.json").string()}, {"ts_b", s}, {"delta", 0}}) == 2);
}

TEST_CASE("oracle plumbing in-process") {
  using namespace tllarch::cli;
  auto o = make_oracle({{"builtin", "linear-feedback"}}, 1, 1);
  CHECK(o->evaluate({{0.5}, {-1.0}}) == std::vector<tllarch::Vec>{{-0.25}, {0.5}});
  CHECK(o->k_lip() == 0.5);
  const auto f = tabulated({{0.0}, {1.0}}, {{3.0}, {4.0}});
  CHECK(f(tllarch::Vec{1.0})[0] == 4.0);
  CHECK_THROWS_AS(f(tllarch::Vec{0.5}), tllarch::Error);
  CHECK(exit_code_for(tllarch::ErrorCode::BudgetExceeded) == 1);
  CHECK(exit_code_for(tllarch::ErrorCode::SchemaError) == 2);
  CHECK(exit_code_for(tllarch::ErrorCode::NonFiniteState) == 3);
}
