#include "tllarch/cli/commands.hpp"

#include <chrono>
#include <filesystem>
#include <limits>
#include <ostream>

#include "tllarch/audits.hpp"
#include "tllarch/cli/oracles.hpp"
#include "tllarch/hexfloat.hpp"
#include "tllarch/probes.hpp"
#include "tllarch/serialization.hpp"
#include "tllarch/sizing.hpp"
#include "tllarch/transition_system.hpp"

namespace tllarch::cli {

using nlohmann::json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::BudgetExceeded:
    case ErrorCode::DiscontinuityDetected:
    case ErrorCode::BoundViolated:
      return kAuditFailure;
    case ErrorCode::OutsideDomain:
    case ErrorCode::OracleFailure:
    case ErrorCode::SingularSystem:
    case ErrorCode::NonFiniteState:
    case ErrorCode::EmptySelector:
      return kNumericalError;
    default:
      return kConfigError;
  }
}

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

// Read-only view of the run configuration with ConfigError on bad input.
class Config {
 public:
  explicit Config(const RunOptions& options) : doc_(options.config), options_(options) {
    if (!doc_.is_object()) config_error("configuration must be a JSON object");
  }

  bool has(const std::string& key) const { return doc_.contains(key) && !doc_[key].is_null(); }
  const json& at(const std::string& key) const {
    if (!has(key)) config_error("missing configuration key '" + key + "'");
    return doc_[key];
  }
  double real(const std::string& key) const {
    try {
      const double v = json_to_double(at(key));
      if (!std::isfinite(v)) config_error("'" + key + "' is not finite");
      return v;
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      config_error("'" + key + "' is not a number: " + e.what());
    }
  }
  double real(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }
  double positive(const std::string& key, double fallback) const {
    const double v = real(key, fallback);
    if (!(v > 0.0)) config_error("'" + key + "' must be positive");
    return v;
  }
  std::size_t count(const std::string& key, std::size_t fallback) const {
    if (!has(key)) return fallback;
    if (!doc_[key].is_number_unsigned() || doc_[key].get<std::size_t>() == 0) {
      config_error("'" + key + "' must be a positive integer");
    }
    return doc_[key].get<std::size_t>();
  }
  std::string path(const std::string& key, const std::string& default_name) const {
    if (doc_.contains("artifacts") && doc_["artifacts"].contains(key)) return doc_["artifacts"][key].get<std::string>();
    return (std::filesystem::path(options_.out_dir) / default_name).string();
  }
  std::string out(const std::string& name) const {
    return (std::filesystem::path(options_.out_dir) / name).string();
  }
  std::uint64_t seed() const {
    if (options_.seed) return *options_.seed;
    return doc_.value("seed", std::uint64_t{0});
  }
  std::size_t workers() const { return options_.workers; }

  std::optional<ControlSystemModel> model() const {
    if (!has("model")) return std::nullopt;
    const auto name = at("model").get<std::string>();
    auto m = find_model(name);
    if (!m) config_error("unknown model '" + name + "'");
    return m;
  }
  ControlSystemModel require_model() const {
    auto m = model();
    if (!m) config_error("missing configuration key 'model'");
    return *m;
  }

  Box box(const std::string& key) const {
    try {
      return box_from_json(at(key));
    } catch (const Error& e) {
      config_error("'" + key + "': " + e.what());
    }
  }
  Box x_domain() const {
    if (has("domain")) return box("domain");
    if (auto m = model()) return m->x_box;
    config_error("missing configuration key 'domain'");
  }
  std::optional<Box> u_domain() const {
    if (has("control_domain")) return box("control_domain");
    if (auto m = model()) return m->u_box;
    return std::nullopt;
  }
  std::size_t outputs() const {
    if (has("m")) return count("m", 1);
    if (auto m = model()) return m->m;
    return 1;
  }

  // Budget fields fall back to the model's constants for K_x and K_u.
  SpecBudget budget() const {
    const json& b = at("budget");
    if (!b.is_object()) config_error("'budget' must be an object");
    auto field = [&](const char* key, std::optional<double> fallback) {
      if (b.contains(key)) return json_to_double(b[key]);
      if (fallback) return *fallback;
      config_error(std::string("budget is missing '") + key + "'");
    };
    const auto m = model();
    SpecBudget out;
    out.k_x = field("K_x", m ? std::optional<double>(m->k_x) : std::nullopt);
    out.k_u = field("K_u", m ? std::optional<double>(m->k_u) : std::nullopt);
    out.k_cont = field("K_cont", std::nullopt);
    out.tau = field("tau", std::nullopt);
    out.delta = field("delta", std::nullopt);
    out.exponent_multiplier = b.value("exponent_multiplier", 3);
    try {
      validate(out);
    } catch (const Error& e) {
      config_error(e.what());
    }
    return out;
  }

  // Explicit eta, else the budgeted mu_max / (3 K_cont).
  double eta() const {
    if (has("eta")) return positive("eta", 0.0);
    const SpecBudget b = budget();
    const MuMax mu = mu_max(b);
    if (!std::isfinite(mu.value)) config_error("mu_max is unbounded; set 'eta' explicitly");
    return eta_max(mu.value, b.k_cont);
  }

  std::unique_ptr<ControllerOracle> oracle(const std::string& key, std::size_t n, std::size_t m) const {
    return make_oracle(at(key), n, m);
  }

 private:
  const json& doc_;
  const RunOptions& options_;
};

json budget_json(const SpecBudget& b) {
  return {{"K_x", b.k_x}, {"K_u", b.k_u}, {"K_cont", b.k_cont},
          {"tau", b.tau}, {"delta", b.delta}, {"exponent_multiplier", b.exponent_multiplier}};
}

std::uint64_t saturate(const BigInt& v) {
  return v > BigInt(std::numeric_limits<std::uint64_t>::max()) ? std::numeric_limits<std::uint64_t>::max()
                                                                 : v.convert_to<std::uint64_t>();
}

CpwaInterpolant load_interpolant(const Config& cfg) { return interpolant_from_json(read_json_file(cfg.path("interpolant", "interpolant.json"))); }
TllNetwork load_network(const Config& cfg, const std::string& key = "network", const std::string& name = "network.json") {
  return import_network(read_json_file(cfg.path(key, name)));
}

// Oracle evaluated once over a fixed point set, then served from a table.
VectorFunction prefetch(ControllerOracle& oracle, const std::vector<Vec>& points) {
  return tabulated(points, oracle.evaluate(points));
}

struct Outcome {
  json results;
  bool pass = true;
};

Outcome cmd_size(const Config& cfg) {
  const SpecBudget b = cfg.budget();
  const Box x = cfg.x_domain();
  const auto u = cfg.u_domain();
  const int n = static_cast<int>(x.dim());
  const int m = static_cast<int>(cfg.outputs());
  const double ext_xu = u ? extent(Box::product(x, *u)) : 0.0;
  const SizingResult r = size_architecture(b, n, m, extent(x), ext_xu, cfg.real("eta", 0.0));
  json res = r.to_json();
  if (cfg.has("tau_sweep")) {
    std::vector<double> taus;
    for (const auto& t : cfg.at("tau_sweep")) taus.push_back(json_to_double(t));
    const TauSweep sweep = sweep_tau(b, taus);
    json entries = json::array();
    for (const auto& e : sweep.entries) entries.push_back({{"tau", e.tau}, {"mu_max", e.mu}});
    res["tau_sweep"] = {{"entries", entries}, {"best_tau", sweep.entries.empty() ? 0.0 : sweep.entries[sweep.best].tau}};
  }
  return {res, true};
}

Outcome cmd_grid(const Config& cfg) {
  const Box x = cfg.x_domain();
  const double eta = cfg.eta();
  const Tiling t(build_eta_grid(x, eta));
  write_json_file(cfg.out("eta_grid.json"), grid_to_json(t.grid()));
  json res = {{"eta", eta},
              {"eta_hex", to_hexfloat(eta)},
              {"grid_points", t.grid().size()},
              {"hypercubes", t.cubes().size()},
              {"extra_corners", t.extras().size()},
              {"simplices", t.cubes().size() * t.permutations().size()},
              {"covers_domain", t.grid().covers_domain()},
              {"hypercube_bound", hypercube_bound(static_cast<int>(x.dim()), extent(x), eta).str()},
              {"artifact", cfg.out("eta_grid.json")}};
  return {res, t.grid().covers_domain()};
}

Outcome cmd_build(const Config& cfg) {
  const Box x = cfg.x_domain();
  const std::size_t m = cfg.outputs();
  const double eta = cfg.eta();
  const double k_cont = cfg.has("budget") ? cfg.budget().k_cont : cfg.positive("K_cont", 1.0);
  auto oracle = cfg.oracle("oracle", x.dim(), m);
  auto tiling = std::make_shared<const Tiling>(build_eta_grid(x, eta));
  std::vector<Vec> points;
  for (std::size_t i = 0; i < tiling->grid().size(); ++i) points.push_back(tiling->grid().point(i));
  const OmegaVector omega = sample_controller(prefetch(*oracle, points), tiling->grid(), m);
  const CpwaInterpolant interp(tiling, omega, k_cont);
  json doc = interpolant_to_json(interp);
  doc["provenance"] = {{"oracle", oracle->describe()}, {"eta", eta}, {"K_cont", k_cont}};
  write_json_file(cfg.out("interpolant.json"), doc);
  json regions = region_count(interp);
  return {{{"eta", eta},
           {"K_cont", k_cont},
           {"grid_points", points.size()},
           {"simplices", interp.simplex_count()},
           {"regions", regions},
           {"oracle", oracle->describe()},
           {"artifact", cfg.out("interpolant.json")}},
          true};
}

Outcome cmd_compile(const Config& cfg) {
  const CpwaInterpolant interp = load_interpolant(cfg);
  const auto& grid = interp.tiling().grid();
  const ExactSize bound = controller_size(static_cast<int>(grid.dim()), extent(grid.domain()), grid.eta());
  const TllNetwork net = compile_tll(interp, saturate(bound.exact));
  const ArchDescriptor arch = arch_descriptor(net, saturate(bound.exact));
  write_json_file(cfg.out("network.json"), export_network(net));
  return {{{"bound_N", bound.str()},
           {"bound_formula", "n! * ceil(ext/eta + 2)^n"},
           {"architecture", arch.to_json()},
           {"artifact", cfg.out("network.json")}},
          true};
}

Outcome cmd_verify(const Config& cfg, const std::string& which) {
  const CpwaInterpolant interp = load_interpolant(cfg);
  const std::uint64_t seed = cfg.seed();
  if (which == "approx") {
    double bound = cfg.real("mu", 0.0);
    if (!cfg.has("mu")) bound = mu_max(cfg.budget()).value;
    auto oracle = cfg.oracle("oracle", interp.dim(), interp.outputs());
    const auto probes = probe_points(interp.tiling().grid().domain(), cfg.count("probes", 10000), seed);
    const AuditReport r = approximation_audit(interp, prefetch(*oracle, probes), probes, bound, seed, cfg.workers());
    return {r.to_json(), r.pass};
  }
  if (which == "lipschitz") {
    const AuditReport r = lipschitz_audit(interp, false);
    return {r.to_json(), r.pass};
  }
  if (which == "continuity") {
    const AuditReport r =
        continuity_audit(interp, cfg.count("samples_per_face", 8), cfg.positive("tolerance", 1e-9), seed, false);
    return {r.to_json(), r.pass};
  }
  if (which == "tll-equiv") {
    const TllNetwork net = load_network(cfg);
    const double tol = cfg.positive("tolerance", 1e-9);
    const auto probes = probe_points(interp.tiling().cover_box(), cfg.count("probes", 10000), seed);
    const double err = measure_sup_error([&](std::span<const double> p) { return interp.eval(p); },
                                         [&](std::span<const double> p) { return eval_tll(net, p); }, probes);
    return {{{"metric", "sup |network - interpolant|"},
             {"value", err},
             {"bound", tol},
             {"probes", probes.size()},
             {"seed", seed},
             {"pass", err <= tol}},
            err <= tol};
  }
  if (which == "regions") {
    const TllNetwork net = load_network(cfg);
    const auto regions = region_count(interp);
    const auto& grid = interp.tiling().grid();
    const ExactSize bound = controller_size(static_cast<int>(grid.dim()), extent(grid.domain()), grid.eta());
    bool pass = net.m() == regions.size();
    json per_output = json::array();
    for (std::size_t j = 0; j < net.m() && j < regions.size(); ++j) {
      const std::size_t bank = net.outputs[j].bank.size();
      const bool ok = bank == regions[j] && BigInt(bank) <= bound.exact;
      pass = pass && ok;
      per_output.push_back({{"regions", regions[j]}, {"bank", bank}, {"pass", ok}});
    }
    return {{{"outputs", per_output}, {"bound_N", bound.str()}, {"pass", pass}}, pass};
  }
  config_error("unknown verify check '" + which + "' (approx, lipschitz, continuity, tll-equiv, regions)");
}

// Controller named by `key`: the string "network" loads the compiled
// network, anything else is an oracle description.
struct ControllerSource {
  ControllerFactory factory;
  double k_lip = 0.0;
  json description;
  std::unique_ptr<ControllerOracle> oracle;
};

ControllerSource controller_source(const Config& cfg, const std::string& key, const ControlSystemModel& model) {
  ControllerSource src;
  const json& desc = cfg.at(key);
  if (desc.is_string() && desc.get<std::string>() == "network") {
    const TllNetwork net = load_network(cfg);
    if (net.n != model.n || net.m() != model.m) throw Error(ErrorCode::DimensionMismatch, "network does not fit the model");
    src.factory = tll_controller(net);
    src.k_lip = net.max_gradient_norm();
    src.description = {{"network", cfg.path("network", "network.json")}};
    return src;
  }
  src.oracle = make_oracle(desc, model.n, model.m);
  src.factory = share(as_function(*src.oracle));
  src.k_lip = src.oracle->k_lip();
  src.description = src.oracle->describe();
  return src;
}

Outcome cmd_audit(const Config& cfg, const std::string& which) {
  const ControlSystemModel model = cfg.require_model();
  const std::uint64_t seed = cfg.seed();
  if (which == "invariance") {
    const SpecBudget b = cfg.budget();
    const double step = cfg.positive("step", b.tau / 100.0);
    const ControllerSource psi = controller_source(cfg, "controller", model);
    const InvarianceReport r =
        check_delta_tau_invariance(model, psi.factory, b.delta, b.tau, step, cfg.count("per_axis", 21), cfg.workers());
    json res = r.to_json();
    res["controller"] = psi.description;
    res["delta"] = b.delta;
    res["tau"] = b.tau;
    return {res, r.pass};
  }
  if (which == "gronwall") {
    const SpecBudget b = cfg.budget();
    const double step = cfg.positive("step", b.tau / 100.0);
    const double tol = cfg.positive("tolerance", 1e-7);
    const TllNetwork net = load_network(cfg);
    auto oracle = cfg.oracle("oracle", model.n, model.m);
    const VectorFunction psi = as_function(*oracle);
    const auto lattice = probe_lattice(model.x_box, cfg.count("mu_lattice", 101));
    const double mu = measure_sup_error(psi, [&](std::span<const double> x) { return eval_tll(net, x); }, lattice,
                                        cfg.workers());
    const double k_ups = net.max_gradient_norm();
    const auto probes = probe_points(model.x_box, cfg.count("probes", 100), seed);
    const DeviationReport r = deviation_audit(model, share(psi), tll_controller(net), probes, b.tau, step, mu, k_ups,
                                              b.delta, tol, model.x_box, cfg.workers());
    json res = r.to_json();
    res["mu_formula"] = "sup over probe lattice of |psi - network|";
    res["mu_lattice_points"] = lattice.size();
    res["mu_max"] = mu_max(b).value;
    res["K_upsilon"] = k_ups;
    res["bound_formula"] = "K_u * mu * tau * exp((K_x + K_u * K_upsilon) * tau)";
    res["seed"] = seed;
    return {res, r.pass};
  }
  if (which == "sysid") {
    const double tau = cfg.has("budget") ? cfg.budget().tau : cfg.positive("tau", 0.1);
    const double step = cfg.positive("step", tau / 100.0);
    const double tol = cfg.positive("tolerance", 1e-7);
    const TllNetwork net = load_network(cfg, "surrogate", "surrogate.json");
    if (net.n != model.n + model.m || net.m() != model.n) {
      throw Error(ErrorCode::DimensionMismatch, "surrogate does not fit the model");
    }
    auto oracle = cfg.oracle("oracle", model.n, model.m);
    const VectorFunction psi = as_function(*oracle);
    const double k_cont = cfg.has("K_cont") ? cfg.positive("K_cont", 1.0)
                                            : (cfg.has("budget") ? cfg.budget().k_cont : oracle->k_lip());
    if (!(k_cont > 0.0)) config_error("controller Lipschitz constant unknown; set 'K_cont'");
    const Box xu = Box::product(model.x_box, model.u_box);
    const auto lattice = probe_lattice(xu, cfg.count("mu_lattice", 21));
    const std::size_t n = model.n;
    const double mu = measure_sup_error([&](std::span<const double> z) { return model.f(z.first(n), z.subspan(n)); },
                                        [&](std::span<const double> z) { return eval_tll(net, z); }, lattice,
                                        cfg.workers());
    const auto probes = probe_points(model.x_box, cfg.count("probes", 100), seed);
    const DeviationReport r = sysid_deviation_audit(model, surrogate_field(net), share(psi), probes, tau, step, mu,
                                                    k_cont, tol, model.x_box, cfg.workers());
    json res = r.to_json();
    res["mu_formula"] = "sup over X x U probe lattice of |f - surrogate|";
    res["mu_lattice_points"] = lattice.size();
    res["K_cont"] = k_cont;
    res["bound_formula"] = "K_u * mu * tau * exp((K_x + K_u * K_cont) * tau)";
    res["seed"] = seed;
    return {res, r.pass};
  }
  config_error("unknown audit '" + which + "' (invariance, gronwall, sysid)");
}

Outcome cmd_ads(const Config& cfg) {
  auto load = [&](const std::string& key) {
    return FiniteTransitionSystem::from_json(read_json_file(cfg.at(key).get<std::string>()));
  };
  const FiniteTransitionSystem a = load("ts_a");
  const FiniteTransitionSystem b = load("ts_b");
  const double delta = cfg.real("delta");
  if (delta < 0.0) config_error("'delta' must be >= 0");
  const SimulationResult r = check_ads(a, b, delta);
  json res = r.to_json();
  res["delta"] = delta;
  res["states"] = {a.size(), b.size()};
  return {res, r.total};
}

Outcome cmd_sysid(const Config& cfg) {
  const ControlSystemModel model = cfg.require_model();
  const double eta = cfg.positive("eta", 0.0);
  const Surrogate s = fit_vector_field_surrogate(model, eta);
  json doc = export_network(s.net);
  doc["domain"] = box_to_json(s.domain);
  write_json_file(cfg.out("surrogate.json"), doc);
  const std::size_t n = model.n;
  const auto lattice = probe_lattice(s.domain, cfg.count("mu_lattice", 21));
  const double mu = measure_sup_error([&](std::span<const double> z) { return model.f(z.first(n), z.subspan(n)); },
                                      [&](std::span<const double> z) { return eval_tll(s.net, z); }, lattice,
                                      cfg.workers());
  const ExactSize bound = sysid_size(static_cast<int>(model.n), static_cast<int>(model.m), extent(s.domain), eta);
  json banks = json::array();
  bool within = true;
  for (const auto& o : s.net.outputs) {
    banks.push_back(o.bank.size());
    within = within && BigInt(o.bank.size()) <= bound.exact;
  }
  json res = {{"eta", eta},
              {"bank_sizes", banks},
              {"bound_N", bound.str()},
              {"bound_formula", "(n+m)! * ceil(ext_xu/eta + 2)^(n+m)"},
              {"mu_measured", mu},
              {"mu_lattice_points", lattice.size()},
              {"artifact", cfg.out("surrogate.json")}};
  if (cfg.has("budget")) {
    const SpecBudget b = cfg.budget();
    res["sysid_budget"] = sysid_budget(mu, model.k_x, model.k_u, b.k_cont, b.tau);
    res["recommended_delta"] = sysid_delta(mu, model.k_x, model.k_u, b.k_cont, b.tau);
  }
  return {res, within};
}

Outcome cmd_export(const Config& cfg) {
  const TllNetwork net = load_network(cfg);
  const auto layers = expand_relu(net, cfg.count("max_neurons", 200000));
  json jl = json::array();
  for (const auto& l : layers) {
    json w = json::array();
    for (const auto& row : l.weights) w.push_back(hex_array(row));
    jl.push_back({{"weights", w}, {"bias", hex_array(l.bias)}, {"relu", l.relu}});
  }
  write_json_file(cfg.out("dense.json"), {{"input_dim", net.n}, {"layers", jl}});
  const ArchDescriptor arch = arch_descriptor(net, std::numeric_limits<std::uint64_t>::max());
  return {{{"architecture", arch.to_json()}, {"artifact", cfg.out("dense.json")}}, true};
}

}  // namespace

CommandResult run_command(const std::string& command, const std::string& which, const RunOptions& options) {
  const Config cfg(options);
  Outcome o;
  if (command == "size") {
    o = cmd_size(cfg);
  } else if (command == "grid") {
    o = cmd_grid(cfg);
  } else if (command == "build") {
    o = cmd_build(cfg);
  } else if (command == "compile") {
    o = cmd_compile(cfg);
  } else if (command == "verify") {
    o = cmd_verify(cfg, which);
  } else if (command == "audit") {
    o = cmd_audit(cfg, which);
  } else if (command == "ads-check") {
    o = cmd_ads(cfg);
  } else if (command == "sysid") {
    o = cmd_sysid(cfg);
  } else if (command == "export") {
    o = cmd_export(cfg);
  } else {
    config_error("unknown command '" + command + "'");
  }
  CommandResult r;
  r.report = {{"command", command},
              {"tool_version", kToolVersion},
              {"seed", cfg.seed()},
              {"config", options.config},
              {"results", o.results},
              {"pass", o.pass}};
  if (!which.empty()) r.report["which"] = which;
  if (cfg.has("budget")) r.report["budget"] = budget_json(cfg.budget());
  r.exit_code = o.pass ? kPass : kAuditFailure;
  return r;
}

int run_and_report(const std::string& command, const std::string& which, const RunOptions& options,
                   std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  CommandResult r;
  try {
    std::filesystem::create_directories(options.out_dir);
    r = run_command(command, which, options);
  } catch (const Error& e) {
    log << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    log << "ConfigError: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::filesystem::filesystem_error& e) {
    log << "ConfigError: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kNumericalError;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.report["timing"] = {{"seconds", seconds}};
  const std::string name = which.empty() ? command : command + "-" + which;
  const auto path = (std::filesystem::path(options.out_dir) / (name + ".json")).string();
  try {
    write_json_file(path, r.report);
  } catch (const Error& e) {
    log << e.what() << '\n';
    return kConfigError;
  }
  log << name << ": " << (r.report["pass"].get<bool>() ? "pass" : "FAIL") << " -> " << path << '\n';
  return r.exit_code;
}

}  // namespace tllarch::cli
