#include "tllarch/sizing.hpp"

#include <cmath>
#include <limits>

#include "tllarch/error.hpp"
#include "tllarch/hexfloat.hpp"

namespace tllarch {
namespace {

ExactSize power_times_factorial(int d, std::uint64_t base) {
  BigInt f = 1;
  for (int k = 2; k <= d; ++k) f *= k;
  BigInt p = 1;
  for (int k = 0; k < d; ++k) p *= base;
  ExactSize out;
  out.exact = f * p;
  out.approx = out.exact.convert_to<double>();
  return out;
}

void require_eta(double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw Error(ErrorCode::NonPositiveEta, "eta must be positive and finite");
}

}  // namespace

void validate(const SpecBudget& b) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::NonPositiveBudget, what); };
  if (!(b.k_x >= 0.0) || !std::isfinite(b.k_x)) fail("K_x must be finite and >= 0");
  if (!(b.k_u >= 0.0) || !std::isfinite(b.k_u)) fail("K_u must be finite and >= 0");
  if (!(b.k_cont > 0.0) || !std::isfinite(b.k_cont)) fail("K_cont must be finite and > 0");
  if (!(b.tau > 0.0) || !std::isfinite(b.tau)) fail("tau must be finite and > 0");
  if (!(b.delta > 0.0) || !std::isfinite(b.delta)) fail("delta must be finite and > 0");
  if (b.exponent_multiplier != 2 && b.exponent_multiplier != 3) fail("exponent multiplier must be 2 or 3");
}

MuMax mu_max(const SpecBudget& b) {
  validate(b);
  MuMax out;
  if (b.k_u == 0.0) {
    out.value = std::numeric_limits<double>::infinity();
    out.warning = "K_u = 0: control error cannot perturb the dynamics, mu is unbounded";
    return out;
  }
  const double rate = b.k_x + b.exponent_multiplier * b.k_u * b.k_cont;
  out.value = b.delta / (b.k_u * b.tau * std::exp(rate * b.tau));
  return out;
}

double eta_max(double mu, double k_cont) {
  if (!(mu > 0.0) || !(k_cont > 0.0)) throw Error(ErrorCode::NonPositiveBudget, "mu and K_cont must be positive");
  return mu / (3.0 * k_cont);
}

double strictly_below(double value, double margin) { return value * (1.0 - margin); }

std::uint64_t cells_per_axis(double ext, double eta) {
  require_eta(eta);
  const double c = std::ceil(ext / eta + 2.0);
  if (!(c < 9.0e15)) throw Error(ErrorCode::BudgetExceeded, "cell count per axis overflows");
  return static_cast<std::uint64_t>(c);
}

ExactSize controller_size(int n, double ext, double eta) {
  return power_times_factorial(n, cells_per_axis(ext, eta));
}

ExactSize sysid_size(int n, int m, double ext_xu, double eta) {
  return power_times_factorial(n + m, cells_per_axis(ext_xu, eta));
}

ExactSize hypercube_bound(int n, double ext, double eta) {
  ExactSize s = power_times_factorial(n, cells_per_axis(ext, eta));
  BigInt f = 1;
  for (int k = 2; k <= n; ++k) f *= k;
  s.exact /= f;
  s.approx = s.exact.convert_to<double>();
  return s;
}

double sysid_budget(double mu, double k_x, double k_u, double k_cont, double tau) {
  return k_u * mu * tau * std::exp((k_x + k_u * k_cont) * tau);
}

double sysid_delta(double mu, double k_x, double k_u, double k_cont, double tau, double margin) {
  return sysid_budget(mu, k_x, k_u, k_cont, tau) * (1.0 + margin);
}

double gronwall_bound(double mu, double k_x, double k_u, double k_lip, double tau) {
  return k_u * mu * tau * std::exp((k_x + k_u * k_lip) * tau);
}

TauSweep sweep_tau(const SpecBudget& budget, const std::vector<double>& taus) {
  TauSweep out;
  for (double t : taus) {
    SpecBudget b = budget;
    b.tau = t;
    out.entries.push_back({t, mu_max(b).value});
    if (out.entries.back().mu > out.entries[out.best].mu) out.best = out.entries.size() - 1;
  }
  return out;
}

SizingResult size_architecture(const SpecBudget& budget, int n, int m, double ext, double ext_xu,
                               double eta_override) {
  SizingResult r;
  r.budget = budget;
  r.n = n;
  r.m = m;
  r.ext = ext;
  r.ext_xu = ext_xu > 0.0 ? ext_xu : ext;
  r.mu = mu_max(budget);
  if (eta_override > 0.0) {
    r.eta = eta_override;
    r.eta_overridden = true;
  } else {
    if (!std::isfinite(r.mu.value)) {
      throw Error(ErrorCode::NonPositiveBudget, "mu is unbounded; supply an explicit eta");
    }
    r.eta = eta_max(r.mu.value, budget.k_cont);
  }
  r.n_control = controller_size(n, ext, r.eta);
  r.n_sysid = sysid_size(n, m, r.ext_xu, r.eta);
  r.hypercubes = hypercube_bound(n, ext, r.eta);
  return r;
}

nlohmann::json SizingResult::to_json() const {
  const int c = budget.exponent_multiplier;
  nlohmann::json j;
  j["inputs"] = {{"K_x", budget.k_x},     {"K_u", budget.k_u}, {"K_cont", budget.k_cont},
                 {"tau", budget.tau},     {"delta", budget.delta}, {"exponent_multiplier", c},
                 {"n", n},                {"m", m},            {"ext", ext},
                 {"ext_xu", ext_xu}};
  j["mu_max"] = {{"value", mu.value},
                 {"hex", to_hexfloat(mu.value)},
                 {"strict", mu.strict},
                 {"formula", "delta / (K_u * tau * exp((K_x + " + std::to_string(c) + " * K_u * K_cont) * tau))"}};
  if (!mu.warning.empty()) j["mu_max"]["warning"] = mu.warning;
  j["eta"] = {{"value", eta},
              {"hex", to_hexfloat(eta)},
              {"overridden", eta_overridden},
              {"formula", eta_overridden ? "supplied" : "mu_max / (3 * K_cont)"}};
  j["N_control"] = {{"exact", n_control.str()}, {"approx", n_control.approx},
                    {"formula", "n! * ceil(ext/eta + 2)^n"}};
  j["N_sysid"] = {{"exact", n_sysid.str()}, {"approx", n_sysid.approx},
                  {"formula", "(n+m)! * ceil(ext_xu/eta + 2)^(n+m)"}};
  j["hypercube_bound"] = {{"exact", hypercubes.str()}, {"formula", "ceil(ext/eta + 2)^n"}};
  return j;
}

}  // namespace tllarch
