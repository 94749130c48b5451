#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "json.hpp"

namespace tllarch {

using BigInt = boost::multiprecision::cpp_int;

struct SpecBudget {
  double k_x = 0.0;
  double k_u = 0.0;
  double k_cont = 0.0;
  double tau = 0.0;
  double delta = 0.0;
  /// Multiplier on K_u * K_cont in the exponent. 3 follows from the 3*K_cont
  /// Lipschitz bound on the interpolant; 2 is the commonly printed variant.
  int exponent_multiplier = 3;
};

/// Throws NonPositiveBudget unless K_x, K_u >= 0, K_cont, tau, delta > 0 and
/// the multiplier is 2 or 3.
void validate(const SpecBudget& budget);

struct MuMax {
  /// delta / (K_u tau e^{(K_x + c K_u K_cont) tau}); +inf when K_u = 0.
  double value = 0.0;
  /// The defining inequality is strict: any mu below `value` is admissible.
  bool strict = true;
  std::string warning;
};

MuMax mu_max(const SpecBudget& budget);

/// mu / (3 K_cont).
double eta_max(double mu, double k_cont);

/// Largest admissible value minus a relative margin.
double strictly_below(double value, double margin = 1e-9);

struct ExactSize {
  BigInt exact;
  double approx = 0.0;

  std::string str() const { return exact.str(); }
};

/// ceil(ext/eta + 2), the per-axis hypercube count bound.
std::uint64_t cells_per_axis(double ext, double eta);

/// n! * ceil(ext/eta + 2)^n.
ExactSize controller_size(int n, double ext, double eta);
/// (n+m)! * ceil(ext/eta + 2)^(n+m).
ExactSize sysid_size(int n, int m, double ext_xu, double eta);
/// ceil(ext/eta + 2)^n.
ExactSize hypercube_bound(int n, double ext, double eta);

/// K_u mu tau e^{(K_x + K_u K_cont) tau}; an admissible delta must exceed it.
double sysid_budget(double mu, double k_x, double k_u, double k_cont, double tau);
/// sysid_budget scaled by (1 + margin).
double sysid_delta(double mu, double k_x, double k_u, double k_cont, double tau, double margin = 1e-6);

/// K_u mu tau e^{(K_x + K_u K_lip) tau}.
double gronwall_bound(double mu, double k_x, double k_u, double k_lip, double tau);

struct TauSweepEntry {
  double tau = 0.0;
  double mu = 0.0;
};

struct TauSweep {
  std::vector<TauSweepEntry> entries;
  std::size_t best = 0;
};

/// mu_max over each tau with the other budget fields fixed.
TauSweep sweep_tau(const SpecBudget& budget, const std::vector<double>& taus);

struct SizingResult {
  SpecBudget budget;
  int n = 0;
  int m = 0;
  double ext = 0.0;
  MuMax mu;
  double eta = 0.0;
  bool eta_overridden = false;
  ExactSize n_control;
  ExactSize n_sysid;
  ExactSize hypercubes;
  double ext_xu = 0.0;

  nlohmann::json to_json() const;
};

/// Chains mu_max, eta_max and the size formulas. A positive `eta_override`
/// replaces the derived eta. The sys-id size uses ext_xu when positive.
SizingResult size_architecture(const SpecBudget& budget, int n, int m, double ext, double ext_xu = 0.0,
                               double eta_override = 0.0);

}  // namespace tllarch
