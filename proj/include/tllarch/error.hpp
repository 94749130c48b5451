#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tllarch {

enum class ErrorCode {
  NonPositiveEta,
  CoverageInfeasible,
  OrphanCorner,
  DimensionTooLarge,
  OutsideDomain,
  OracleFailure,
  SingularSystem,
  BudgetExceeded,
  DiscontinuityDetected,
  EmptySelector,
  DimensionMismatch,
  BoundViolated,
  SchemaError,
  InvariantViolation,
  NonPositiveBudget,
  NonFiniteState,
  StepInvalid,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveEta: return "NonPositiveEta";
    case ErrorCode::CoverageInfeasible: return "CoverageInfeasible";
    case ErrorCode::OrphanCorner: return "OrphanCorner";
    case ErrorCode::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorCode::OutsideDomain: return "OutsideDomain";
    case ErrorCode::OracleFailure: return "OracleFailure";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::DiscontinuityDetected: return "DiscontinuityDetected";
    case ErrorCode::EmptySelector: return "EmptySelector";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::BoundViolated: return "BoundViolated";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::NonPositiveBudget: return "NonPositiveBudget";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::StepInvalid: return "StepInvalid";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace tllarch
