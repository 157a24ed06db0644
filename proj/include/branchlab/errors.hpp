#pragma once

#include <stdexcept>
#include <string>

namespace branchlab {

enum class ErrorCode {
  NegativeRate,
  NegativeMass,
  ProbabilitySumMismatch,
  EmptyOffspringList,
  ParseError,
  DegenerateSpectrum,
  NonPositivePrincipal,
  Overflow,
  DivergentIntegral,
  ZeroInitialMass,
  StepTooLarge,
  InsufficientSurvivors,
  PreconditionViolated,
  DegenerateConditionalVariance,
  WindowTooShort,
  UsageError,
};

const char* error_code_name(ErrorCode code);

/// All library failures surface as this exception; `code()` identifies the
/// condition so callers (CLI, batteries) can map it to exit codes or verdicts.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_error(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NegativeRate: return "NegativeRate";
    case ErrorCode::NegativeMass: return "NegativeMass";
    case ErrorCode::ProbabilitySumMismatch: return "ProbabilitySumMismatch";
    case ErrorCode::EmptyOffspringList: return "EmptyOffspringList";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorCode::NonPositivePrincipal: return "NonPositivePrincipal";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::DivergentIntegral: return "DivergentIntegral";
    case ErrorCode::ZeroInitialMass: return "ZeroInitialMass";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::InsufficientSurvivors: return "InsufficientSurvivors";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::DegenerateConditionalVariance: return "DegenerateConditionalVariance";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "UnknownError";
}

}  // namespace branchlab
