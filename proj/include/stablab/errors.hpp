#pragma once

#include <stdexcept>
#include <string>

namespace stablab {

/// Failure categories surfaced by constructors and operations.  Every throw
/// site attaches a human-readable message naming the worst offending index
/// tuple / residual where that makes sense.
enum class ErrorKind {
  DimensionMismatch,
  AssociativityViolation,
  UnitLawViolation,
  NotSubmultiplicative,
  NotAGroup,
  NotAGroupAlgebra,
  WrongAlgebra,
  WrongNormKind,
  DiagonalRejected,
  UnsupportedDegree,
  BudgetExceeded,
  DomainError,
  NonUnitalInput,
  BaseNotMultiplicative,
  ConfigError,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::AssociativityViolation: return "AssociativityViolation";
    case ErrorKind::UnitLawViolation: return "UnitLawViolation";
    case ErrorKind::NotSubmultiplicative: return "NotSubmultiplicative";
    case ErrorKind::NotAGroup: return "NotAGroup";
    case ErrorKind::NotAGroupAlgebra: return "NotAGroupAlgebra";
    case ErrorKind::WrongAlgebra: return "WrongAlgebra";
    case ErrorKind::WrongNormKind: return "WrongNormKind";
    case ErrorKind::DiagonalRejected: return "DiagonalRejected";
    case ErrorKind::UnsupportedDegree: return "UnsupportedDegree";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::NonUnitalInput: return "NonUnitalInput";
    case ErrorKind::BaseNotMultiplicative: return "BaseNotMultiplicative";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Error";
}

}  // namespace stablab
