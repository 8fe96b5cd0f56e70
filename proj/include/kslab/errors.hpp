#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kslab {

enum class ErrorCode {
  kInvalidArgument,
  kNonpositiveV,
  kNonpositiveVOrX,
  kOddDegreeSum,
  kParityViolation,
  kInfeasibleTriple,
  kRejectionBudgetExhausted,
  kNoLeafPresent,
  kHasLeafOrIsolatedVertex,
  kEmptyDegreeSequence,
  kOutOfRange,
  kStepTooLarge,
  kHTooLarge,
  kTimeCapExceeded,
  kTraceTooShort,
  kInsufficientData,
  kNonpositiveStatistic,
  kIoFailure,
  kSchemaMismatch,
  kUsage,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kNonpositiveV: return "nonpositive-v";
    case ErrorCode::kNonpositiveVOrX: return "nonpositive-v-or-x";
    case ErrorCode::kOddDegreeSum: return "odd-degree-sum";
    case ErrorCode::kParityViolation: return "parity-violation";
    case ErrorCode::kInfeasibleTriple: return "infeasible-triple";
    case ErrorCode::kRejectionBudgetExhausted: return "rejection-budget-exhausted";
    case ErrorCode::kNoLeafPresent: return "no-leaf-present";
    case ErrorCode::kHasLeafOrIsolatedVertex: return "has-leaf-or-isolated-vertex";
    case ErrorCode::kEmptyDegreeSequence: return "empty-degree-sequence";
    case ErrorCode::kOutOfRange: return "out-of-range";
    case ErrorCode::kStepTooLarge: return "step-too-large";
    case ErrorCode::kHTooLarge: return "h-too-large";
    case ErrorCode::kTimeCapExceeded: return "time-cap-exceeded";
    case ErrorCode::kTraceTooShort: return "trace-too-short";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kNonpositiveStatistic: return "nonpositive-statistic";
    case ErrorCode::kIoFailure: return "io-failure";
    case ErrorCode::kSchemaMismatch: return "schema-mismatch";
    case ErrorCode::kUsage: return "usage-error";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace kslab
