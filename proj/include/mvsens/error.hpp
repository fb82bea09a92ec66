#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mvsens {

enum class ErrorCode {
  MissingColumn,
  NonFiniteValue,
  EmptyTreatmentLevel,
  ParseError,
  InvalidLevelPair,
  InvalidArgument,
  DimensionMismatch,
  LengthMismatch,
  EmptyArm,
  EmptyInput,
  DidNotConverge,
  SeparationDetected,
  LpInfeasible,
  ResampleDegenerate,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for errors caused by bad input (CLI exit code 2); false for
/// numerical failures (exit code 3).
bool is_validation_error(ErrorCode code) noexcept;

/**
 * Library exception. what() always starts with the error-code name, e.g.
 * "MissingColumn: column 'age' not found in header".
 */
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& detail);

}  // namespace mvsens
