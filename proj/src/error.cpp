#include "mvsens/error.hpp"

namespace mvsens {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::EmptyTreatmentLevel: return "EmptyTreatmentLevel";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidLevelPair: return "InvalidLevelPair";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyArm: return "EmptyArm";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DidNotConverge: return "DidNotConverge";
    case ErrorCode::SeparationDetected: return "SeparationDetected";
    case ErrorCode::LpInfeasible: return "LpInfeasible";
    case ErrorCode::ResampleDegenerate: return "ResampleDegenerate";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DidNotConverge:
    case ErrorCode::SeparationDetected:
    case ErrorCode::LpInfeasible:
    case ErrorCode::ResampleDegenerate:
      return false;
    default:
      return true;
  }
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

}  // namespace mvsens
