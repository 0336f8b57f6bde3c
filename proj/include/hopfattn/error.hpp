#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hopfattn {

enum class ErrorCode {
  // tensor files
  MagicMismatch,
  TruncatedFile,
  NonFiniteEntry,
  UnsupportedDtype,
  IoFailure,
  // shapes and arguments
  InvalidSize,
  ShapeMismatch,
  NotSquare,
  MissingValueWeights,
  NonFiniteInput,
  NonPositiveTau,
  InvalidTolerance,
  InvalidParams,
  // degenerate numerics
  DegenerateZeroCoupling,
  DegenerateZeroMatrix,
  ZeroNormState,
  EmptyVector,
  EmptyList,
  // analysis
  LengthMismatch,
  DegenerateConstantInput,
  UnknownColumn,
  BadQuantile,
  MissingId,
  DuplicateId,
  MalformedTable,
  // cli
  ConflictingModes,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MagicMismatch: return "MagicMismatch";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::NonFiniteEntry: return "NonFiniteEntry";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvalidSize: return "InvalidSize";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NotSquare: return "NotSquare";
    case ErrorCode::MissingValueWeights: return "MissingValueWeights";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::NonPositiveTau: return "NonPositiveTau";
    case ErrorCode::InvalidTolerance: return "InvalidTolerance";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::DegenerateZeroCoupling: return "DegenerateZeroCoupling";
    case ErrorCode::DegenerateZeroMatrix: return "DegenerateZeroMatrix";
    case ErrorCode::ZeroNormState: return "ZeroNormState";
    case ErrorCode::EmptyVector: return "EmptyVector";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateConstantInput: return "DegenerateConstantInput";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::BadQuantile: return "BadQuantile";
    case ErrorCode::MissingId: return "MissingId";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::MalformedTable: return "MalformedTable";
    case ErrorCode::ConflictingModes: return "ConflictingModes";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hopfattn
