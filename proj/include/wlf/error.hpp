#pragma once

#include <stdexcept>
#include <string>

namespace wlf {

// Every failure the library reports carries one of these codes so callers
// (and tests) can match on the exact cause instead of parsing messages.
enum class ErrorCode {
  MissingColumn,
  MalformedInput,
  NonUniformGrid,
  NonFiniteValue,
  EmptySeries,
  ChannelLengthMismatch,
  InsufficientData,
  TooFewSamples,
  NoTrainingSubjects,
  DimensionMismatch,
  LengthMismatch,
  ConstantInput,
  IncompleteMatrix,
  AllZeroDifferences,
  IncompleteGrid,
  InsufficientColumns,
  InvalidConfig,
  IoFailure,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::NonUniformGrid: return "NonUniformGrid";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::ChannelLengthMismatch: return "ChannelLengthMismatch";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::NoTrainingSubjects: return "NoTrainingSubjects";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ConstantInput: return "ConstantInput";
    case ErrorCode::IncompleteMatrix: return "IncompleteMatrix";
    case ErrorCode::AllZeroDifferences: return "AllZeroDifferences";
    case ErrorCode::IncompleteGrid: return "IncompleteGrid";
    case ErrorCode::InsufficientColumns: return "InsufficientColumns";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace wlf
