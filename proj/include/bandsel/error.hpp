#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bandsel {

enum class ErrorCode {
  // data / ingestion
  kIo,
  kMalformedHeader,
  kSizeMismatch,
  kNonFiniteValue,
  kUnsupportedDtype,
  kIndexOutOfRange,
  kEmptyResult,
  kConstantBand,
  // selection / environment
  kEmptySubset,
  kNotSuccessor,
  kIllegalAction,
  kEpisodeFinished,
  kNoLegalAction,
  kBudgetExceeded,
  // network / training
  kShapeMismatch,
  kNonFiniteGradient,
  kDivergedLoss,
  // evaluation
  kEmptyClass,
  kEmptyTrainingSet,
  kEmptyConfusion,
  // configuration
  kInvalidConfig,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kMalformedHeader: return "MalformedHeader";
    case ErrorCode::kSizeMismatch: return "SizeMismatch";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kUnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kEmptyResult: return "EmptyResult";
    case ErrorCode::kConstantBand: return "ConstantBand";
    case ErrorCode::kEmptySubset: return "EmptySubset";
    case ErrorCode::kNotSuccessor: return "NotSuccessor";
    case ErrorCode::kIllegalAction: return "IllegalAction";
    case ErrorCode::kEpisodeFinished: return "EpisodeFinished";
    case ErrorCode::kNoLegalAction: return "NoLegalAction";
    case ErrorCode::kBudgetExceeded: return "BudgetExceeded";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
    case ErrorCode::kEmptyClass: return "EmptyClass";
    case ErrorCode::kEmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::kEmptyConfusion: return "EmptyConfusion";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable error code. The message is prefixed
/// with the code name, e.g. "SizeMismatch: payload holds 32 bytes, expected 48".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bandsel
