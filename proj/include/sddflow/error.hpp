#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sddflow {

enum class ErrorCode {
  kSelfLoop,
  kNonpositiveResistance,
  kVertexOutOfRange,
  kDimensionMismatch,
  kInfeasibleFlow,
  kGraphDisconnected,
  kInvalidTreeEdges,
  kTooSmall,
  kDemandNotBalanced,
  kNotOffTree,
  kNoOffTreeEdges,
  kBadScale,
  kBadOption,
  kNotSymmetric,
  kNotDiagonallyDominant,
  kDecompositionInvariantViolated,
  kInconsistentSystem,
  kParseError,
  kLengthMismatch,
  kInconsistentLaplacian,
  kTooLarge,
  kIoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSelfLoop: return "SelfLoop";
    case ErrorCode::kNonpositiveResistance: return "NonpositiveResistance";
    case ErrorCode::kVertexOutOfRange: return "VertexOutOfRange";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kInfeasibleFlow: return "InfeasibleFlow";
    case ErrorCode::kGraphDisconnected: return "GraphDisconnected";
    case ErrorCode::kInvalidTreeEdges: return "InvalidTreeEdges";
    case ErrorCode::kTooSmall: return "TooSmall";
    case ErrorCode::kDemandNotBalanced: return "DemandNotBalanced";
    case ErrorCode::kNotOffTree: return "NotOffTree";
    case ErrorCode::kNoOffTreeEdges: return "NoOffTreeEdges";
    case ErrorCode::kBadScale: return "BadScale";
    case ErrorCode::kBadOption: return "BadOption";
    case ErrorCode::kNotSymmetric: return "NotSymmetric";
    case ErrorCode::kNotDiagonallyDominant: return "NotDiagonallyDominant";
    case ErrorCode::kDecompositionInvariantViolated: return "DecompositionInvariantViolated";
    case ErrorCode::kInconsistentSystem: return "InconsistentSystem";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kInconsistentLaplacian: return "InconsistentLaplacian";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

// All library failures are reported through this exception; `code()` is the
// stable, testable part and `what()` carries a human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sddflow
