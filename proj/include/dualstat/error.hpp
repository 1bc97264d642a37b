#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dualstat {

enum class ErrorCode {
  DimensionMismatch,
  RankDeficient,
  NotPositiveDefinite,
  NotSymmetric,
  DegenerateVariance,
  InvalidDf,
  ZeroVector,
  DegenerateDenominator,
  NotIndicator,
  NotBinary,
  OneClass,
  NotScalar,
  InvalidAlpha,
  InvalidN,
  InvalidK,
  InvalidProbability,
  InvalidArgument,
  EstimatorFailure,
  DimsMismatch,
  LabelCountMismatch,
  EmptyRegion,
  IoError,
  ParseError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::InvalidDf: return "InvalidDf";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::NotIndicator: return "NotIndicator";
    case ErrorCode::NotBinary: return "NotBinary";
    case ErrorCode::OneClass: return "OneClass";
    case ErrorCode::NotScalar: return "NotScalar";
    case ErrorCode::InvalidAlpha: return "InvalidAlpha";
    case ErrorCode::InvalidN: return "InvalidN";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::InvalidProbability: return "InvalidProbability";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EstimatorFailure: return "EstimatorFailure";
    case ErrorCode::DimsMismatch: return "DimsMismatch";
    case ErrorCode::LabelCountMismatch: return "LabelCountMismatch";
    case ErrorCode::EmptyRegion: return "EmptyRegion";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace dualstat
