#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace moveprim {

enum class ErrorCode {
  InvalidArgument,
  MalformedHeader,
  MalformedRow,
  MissingSensorAtTimestamp,
  NonMonotoneTimestamps,
  SampleRateMismatch,
  OverlapAfterRounding,
  UnknownLabel,
  IoError,
  RecordingTooShort,
  TooFewSamples,
  WindowTooShort,
  DegenerateScatter,
  MissingClass,
  DimensionMismatch,
  SingleClass,
  EmptyModel,
  LabelTooSmall,
  SegmentWithoutWindows,
  NoPredictionsForClass,
  ClassAbsent,
  OneClassOnly,
  BudgetExceeded,
  InvalidSpec,
  MissingClassAtFraction,
  BelowClockResolution,
};

inline std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::MissingSensorAtTimestamp: return "MissingSensorAtTimestamp";
    case ErrorCode::NonMonotoneTimestamps: return "NonMonotoneTimestamps";
    case ErrorCode::SampleRateMismatch: return "SampleRateMismatch";
    case ErrorCode::OverlapAfterRounding: return "OverlapAfterRounding";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::RecordingTooShort: return "RecordingTooShort";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::DegenerateScatter: return "DegenerateScatter";
    case ErrorCode::MissingClass: return "MissingClass";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::EmptyModel: return "EmptyModel";
    case ErrorCode::LabelTooSmall: return "LabelTooSmall";
    case ErrorCode::SegmentWithoutWindows: return "SegmentWithoutWindows";
    case ErrorCode::NoPredictionsForClass: return "NoPredictionsForClass";
    case ErrorCode::ClassAbsent: return "ClassAbsent";
    case ErrorCode::OneClassOnly: return "OneClassOnly";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::MissingClassAtFraction: return "MissingClassAtFraction";
    case ErrorCode::BelowClockResolution: return "BelowClockResolution";
  }
  return "Unknown";
}

// Every failure raised by the library carries a code so callers (and the
// CLI exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // Validation errors are the caller's fault (bad input); everything else
  // is a runtime failure.
  bool is_validation() const noexcept {
    switch (code_) {
      case ErrorCode::IoError:
      case ErrorCode::BudgetExceeded:
      case ErrorCode::BelowClockResolution:
        return false;
      default:
        return true;
    }
  }

 private:
  ErrorCode code_;
};

}  // namespace moveprim
