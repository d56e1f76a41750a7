#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trajgov {

enum class ErrorCode {
  FormatError,
  ShapeMismatch,
  NonFiniteData,
  MissingFile,
  IoError,
  TooFewLayers,
  EmptyWindow,
  ZeroBaseline,
  NoAnswerFound,
  AnnotationOutOfRange,
  AlignmentUnavailable,
  PairMismatch,
  InsufficientValidLayers,
  ZeroAlignedEnergy,
  UnrealizableTarget,
  PreconditionViolation,
  ConfigError,
};

std::string_view error_code_name(ErrorCode code);

/// Every failure surfaced by the library carries one of the codes above so
/// batch reports can list failures in machine-readable form.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace trajgov
