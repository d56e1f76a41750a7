#include "trajgov/error.hpp"

namespace trajgov {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteData: return "NonFiniteData";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::TooFewLayers: return "TooFewLayers";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::ZeroBaseline: return "ZeroBaseline";
    case ErrorCode::NoAnswerFound: return "NoAnswerFound";
    case ErrorCode::AnnotationOutOfRange: return "AnnotationOutOfRange";
    case ErrorCode::AlignmentUnavailable: return "AlignmentUnavailable";
    case ErrorCode::PairMismatch: return "PairMismatch";
    case ErrorCode::InsufficientValidLayers: return "InsufficientValidLayers";
    case ErrorCode::ZeroAlignedEnergy: return "ZeroAlignedEnergy";
    case ErrorCode::UnrealizableTarget: return "UnrealizableTarget";
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace trajgov
