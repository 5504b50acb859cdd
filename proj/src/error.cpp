#include "ecgxai/error.hpp"

namespace ecgxai {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::SeriesTooShort: return "SeriesTooShort";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::NotScalar: return "NotScalar";
    case ErrorKind::SingleClassData: return "SingleClassData";
    case ErrorKind::ChannelMismatch: return "ChannelMismatch";
    case ErrorKind::EmptySet: return "EmptySet";
    case ErrorKind::EmptyBaselineSet: return "EmptyBaselineSet";
    case ErrorKind::BudgetTooSmall: return "BudgetTooSmall";
    case ErrorKind::DegenerateDesign: return "DegenerateDesign";
    case ErrorKind::WrongChannelCount: return "WrongChannelCount";
    case ErrorKind::MissingDiagnosis: return "MissingDiagnosis";
    case ErrorKind::EmptyRegion: return "EmptyRegion";
    case ErrorKind::OutOfWindow: return "OutOfWindow";
    case ErrorKind::InvalidAnnotation: return "InvalidAnnotation";
    case ErrorKind::EmptyGroundTruth: return "EmptyGroundTruth";
    case ErrorKind::DegenerateRegion: return "DegenerateRegion";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::MissingPrediction: return "MissingPrediction";
    case ErrorKind::MissingCheckpoint: return "MissingCheckpoint";
    case ErrorKind::MissingAnnotation: return "MissingAnnotation";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

}  // namespace ecgxai
