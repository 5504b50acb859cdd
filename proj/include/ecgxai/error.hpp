#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ecgxai {

enum class ErrorKind {
  SeriesTooShort,
  InsufficientData,
  InvalidConfig,
  ParseError,
  SchemaError,
  IoError,
  ShapeMismatch,
  NonFinite,
  NotScalar,
  SingleClassData,
  ChannelMismatch,
  EmptySet,
  EmptyBaselineSet,
  BudgetTooSmall,
  DegenerateDesign,
  WrongChannelCount,
  MissingDiagnosis,
  EmptyRegion,
  OutOfWindow,
  InvalidAnnotation,
  EmptyGroundTruth,
  DegenerateRegion,
  EmptyInput,
  MissingPrediction,
  MissingCheckpoint,
  MissingAnnotation,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace ecgxai
