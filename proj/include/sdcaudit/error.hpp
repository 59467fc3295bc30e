#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sdcaudit {

/// Failure categories surfaced by the audit library. The CLI maps every one
/// of these to exit code 1.
enum class ErrorCode {
  MissingColumn,
  UnknownLevel,
  NonNumericContinuous,
  EmptyDataset,
  InvalidSchema,
  DegenerateSplit,
  UnrecognisedHyperparameter,
  InvalidHyperparameter,
  SingleClassTrainingSet,
  ShapeMismatch,
  RowNotStochastic,
  ColumnCountMismatch,
  SchemaViolation,
  MissingDigest,
  DegenerateLabels,
  NoSamples,
  TooFewRecords,
  AttributeNotInSchema,
  Io,
  Usage,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::UnknownLevel: return "UnknownLevel";
    case ErrorCode::NonNumericContinuous: return "NonNumericContinuous";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InvalidSchema: return "InvalidSchema";
    case ErrorCode::DegenerateSplit: return "DegenerateSplit";
    case ErrorCode::UnrecognisedHyperparameter: return "UnrecognisedHyperparameter";
    case ErrorCode::InvalidHyperparameter: return "InvalidHyperparameter";
    case ErrorCode::SingleClassTrainingSet: return "SingleClassTrainingSet";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::RowNotStochastic: return "RowNotStochastic";
    case ErrorCode::ColumnCountMismatch: return "ColumnCountMismatch";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::MissingDigest: return "MissingDigest";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::NoSamples: return "NoSamples";
    case ErrorCode::TooFewRecords: return "TooFewRecords";
    case ErrorCode::AttributeNotInSchema: return "AttributeNotInSchema";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Usage: return "Usage";
  }
  return "Unknown";
}

class AuditError : public std::runtime_error {
 public:
  AuditError(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sdcaudit
