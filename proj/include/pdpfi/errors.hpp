#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pdpfi {

enum class ErrorKind {
  IoError,
  EmptyFile,
  MissingTarget,
  ParseError,
  NonFiniteValue,
  IndexOutOfBounds,
  EmptyTrainingSet,
  DegenerateDesign,
  LengthMismatch,
  InvalidSize,
  InvalidProbability,
  TooFewSamples,
  TooFewRows,
  TooFewSplits,
  ConstantFeature,
  PlanMismatch,
  MixedKinds,
  InvalidArgument,
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::EmptyFile: return "EmptyFile";
    case ErrorKind::MissingTarget: return "MissingTarget";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::IndexOutOfBounds: return "IndexOutOfBounds";
    case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::DegenerateDesign: return "DegenerateDesign";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::InvalidSize: return "InvalidSize";
    case ErrorKind::InvalidProbability: return "InvalidProbability";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::TooFewRows: return "TooFewRows";
    case ErrorKind::TooFewSplits: return "TooFewSplits";
    case ErrorKind::ConstantFeature: return "ConstantFeature";
    case ErrorKind::PlanMismatch: return "PlanMismatch";
    case ErrorKind::MixedKinds: return "MixedKinds";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Library-wide exception. `kind()` is stable and testable; the message is
/// for humans. Parse-stage errors carry 0-based row/column positions.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind) {}

  Error(ErrorKind kind, std::string message, std::size_t row, std::size_t col)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message +
                           " (row " + std::to_string(row) + ", col " +
                           std::to_string(col) + ")"),
        kind_(kind), row_(row), col_(col), has_position_(true) {}

  ErrorKind kind() const noexcept { return kind_; }
  bool has_position() const noexcept { return has_position_; }
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  ErrorKind kind_;
  std::size_t row_ = 0;
  std::size_t col_ = 0;
  bool has_position_ = false;
};

}  // namespace pdpfi
