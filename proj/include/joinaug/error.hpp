#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace joinaug {

enum class ErrorKind {
  io,
  format,
  empty_table,
  no_features,
  degenerate_split,
  bad_size,
  missing_column,
  non_numeric_soft_key,
  empty_foreign,
  not_datetime,
  coarser_than_target,
  div_zero,
  width_mismatch,
  non_finite,
  length_mismatch,
  invalid_key,
  config,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (and the
/// CLI exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "IoError";
    case ErrorKind::format: return "FormatError";
    case ErrorKind::empty_table: return "EmptyTable";
    case ErrorKind::no_features: return "NoFeatures";
    case ErrorKind::degenerate_split: return "DegenerateSplit";
    case ErrorKind::bad_size: return "BadSize";
    case ErrorKind::missing_column: return "MissingColumn";
    case ErrorKind::non_numeric_soft_key: return "NonNumericSoftKey";
    case ErrorKind::empty_foreign: return "EmptyForeign";
    case ErrorKind::not_datetime: return "NotDatetime";
    case ErrorKind::coarser_than_target: return "CoarserThanTarget";
    case ErrorKind::div_zero: return "DivZero";
    case ErrorKind::width_mismatch: return "WidthMismatch";
    case ErrorKind::non_finite: return "NonFinite";
    case ErrorKind::length_mismatch: return "LengthMismatch";
    case ErrorKind::invalid_key: return "InvalidKey";
    case ErrorKind::config: return "ConfigError";
  }
  return "Error";
}

}  // namespace joinaug
