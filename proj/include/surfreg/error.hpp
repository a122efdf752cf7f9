#pragma once

#include <stdexcept>
#include <string>

namespace surfreg {

enum class ErrorKind {
  InvalidParameter,
  InvalidDepth,
  InsufficientPoints,
  DegenerateFit,
  DegenerateInput,
  EmptyInitialization,
  EmptySurface,
  NoOverlap,
  NoDepth,
  NoData,
  Ordering,
  Format,
  Io,
  Config,
  Segmenter,
  Internal,
};

const char* to_string(ErrorKind kind) noexcept;

/// Coarse grouping used for CLI exit codes and user-facing messages.
enum class ErrorCategory { Config, Io, DegenerateInput, Internal };

ErrorCategory category_of(ErrorKind kind) noexcept;
const char* to_string(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_of(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace surfreg
