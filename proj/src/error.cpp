#include "surfreg/error.hpp"

namespace surfreg {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::InvalidDepth: return "invalid-depth";
    case ErrorKind::InsufficientPoints: return "insufficient-points";
    case ErrorKind::DegenerateFit: return "degenerate-fit";
    case ErrorKind::DegenerateInput: return "degenerate-input";
    case ErrorKind::EmptyInitialization: return "empty-initialization";
    case ErrorKind::EmptySurface: return "empty-surface";
    case ErrorKind::NoOverlap: return "no-overlap";
    case ErrorKind::NoDepth: return "no-depth";
    case ErrorKind::NoData: return "no-data";
    case ErrorKind::Ordering: return "ordering";
    case ErrorKind::Format: return "format";
    case ErrorKind::Io: return "io";
    case ErrorKind::Config: return "config";
    case ErrorKind::Segmenter: return "segmenter";
    case ErrorKind::Internal: return "internal";
  }
  return "internal";
}

ErrorCategory category_of(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::InvalidParameter:
      return ErrorCategory::Config;
    case ErrorKind::Io:
    case ErrorKind::Format:
      return ErrorCategory::Io;
    case ErrorKind::InvalidDepth:
    case ErrorKind::InsufficientPoints:
    case ErrorKind::DegenerateFit:
    case ErrorKind::DegenerateInput:
    case ErrorKind::EmptyInitialization:
    case ErrorKind::EmptySurface:
    case ErrorKind::NoOverlap:
    case ErrorKind::NoDepth:
    case ErrorKind::NoData:
      return ErrorCategory::DegenerateInput;
    case ErrorKind::Ordering:
    case ErrorKind::Segmenter:
    case ErrorKind::Internal:
      return ErrorCategory::Internal;
  }
  return ErrorCategory::Internal;
}

const char* to_string(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::DegenerateInput: return "degenerate-input";
    case ErrorCategory::Internal: return "internal";
  }
  return "internal";
}

}  // namespace surfreg
