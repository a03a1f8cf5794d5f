#pragma once

#include <stdexcept>
#include <string>

namespace linteg {

enum class ErrorCode {
  InvalidArgument,
  BehindCamera,
  DegenerateSegment,
  InsufficientObservations,
  SingularNormalEquations,
  IntegrityUnavailable,
  NoVisibleLines,
  ParseError,
  InvariantViolation,
  IoError,
  NoOverlap,
  DomainError,
};

const char* to_string(ErrorCode code);

// Every failure raised by the core carries a code so the C boundary can map
// it onto a status value without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace linteg
