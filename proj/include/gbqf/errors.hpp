#pragma once

#include <stdexcept>
#include <string>

namespace gbqf {

// Error categories shared between the C++ core and the C ABI.
enum class ErrorCode : int {
  Ok = 0,
  DimensionMismatch = 1,
  InvalidArgument = 2,
  MemoryCapExceeded = 3,
  ProjectionCollapse = 4,
  NormalizationBreakdown = 5,
  NonFiniteState = 6,
  GuardViolation = 7,
  InvariantViolation = 8,
  ConfigError = 9,
  IoError = 10,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::Ok: return "ok";
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::MemoryCapExceeded: return "memory cap exceeded";
    case ErrorCode::ProjectionCollapse: return "projection collapse";
    case ErrorCode::NormalizationBreakdown: return "normalization breakdown";
    case ErrorCode::NonFiniteState: return "non-finite state";
    case ErrorCode::GuardViolation: return "guard violation";
    case ErrorCode::InvariantViolation: return "invariant violation";
    case ErrorCode::ConfigError: return "config error";
    case ErrorCode::IoError: return "io error";
  }
  return "unknown";
}

}  // namespace gbqf
