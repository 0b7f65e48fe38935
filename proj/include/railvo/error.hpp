#pragma once

#include <stdexcept>
#include <string>

namespace railvo {

enum class ErrorCode {
  Format,
  EmptyWarp,
  DegeneratePoint,
  InsufficientOverlap,
  NoTexture,
  NoEpipole,
  InsufficientFlow,
  DegenerateFlow,
  AmbiguousPose,
  ParallelFlow,
  InvalidMeasurement,
  IllConditionedTag,
  Monotonicity,
  Config,
  Alignment,
  EmptySeries,
  DatasetMismatch,
  InvalidArgument,
  Io,
};

const char* to_string(ErrorCode code);

/// Every recoverable failure in the toolkit is reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace railvo
