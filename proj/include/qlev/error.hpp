#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qlev {

enum class ErrorCode {
  ZeroVector,
  DimensionMismatch,
  DegeneratePlane,
  SeedOffLevel,
  StalledCorrection,
  EmptyLevel,
  DegeneratePointSet,
  AmbiguousLabel,
  NoCandidate,
  BoundednessViolation,
  IncompleteGrid,
  EmptyInput,
  Config,
};

std::string_view toString(ErrorCode code);

/// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qlev
