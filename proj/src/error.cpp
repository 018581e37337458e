#include "qlev/error.hpp"

namespace qlev {

std::string_view toString(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegeneratePlane: return "DegeneratePlane";
    case ErrorCode::SeedOffLevel: return "SeedOffLevel";
    case ErrorCode::StalledCorrection: return "StalledCorrection";
    case ErrorCode::EmptyLevel: return "EmptyLevel";
    case ErrorCode::DegeneratePointSet: return "DegeneratePointSet";
    case ErrorCode::AmbiguousLabel: return "AmbiguousLabel";
    case ErrorCode::NoCandidate: return "NoCandidate";
    case ErrorCode::BoundednessViolation: return "BoundednessViolation";
    case ErrorCode::IncompleteGrid: return "IncompleteGrid";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

}  // namespace qlev
