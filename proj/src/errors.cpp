#include "pdl/errors.hpp"

namespace pdl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Io: return "io";
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::DegenerateGeometry: return "degenerate_geometry";
    case ErrorCode::ShapeOutOfBounds: return "shape_out_of_bounds";
    case ErrorCode::Generation: return "generation";
    case ErrorCode::NoDrag: return "no_drag";
    case ErrorCode::Convergence: return "convergence";
    case ErrorCode::Stagnation: return "stagnation";
    case ErrorCode::Timeout: return "timeout";
    case ErrorCode::DegenerateGradient: return "degenerate_gradient";
    case ErrorCode::BlockedAxis: return "blocked_axis";
    case ErrorCode::UndefinedCorrelation: return "undefined_correlation";
    case ErrorCode::Numeric: return "numeric";
  }
  return "unknown";
}

}  // namespace pdl
