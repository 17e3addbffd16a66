#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pdl {

/// Stable machine-readable codes; persisted in flagged dataset records.
enum class ErrorCode {
  Parse,
  Io,
  InvalidArgument,
  DegenerateGeometry,
  ShapeOutOfBounds,
  Generation,
  NoDrag,
  Convergence,
  Stagnation,
  Timeout,
  DegenerateGradient,
  BlockedAxis,
  UndefinedCorrelation,
  Numeric,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(ErrorCode::Parse, what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : Error(ErrorCode::Convergence, what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

}  // namespace pdl
