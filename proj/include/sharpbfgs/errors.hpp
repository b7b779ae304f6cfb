#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sharpbfgs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class ErrorCode {
  NotPositiveDefinite,
  DimensionMismatch,
  DegenerateDirection,
  DomainError,
  ParseError,
  EmptyDataset,
  NumericalFailure,
  InvalidArgument,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateDirection: return "DegenerateDirection";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by the LIBSVM reader; `line()` is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + reason),
        line_(line),
        reason_(reason) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

inline void require_same_dim(Index a, Index b, const char* where) {
  if (a != b) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(where) + ": " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace sharpbfgs
