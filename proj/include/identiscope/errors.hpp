#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace identiscope {

enum class ErrorCode {
  DivisionByZero,
  DivisionByZeroModP,
  NonRationalExpr,
  RetriesExhausted,
  Timeout,
  SyntaxError,
  UndeclaredSymbol,
  DuplicateDeclaration,
  MissingDynamics,
  NonIntegerExponent,
  InvalidTimeUse,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base exception for everything the library reports. The code is stable and
/// machine readable; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Model-file diagnostics carry a 1-based source location.
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, std::size_t line, std::size_t column,
             const std::string& message);

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  /// The message without the "line:col: " prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::string detail_;
};

}  // namespace identiscope
