#include "identiscope/errors.hpp"

namespace identiscope {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DivisionByZero: return "DivisionByZero";
    case ErrorCode::DivisionByZeroModP: return "DivisionByZeroModP";
    case ErrorCode::NonRationalExpr: return "NonRationalExpr";
    case ErrorCode::RetriesExhausted: return "RetriesExhausted";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UndeclaredSymbol: return "UndeclaredSymbol";
    case ErrorCode::DuplicateDeclaration: return "DuplicateDeclaration";
    case ErrorCode::MissingDynamics: return "MissingDynamics";
    case ErrorCode::NonIntegerExponent: return "NonIntegerExponent";
    case ErrorCode::InvalidTimeUse: return "InvalidTimeUse";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

ParseError::ParseError(ErrorCode code, std::size_t line, std::size_t column,
                       const std::string& message)
    : Error(code, std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      line_(line),
      column_(column),
      detail_(message) {}

}  // namespace identiscope
