#pragma once

#include <stdexcept>
#include <string>

namespace repfrechet {

/// Machine-readable error category. The CLI maps these onto exit codes.
enum class ErrorCode {
  shape,        ///< incompatible object kinds or dimensions
  domain,       ///< argument outside the operation's domain
  validation,   ///< object or dataset invariant violated
  parse,        ///< malformed input file
  calibration,  ///< test statistic or null law undefined for the data
  numeric,      ///< numerical routine failed
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& m) : Error(ErrorCode::shape, m) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& m) : Error(ErrorCode::domain, m) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& m) : Error(ErrorCode::validation, m) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& m) : Error(ErrorCode::parse, m) {}
};

class CalibrationError : public Error {
 public:
  explicit CalibrationError(const std::string& m) : Error(ErrorCode::calibration, m) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& m) : Error(ErrorCode::numeric, m) {}
};

}  // namespace repfrechet
