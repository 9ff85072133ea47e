#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace estrocon {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of an operation (d <= 0, mu == 0, ...).
class DomainError : public Error {
public:
  using Error::Error;
};

/// A right-hand side or adjoint evaluation saw a non-finite or out-of-range input.
class EvaluationError : public Error {
public:
  using Error::Error;
};

/// The integrator could not reach the end of the requested span.
class IntegrationError : public Error {
public:
  IntegrationError(const std::string& what, double last_time)
      : Error(what), last_accepted_time(last_time) {}
  double last_accepted_time;
};

/// A state component fell below the non-negativity tolerance and could not
/// be recovered by step rejection.
class IntegrityError : public Error {
public:
  using Error::Error;
};

/// An iterative method stopped without meeting its convergence criterion, or
/// too many evaluations in a batch failed.
class ConvergenceError : public Error {
public:
  using Error::Error;
};

/// Parameter or configuration validation failure; carries every violation.
class ValidationError : public Error {
public:
  explicit ValidationError(std::vector<std::string> violations);
  std::vector<std::string> violations;
};

/// A file could not be opened, read or written.
class IoError : public Error {
public:
  using Error::Error;
};

/// Malformed input file. `line` is 1-based, 0 when not applicable.
class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t line_number)
      : Error(what), line(line_number) {}
  std::size_t line;
};

}  // namespace estrocon
