#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace jumpstop {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A Levy measure that is not a valid finite measure on the punctured line.
class InvalidMeasureError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or out-of-range user configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A computation produced a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Euler step blew up; carries the offending state and step size.
class EulerStepError : public NumericError {
 public:
  EulerStepError(double x, double dt)
      : NumericError("non-finite Euler step from x=" + std::to_string(x) +
                     " with dt=" + std::to_string(dt)),
        x_(x),
        dt_(dt) {}
  double x() const noexcept { return x_; }
  double dt() const noexcept { return dt_; }

 private:
  double x_;
  double dt_;
};

/// Least-squares system without full column rank on its data support.
class RankDeficiencyError : public Error {
 public:
  explicit RankDeficiencyError(std::size_t step)
      : Error("rank-deficient regression system at time step " +
              std::to_string(step)),
        step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Time step too large for the explicit part of the obstacle solver.
class CflError : public Error {
 public:
  CflError(double dt, double required_dt)
      : Error("time step " + std::to_string(dt) +
              " violates the explicit stability bound; need dt < " +
              std::to_string(required_dt)),
        dt_(dt),
        required_dt_(required_dt) {}
  double dt() const noexcept { return dt_; }
  double required_dt() const noexcept { return required_dt_; }

 private:
  double dt_;
  double required_dt_;
};

/// Tridiagonal elimination hit a zero pivot.
class SingularOperatorError : public Error {
 public:
  using Error::Error;
};

/// A structural invariant of a computed solution does not hold.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

/// Problem-spec text could not be parsed.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : Error("line " + std::to_string(line) + ", column " +
              std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace jumpstop
