#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace echem {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of a physical law (negative
/// temperature, positive side-reaction current, Q above Q_0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or invalid configuration (grid sizes, parameter files, gains).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Stoichiometry requested outside the tabulated OCP range.
class ExtrapolationError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Surface concentration at 0 or c_max, where the exchange current vanishes.
class KineticSingularityError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// SEI growth has closed the anode pores (porosity <= 0).
class PoreCloggingError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A concentration left its physical range [0, c_max]. Not a numerical
/// failure: the model was driven past the electrode's capacity.
class SaturationError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown (NaN, non-positive electrolyte concentration).
class IntegrationError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NonMonotoneTimeError : public ParseError {
 public:
  using ParseError::ParseError;
};

class NonFiniteValueError : public ParseError {
 public:
  using ParseError::ParseError;
};

/// A failure inside a time loop, tagged with the sample time at which it
/// happened and the kind of the underlying error.
class SimulationError : public Error {
 public:
  enum class Kind { Saturation, Integration, Domain, Other };

  SimulationError(Kind kind, double t, const std::string& what)
      : Error("t=" + std::to_string(t) + " s: " + what), kind_(kind), time_(t) {}

  Kind kind() const noexcept { return kind_; }
  double time() const noexcept { return time_; }

 private:
  Kind kind_;
  double time_;
};

}  // namespace echem
