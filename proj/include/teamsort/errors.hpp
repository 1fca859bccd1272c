#pragma once

#include <stdexcept>
#include <string>

namespace teamsort {

// Base class for every error raised by the library. Callers that only care
// about success/failure catch this; the CLI maps the subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but too large for an exact enumeration.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class InvalidTechnologyError : public Error {
 public:
  using Error::Error;
};

// A numerical solver failed to bracket or converge. `diagnostics` carries a
// machine-readable dump (usually CSV text of the scanned curve).
class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::string diagnostics = {})
      : Error(what), diagnostics_(std::move(diagnostics)) {}
  const std::string& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::string diagnostics_;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class IntegrationError : public Error {
 public:
  using Error::Error;
};

class InferenceError : public Error {
 public:
  using Error::Error;
};

// Parameter choices that make a downstream computation ill-posed, e.g. a wage
// constant that leaves some earnings nonpositive.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

// Malformed files or inconsistent table shapes.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace teamsort
