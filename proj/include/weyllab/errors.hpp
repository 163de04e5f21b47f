#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace weyllab {

// Base of every error raised by the library. The CLI maps the two families
// below onto its exit codes (input problems -> 2, numerical failures -> 3).
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Invalid input: bad parameters, malformed descriptors, violated preconditions.
class InputError : public Error {
  public:
    using Error::Error;
};

class ConfigError : public InputError {
  public:
    using InputError::InputError;
};

class DomainError : public InputError {
  public:
    using InputError::InputError;
};

// A profile or model descriptor failed validation; `witness` is the
// coordinate at which the violated condition was observed.
class ValidationError : public InputError {
  public:
    ValidationError(std::string condition, double witness, const std::string& detail)
        : InputError(condition + " violated at z=" + std::to_string(witness) + ": " + detail),
          condition_(std::move(condition)), witness_(witness) {}

    const std::string& condition() const noexcept { return condition_; }
    double witness() const noexcept { return witness_; }

  private:
    std::string condition_;
    double witness_;
};

class PlanInfeasibleError : public InputError {
  public:
    using InputError::InputError;
};

// Numerical failures.
class NumericalError : public Error {
  public:
    using Error::Error;
};

class IntegrationError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

class NoReturnError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

class ResolutionError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

class BracketError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

class DegenerateFrameError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

class SampleStarvationError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

class RankDeficiencyError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

class OverflowError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

} // namespace weyllab
