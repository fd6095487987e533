#pragma once

#include <stdexcept>
#include <string>

namespace inlprobe {

/// Bad input to a library call (violated precondition).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure: non-convergence, step-size underflow, non-finite values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Step-size underflow during adaptive integration; carries the failure time.
class StepUnderflow : public NumericalError {
 public:
  StepUnderflow(double time, double step)
      : NumericalError("step size underflow at t = " + std::to_string(time) +
                       " (h = " + std::to_string(step) + ")"),
        time_(time) {}

  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// Malformed or inconsistent scenario configuration; names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace inlprobe
