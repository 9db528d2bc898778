#pragma once

#include <stdexcept>
#include <string>

namespace drddp {

// Malformed or inconsistent user input (configs, CSV files, parameters).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension mismatches and other caller errors.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite derivative output from a model.
class DerivativeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by the backward pass when curvature conditions fail at step `t`.
class BackwardPassError : public std::runtime_error {
 public:
  BackwardPassError(const std::string& what, int t) : std::runtime_error(what), t_(t) {}
  int timestep() const { return t_; }

 private:
  int t_;
};

// Adversary curvature Q_ww is not negative definite and the caller disallowed
// regularizing it (minimax baseline).
class CurvatureError : public BackwardPassError {
 public:
  using BackwardPassError::BackwardPassError;
};

// Solver gave up: regularization hit its cap.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, int iteration, int t)
      : std::runtime_error(what), iteration_(iteration), t_(t) {}
  int iteration() const { return iteration_; }
  int timestep() const { return t_; }

 private:
  int iteration_;
  int t_;
};

}  // namespace drddp
