#pragma once

#include <stdexcept>
#include <string>

namespace twincal {

/// Base for every error the library raises. `exit_code()` is what the CLI
/// returns when the error escapes a run.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Scenario or config-file problem. The message carries the element path.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// A first-order correction was asked to work outside rate*time < 1.
class OutOfRegime : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class DegenerateFit : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

}  // namespace twincal
