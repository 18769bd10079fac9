#pragma once

#include <stdexcept>
#include <string>

namespace biharm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Assumption (A) surrogate failed: the clamped operator is numerically singular.
class SingularOperatorError : public Error {
 public:
  SingularOperatorError(const std::string& what, double smallest_singular_value)
      : Error(what), sigma_min(smallest_singular_value) {}
  double sigma_min;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage_name(stage) {}
  std::string stage_name;
};

}  // namespace biharm
