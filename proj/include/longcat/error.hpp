#pragma once

#include <stdexcept>
#include <string>

namespace longcat {

/// Malformed input: datasets, priors, configs, file contents.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A factorization or sampler update failed. `where()` names the step.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::string where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(std::move(where)) {}

  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

}  // namespace longcat
