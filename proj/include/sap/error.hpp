#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sap {

// Tensor or layout shapes do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A precondition of an operation was violated by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Optimization produced a non-finite value.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::size_t index)
      : std::runtime_error(what), index_(index) {}
  // Parameter index or iteration index, depending on the raising site.
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class UnsupportedEnvError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sap
