#pragma once

#include <stdexcept>
#include <string>

namespace cliffscale {

// Error categories map onto the CLI exit codes (2, 3, 4).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cliffscale
