#pragma once

#include <stdexcept>
#include <string>

namespace gates {

/// Invalid configuration: unknown key, bad type, violated constraint. Exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or missing data: dataset, checkpoint, report files. Exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss or gradient; the step was aborted. Exit code 4.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gates
