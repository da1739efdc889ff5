#pragma once

#include <stdexcept>
#include <string>

namespace camix {

// Bad or inconsistent input data (exit code 3 at the CLI).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failure such as NaN loss (exit code 4 at the CLI).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace camix
