#pragma once

#include <stdexcept>
#include <string>

namespace slpm {

// invalid run/experiment configuration (CLI exit code 2)
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// numerical failure at runtime: sign violation, overflow, failed solve
// (CLI exit code 3)
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace slpm
