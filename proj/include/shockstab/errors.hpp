#pragma once
#include <stdexcept>
#include <string>

namespace shockstab {

// parse/validation problems in user-supplied configuration (CLI exit code 2)
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// solver breakdowns: step-size collapse, Newton divergence, chart blowup,
// non-finite state (CLI exit code 3)
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace shockstab
