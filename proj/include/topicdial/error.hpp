#pragma once

#include <stdexcept>
#include <string>

namespace topicdial {

// Error families map onto CLI exit codes: config/usage -> 2, data -> 3,
// numerical failure -> 4.

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// A violated API precondition, i.e. a caller bug rather than bad user input.
struct ContractError : std::logic_error {
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace topicdial
