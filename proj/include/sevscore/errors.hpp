#pragma once

#include <stdexcept>
#include <string>

namespace sevscore {

// Exit-code mapping used by the CLI: ConfigError -> 1, DataError -> 2,
// NumericError -> 3.

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sevscore
