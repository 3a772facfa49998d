#pragma once

#include <stdexcept>
#include <string>

namespace mrc {

// Exit-code mapping used by the CLI: config=2, data=3, numeric=4.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// I/O failures and structural problems in input data (missing files,
// dimension mismatches, empty corner sets).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures: training produced no usable model, factorization
// failed, prediction impossible.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace mrc
