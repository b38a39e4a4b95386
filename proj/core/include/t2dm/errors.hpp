#pragma once

#include <stdexcept>
#include <string>

namespace t2dm {

// Bad flags, missing files, invalid parameter combinations. CLI exit code 1/2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Schema violations, broken references, corrupt blobs. CLI exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss or gradients during a fit. CLI exit code 3.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace t2dm
