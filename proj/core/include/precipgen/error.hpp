#pragma once

#include <stdexcept>
#include <string>

namespace precipgen {

/// Invalid parameters or configuration supplied by the caller.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed, inconsistent or degenerate input data (files, fitted bundles).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace precipgen
