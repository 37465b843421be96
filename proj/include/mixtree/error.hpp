#pragma once

#include <stdexcept>
#include <string>

namespace mixtree {

// Input data or column-role problems (unknown columns, non-numeric cells, ...).
class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration values.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Region indicator has a single class where both are required.
class PositivityError : public std::runtime_error {
public:
    explicit PositivityError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failures (degenerate outcome, solver breakdown, ...).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mixtree
