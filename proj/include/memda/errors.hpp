#pragma once

#include <stdexcept>
#include <string>

namespace memda {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration (bad ranges, unknown names, unusable presets).
/// Maps to CLI exit code 2.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// Malformed or inconsistent input data (CSV parse failures, long gaps).
struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(msg) {}
};

/// A requested window reaches outside the available series.
struct WindowError : Error {
    explicit WindowError(const std::string& msg) : Error(msg) {}
};

/// Tensor shape mismatch between operands.
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

/// Filesystem / serialization failure.
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace memda
