// Error types shared across the library.
#pragma once

#include <stdexcept>
#include <string>

namespace ckf {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A matrix or vector does not have the shape an operation requires.
struct DimensionError : Error {
    using Error::Error;
};

/// A matrix that must be positive definite is singular or indefinite.
struct SingularMatrixError : Error {
    using Error::Error;
};

/// A run configuration is malformed or references unknown entities.
struct ConfigError : Error {
    using Error::Error;
};

} // namespace ckf
