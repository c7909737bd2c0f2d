#pragma once

#include <stdexcept>
#include <string>

namespace ttt4rec {

// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor shapes do not conform to an operation's rule.
struct ShapeError : Error {
    using Error::Error;
};

// A value that must be finite is NaN or infinite.
struct NumericError : Error {
    using Error::Error;
};

// Malformed input data (interaction logs, caches, checkpoints).
struct DataError : Error {
    using Error::Error;
};

// Invalid or inconsistent configuration.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace ttt4rec
