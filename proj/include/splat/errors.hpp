#pragma once

#include <stdexcept>
#include <string>

namespace splat {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A structural precondition was violated (shape mismatch, invalid index, ...).
struct ValidationError : Error {
    using Error::Error;
};

/// A scalar argument was outside the mathematical domain of an operation.
struct DomainError : Error {
    using Error::Error;
};

/// An input was formally valid but degenerate (e.g. too few masked pixels).
struct DegenerateInputError : Error {
    using Error::Error;
};

/// A file could not be read or had unexpected contents.
struct LoadError : Error {
    using Error::Error;
};

/// A configuration file or key could not be parsed.
struct ParseError : Error {
    using Error::Error;
};

/// Training had to stop (non-finite loss or gradient).
struct TrainingError : Error {
    using Error::Error;
};

} // namespace splat
