#pragma once

#include <stdexcept>
#include <string>

namespace bpl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid geometry, malformed config file, bad element chain.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed, missing or empty measurement data.
class DataError : public Error {
public:
    using Error::Error;
};

/// Fit or bootstrap failures.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace bpl
