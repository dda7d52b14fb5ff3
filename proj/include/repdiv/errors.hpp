#pragma once

#include <stdexcept>
#include <string>

namespace repdiv {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct EmptyInputError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

// Thrown when an iterative solver exhausts its budget; carries the last residual.
struct ConvergenceError : Error {
    double last_residual;
    ConvergenceError(const std::string& what, double residual)
        : Error(what), last_residual(residual) {}
};

struct DegenerateDesignError : Error {
    using Error::Error;
};

struct SingularSystemError : Error {
    using Error::Error;
};

struct CosineUndefinedError : Error {
    using Error::Error;
};

struct MissingClError : Error {
    using Error::Error;
};

struct PartitionError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace repdiv
