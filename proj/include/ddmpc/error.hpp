#pragma once

#include <stdexcept>
#include <string>

namespace ddmpc {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inconsistent matrix/vector sizes or out-of-range indices.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid user configuration (plant, horizon, bounds, setpoint, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A data-driven estimator could not produce a value (e.g. insufficient excitation).
class EstimationError : public Error {
public:
    using Error::Error;
};

/// An optimization problem that had to be solved did not reach optimality.
class SolverError : public Error {
public:
    using Error::Error;
};

} // namespace ddmpc
