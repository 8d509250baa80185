#pragma once

#include <stdexcept>
#include <string>

namespace diffuse {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid or inconsistent input data (non-finite entries, shape mismatches,
// malformed files, missing series).
class DataError : public Error {
public:
    using Error::Error;
};

// Invalid run configuration (bad hyperparameters, empty grids, bad paths).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Numerical failure (rank deficiency, non-convergence, retry budget
// exhausted).
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace diffuse
