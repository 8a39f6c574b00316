#pragma once

#include <stdexcept>
#include <string>

namespace koopctl {

// Base class for everything thrown by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad configuration or argument values detected before any numerics run.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Numeric failures: singular systems, lost rank, iteration limits and the like.
class NumericError : public Error {
public:
    using Error::Error;
};

class DimensionError : public NumericError {
public:
    using NumericError::NumericError;
};

class SingularMatrixError : public NumericError {
public:
    SingularMatrixError(const std::string& what, int pivot_index)
        : NumericError(what), pivot_index(pivot_index) {}
    int pivot_index;
};

class RankDeficiencyError : public NumericError {
public:
    using NumericError::NumericError;
};

class ConvergenceError : public NumericError {
public:
    using NumericError::NumericError;
};

class ConjugacyError : public NumericError {
public:
    using NumericError::NumericError;
};

class UncontrollabilityError : public NumericError {
public:
    using NumericError::NumericError;
};

class IdentificationError : public NumericError {
public:
    using NumericError::NumericError;
};

class TrainingError : public NumericError {
public:
    using NumericError::NumericError;
};

class InputError : public NumericError {
public:
    using NumericError::NumericError;
};

// API misuse (e.g. backward() on a non-scalar node).
class UsageError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    IoError(const std::string& what, const std::string& path)
        : Error(what + ": " + path), path(path) {}
    std::string path;
};

} // namespace koopctl
