#pragma once

#include <stdexcept>
#include <string>

namespace qdtwin {

// Base of all library errors. The CLI maps the subclasses onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid parameters or configuration; the message names the offending field.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// Malformed, unsorted, empty or mismatched input data.
class DataError : public Error {
public:
    using Error::Error;
};

// Picosecond clock or record-field overflow.
class RangeError : public DataError {
public:
    using DataError::DataError;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

// g2 / visibility normalisation found no counts in the side peaks.
class EmptySidePeaksError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class FitError : public NumericalError {
public:
    FitError(const std::string& what, std::string diagnostics)
        : NumericalError(what), diagnostics_(std::move(diagnostics)) {}

    const std::string& diagnostics() const noexcept { return diagnostics_; }

private:
    std::string diagnostics_;
};

}  // namespace qdtwin
