#pragma once

#include <stdexcept>
#include <string>

namespace burnsem {

// Base for every error raised by the engine. The CLI maps each subclass to a
// distinct exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input text (JSON, CSV).
class ParseError : public Error {
public:
    using Error::Error;
};

// Well-formed input that breaks a model or data invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Numerical failure: non-positive-definite matrices, singular systems,
// divergence.
class NumericalError : public Error {
public:
    using Error::Error;
};

class NotPositiveDefinite : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace burnsem
