#pragma once

#include <stdexcept>
#include <string>

namespace finrank {

// All toolkit failures derive from Error so callers (the CLI in particular)
// can map them to exit codes without knowing every subtype.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented invariant (Hermiticity, positivity, shapes).
class ValidationError : public Error {
public:
    using Error::Error;
};

class NotPsdError : public ValidationError {
public:
    NotPsdError(const std::string& what, double eigenvalue)
        : ValidationError(what), eigenvalue_(eigenvalue) {}
    double eigenvalue() const noexcept { return eigenvalue_; }

private:
    double eigenvalue_;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

/// Evaluation point too close to the real axis for direct kernel sums.
class PrecisionError : public Error {
public:
    using Error::Error;
};

class IllConditionedError : public Error {
public:
    IllConditionedError(const std::string& what, double condition)
        : Error(what), condition_(condition) {}
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double estimate)
        : Error(what), estimate_(estimate) {}
    double estimate() const noexcept { return estimate_; }

private:
    double estimate_;
};

class EvaluationError : public Error {
public:
    EvaluationError(const std::string& what, double location)
        : Error(what), location_(location) {}
    double location() const noexcept { return location_; }

private:
    double location_;
};

class UnsupportedInputError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace finrank
