#pragma once

#include <stdexcept>
#include <string>

namespace menulab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the domain of a function (e.g. a point outside the support).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Quadrature produced a non-finite sample or failed to converge.
class NumericsError : public Error {
public:
    using Error::Error;
};

/// A mechanism violates IC / IR / consistency constraints.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// The LP solver did not reach an optimal basis.
class SolverError : public Error {
public:
    using Error::Error;
};

/// Malformed scenario configuration or CSV input. Carries the JSON pointer of
/// the offending value and, once resolved against the source text, a 1-based
/// line and column (0 when unknown).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what, std::string pointer = {}, int line = 0, int column = 0)
        : Error(what), pointer_(std::move(pointer)), line_(line), column_(column) {}

    [[nodiscard]] const std::string& pointer() const { return pointer_; }
    [[nodiscard]] int line() const { return line_; }
    [[nodiscard]] int column() const { return column_; }

private:
    std::string pointer_;
    int line_;
    int column_;
};

}  // namespace menulab
