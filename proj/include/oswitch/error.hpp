#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oswitch {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed expression or problem text. Positions are 1-based.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t offset, std::size_t line,
               std::size_t column)
        : Error(message + " at line " + std::to_string(line) + ", column " +
                std::to_string(column)),
          offset_(offset), line_(line), column_(column), bare_(message) {}

    std::size_t offset() const noexcept { return offset_; }
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }
    const std::string& bare_message() const noexcept { return bare_; }

private:
    std::size_t offset_;
    std::size_t line_;
    std::size_t column_;
    std::string bare_;
};

/// Evaluation left the finite reals (log of non-positive, division by zero, ...).
class DomainError : public Error {
public:
    DomainError(const std::string& message, std::string subexpression)
        : Error(message + " in '" + subexpression + "'"),
          subexpression_(std::move(subexpression)) {}

    const std::string& subexpression() const noexcept { return subexpression_; }

private:
    std::string subexpression_;
};

/// Invalid configuration, dimensions or arguments.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A file could not be read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Linear-solve failure, non-finite field, violated discretization precondition.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Obstacle projection failed to stabilize: a zero- or negative-cost loop was hit at run time.
class FreeLoopError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// A combinatorial or size cap was exceeded.
class CapExceeded : public Error {
public:
    using Error::Error;
};

/// Binary artifact failed integrity checks.
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace oswitch
