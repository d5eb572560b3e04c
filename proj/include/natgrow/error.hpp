#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace natgrow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed expression text. `position()` is the 0-based column of the offending token.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t position)
        : Error(msg + " at position " + std::to_string(position)), position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// A function produced a non-finite value at `at()`.
class EvaluationError : public Error {
public:
    EvaluationError(const std::string& msg, double at) : Error(msg), at_(at) {}
    double at() const noexcept { return at_; }

private:
    double at_;
};

class QuadratureError : public Error {
public:
    using Error::Error;
};

/// An exponential weight left the double range; `at()` is the first abscissa where it happened.
class OverflowError : public Error {
public:
    OverflowError(const std::string& msg, double at) : Error(msg), at_(at) {}
    double at() const noexcept { return at_; }

private:
    double at_;
};

/// Argument outside the documented range of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Root or bracket search ran out of budget.
class BracketError : public Error {
public:
    using Error::Error;
};

} // namespace natgrow
