#pragma once

#include <stdexcept>
#include <string>

namespace natbound {

/// Base of every error raised by the library. The CLI maps the concrete
/// subclasses onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text: problem files, drift expressions, CLI flags.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t position = npos)
        : Error(what), position_(position) {}

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// Evaluation outside the set where a quantity is defined (t <= s, a point on
/// a node, a singular drift inside an integration range, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Overflow or underflow that makes a result meaningless.
class RangeError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed to produce a trustworthy result.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A boundary-integrability sequence neither converged nor diverged.
class InconclusiveError : public Error {
public:
    using Error::Error;
};

/// Violated type invariant at construction time.
class InvariantError : public Error {
public:
    using Error::Error;
};

}  // namespace natbound
