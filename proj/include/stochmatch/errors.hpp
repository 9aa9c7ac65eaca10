#pragma once

#include <stdexcept>
#include <string>

namespace stochmatch {

// Base for every error raised by the library. The CLI maps the subclasses
// onto exit codes: GuardExceeded -> 3, input errors -> 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class ParseError : public InputError {
public:
    ParseError(const std::string& context, const std::string& what)
        : InputError(context.empty() ? what : context + ": " + what), context_(context) {}

    const std::string& context() const noexcept { return context_; }

private:
    std::string context_;
};

class InvalidParams : public InputError {
public:
    using InputError::InputError;
};

class InvalidInstance : public InputError {
public:
    using InputError::InputError;
};

class UsageError : public InputError {
public:
    using InputError::InputError;
};

class DomainError : public InputError {
public:
    using InputError::InputError;
};

class UnsupportedFamily : public InputError {
public:
    using InputError::InputError;
};

/// The operation requires unit capacities; call expand_capacities first.
class ExpandFirst : public InputError {
public:
    using InputError::InputError;
};

class TraceMismatch : public InputError {
public:
    using InputError::InputError;
};

class InfeasibleSolution : public InputError {
public:
    using InputError::InputError;
};

/// An enumeration or state-space guard was exceeded.
class GuardExceeded : public Error {
public:
    using Error::Error;
};

class TooLarge : public GuardExceeded {
public:
    using GuardExceeded::GuardExceeded;
};

class CapacityExplosion : public GuardExceeded {
public:
    using GuardExceeded::GuardExceeded;
};

class SolverStalled : public Error {
public:
    using Error::Error;
};

class NumericalFailure : public Error {
public:
    using Error::Error;
};

}  // namespace stochmatch
