#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace regretlab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An MDP (or a row of it) violates its construction invariants.
class ModelError : public Error {
public:
    using Error::Error;
};

/// Iterative solver ran out of iterations.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double final_span, std::size_t iterations)
        : Error(what + " (final span " + std::to_string(final_span) + " after " +
                std::to_string(iterations) + " iterations)"),
          final_span_(final_span), iterations_(iterations) {}

    double final_span() const noexcept { return final_span_; }
    std::size_t iterations() const noexcept { return iterations_; }

private:
    double final_span_;
    std::size_t iterations_;
};

/// Invalid configuration, ambient set or command-line input.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A caller broke a documented precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Post-hoc analysis could not be carried out on the given trace.
class AnalysisError : public Error {
public:
    using Error::Error;
};

/// Signals a bug: something that valid inputs can never produce.
class InternalError : public Error {
public:
    using Error::Error;
};

} // namespace regretlab
