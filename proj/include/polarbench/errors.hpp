#pragma once

#include <stdexcept>
#include <string>

namespace polarbench {

// Root of the library's exception hierarchy. The CLI maps each leaf to an
// exit code (see cli.hpp).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Non-finite intermediate, bad denominator, or an iteration that did not
// converge.
class NumericError : public Error {
public:
    using Error::Error;
};

// Input for which the operation is undefined (zero matrix, zero spectrum).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

// Boundary analysis is ill-defined for the given schedule.
class AnalysisError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Training produced a non-finite loss or gradient.
class DivergedError : public Error {
public:
    DivergedError(const std::string& what, long step) : Error(what), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

}  // namespace polarbench
