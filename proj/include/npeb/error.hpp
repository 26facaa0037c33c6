#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace npeb {

// Bad user input: malformed files, invalid specs, out-of-range indices.
// The CLI maps these to exit status 1.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Failures of the numerics on otherwise valid input. CLI exit status 2.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InfeasibleError : public NumericalError {
public:
    using NumericalError::NumericalError;
    InfeasibleError(const std::string& what, std::size_t constraint)
        : NumericalError(what), constraint_(constraint) {}

    // Index of the most violated extra equality, when one is to blame.
    std::optional<std::size_t> constraint_index() const noexcept { return constraint_; }

private:
    std::optional<std::size_t> constraint_;
};

// A calibration equality that cannot be met together with the simplex.
class CalibrationInfeasible : public InfeasibleError {
public:
    CalibrationInfeasible(std::size_t index, const std::string& name, const std::string& detail)
        : InfeasibleError("calibration constraint " + std::to_string(index) +
                              (name.empty() ? "" : " '" + name + "'") + " is infeasible: " +
                              detail,
                          index) {}
};

class SingularCovariance : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// Conditional expectation requested where the conditioning event has no mass.
class UndefinedConditional : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace npeb
