#pragma once

#include <stdexcept>
#include <string>

namespace nnloc {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter is outside its admissible range.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// A model generator whose radial integral diverges for the requested dimension.
class NonNormalizable : public Error {
public:
    using Error::Error;
};

/// An integral that should be finite for the estimator or risk to exist diverges.
class Divergence : public Error {
public:
    using Error::Error;
};

/// The model density fails the shape assumption the estimators rely on.
class AssumptionError : public Error {
public:
    using Error::Error;
};

/// A bracketing root search failed to find a sign change.
class NoRoot : public Error {
public:
    using Error::Error;
};

/// Derivative requested at a point where it is unbounded.
class Singularity : public Error {
public:
    using Error::Error;
};

/// A computed object violates an invariant that theory guarantees.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

/// An adaptive routine ran out of budget before reaching the requested tolerance.
/// Carries the best estimate available at that point.
class AccuracyNotReached : public Error {
public:
    AccuracyNotReached(const std::string& what, double best_estimate, double error_estimate)
        : Error(what), best_estimate_(best_estimate), error_estimate_(error_estimate) {}

    double best_estimate() const noexcept { return best_estimate_; }
    double error_estimate() const noexcept { return error_estimate_; }

private:
    double best_estimate_;
    double error_estimate_;
};

} // namespace nnloc
