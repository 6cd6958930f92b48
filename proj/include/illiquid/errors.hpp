#pragma once

#include <stdexcept>
#include <string>

namespace illiquid {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A market parameter is outside its admissible range.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// beta <= k, so the infinite-horizon value may be infinite.
class WellPosednessViolated : public Error {
public:
    WellPosednessViolated(double discount, double growth);

    double discount() const noexcept { return discount_; }
    double growth() const noexcept { return growth_; }

private:
    double discount_;
    double growth_;
};

/// The convex conjugate of the utility is +infinity at the requested point.
class UnboundedConjugate : public Error {
public:
    using Error::Error;
};

/// The closed-form Hamiltonian needs q1 > 0 and Q11 < 0.
class DegenerateJet : public Error {
public:
    using Error::Error;
};

/// The explicit scheme would need more sub-steps than allowed.
class CflUnsatisfiable : public Error {
public:
    CflUnsatisfiable(long required, long cap);

    long required() const noexcept { return required_; }

private:
    long required_;
};

class NonFiniteValue : public Error {
public:
    using Error::Error;
};

/// Config file problems: missing keys, unknown keys, malformed values.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A feedback policy needed clipping on too many simulation steps.
class InadmissiblePolicy : public Error {
public:
    InadmissiblePolicy(double clipped_fraction);

    double clipped_fraction() const noexcept { return fraction_; }

private:
    double fraction_;
};

/// The outer iteration hit its cap with the increment above tolerance.
class NoConvergence : public Error {
public:
    NoConvergence(int iterations, double last_increment);

    int iterations() const noexcept { return iterations_; }
    double last_increment() const noexcept { return last_increment_; }

private:
    int iterations_;
    double last_increment_;
};

class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace illiquid
