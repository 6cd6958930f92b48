#pragma once

#include <utility>

namespace illiquid {

/// Market and preference constants.
///
/// Rates are per unit time, volatilities per square-root time. The liquid
/// asset L and the illiquid asset I are geometric Brownian motions with
/// correlation rho; I can only be traded at the jump times of a Poisson
/// process with intensity lambda.
struct MarketParams {
    double b_L = 0.15;
    double sigma_L = 1.0;
    double b_I = 0.2;
    double sigma_I = 1.0;
    double rho = 0.0;
    double lambda = 1.0;
    double beta = 0.2;
    double p = 0.5;
    double u_scale = 1.0;

    /// Throws InvalidParameter when a field is out of range.
    void validate() const;
};

/// Power utility U(c) = u_scale * c^p.
struct UtilityPower {
    double p = 0.5;
    double u_scale = 1.0;

    explicit UtilityPower(const MarketParams& m) : p(m.p), u_scale(m.u_scale) {}
    UtilityPower(double exponent, double scale) : p(exponent), u_scale(scale) {}

    double operator()(double c) const;

    struct Conjugate {
        double value;   // sup_{c >= 0} { U(c) - c q }
        double c_star;  // the maximising consumption
    };

    /// Convex conjugate; throws UnboundedConjugate for q <= 0.
    Conjugate legendre(double q) const;
};

struct DerivedConstants {
    double k_tilde_p;  // growth constant of the illiquid direction
    double k_p;        // constrained Merton growth constant
    double margin;     // beta - k_p
    double delta;      // lambda / (lambda + beta - k_p)
    double drift_J;    // b_I - rho b_L sigma_I / sigma_L
    double vol_J;      // sigma_I sqrt(1 - rho^2)
    double drift_Y;    // rho b_L sigma_I / sigma_L
    double vol_Y;      // rho sigma_I
};

/// sup over u in [0,1] of p a u - (p(1-p)/2) s u^2 with a = b_I - rho b_L
/// sigma_I / sigma_L and s = sigma_I^2 (1 - rho^2).
double compute_k_tilde(const MarketParams& m);

/// Growth constant of the liquid-only Merton problem, p b_L^2 / (2(1-p) sigma_L^2).
double liquid_growth(const MarketParams& m);

/// p/(2(1-p)) b' Sigma^{-1} b for the two-asset market without the [0,1]
/// constraint on the illiquid fraction.
double unconstrained_growth(const MarketParams& m);

/// Throws WellPosednessViolated when beta <= k_p.
DerivedConstants derive_constants(const MarketParams& m);

/// Coefficient M of the Merton value M r^p for U(c) = u_scale c^p and a
/// given discount rate; growth is k_p (constrained) or the unconstrained
/// two-asset constant.
double merton_value(const MarketParams& m, bool constrained, double discount);
inline double merton_value(const MarketParams& m, bool constrained = true) {
    return merton_value(m, constrained, m.beta);
}

/// Merton coefficient for an explicit growth constant k.
double merton_coefficient(double p, double u_scale, double discount, double growth);

struct MertonFractions {
    double u_L;
    double u_I;
};

/// Maximisers of the k_p supremum (fractions of wealth).
MertonFractions merton_fractions(const MarketParams& m);

}  // namespace illiquid
