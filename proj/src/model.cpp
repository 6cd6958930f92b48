#include "illiquid/model.hpp"

#include "illiquid/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace illiquid {

WellPosednessViolated::WellPosednessViolated(double discount, double growth)
    : Error([&] {
          std::ostringstream os;
          os.precision(10);
          os << "well-posedness violated: discount " << discount
             << " must exceed growth constant " << growth;
          return os.str();
      }()),
      discount_(discount),
      growth_(growth) {}

CflUnsatisfiable::CflUnsatisfiable(long required, long cap)
    : Error("explicit scheme needs " + std::to_string(required) +
            " sub-steps per layer, cap is " + std::to_string(cap)),
      required_(required) {}

InadmissiblePolicy::InadmissiblePolicy(double clipped_fraction)
    : Error("policy clipped on " + std::to_string(100.0 * clipped_fraction) +
            "% of steps"),
      fraction_(clipped_fraction) {}

NoConvergence::NoConvergence(int iterations, double last_increment)
    : Error("no convergence after " + std::to_string(iterations) +
            " iterations, last relative increment " + std::to_string(last_increment)),
      iterations_(iterations),
      last_increment_(last_increment) {}

void MarketParams::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw InvalidParameter(what);
    };
    require(std::isfinite(b_L) && std::isfinite(b_I), "drifts must be finite");
    require(sigma_L > 0.0, "sigma_L must be > 0");
    require(sigma_I > 0.0, "sigma_I must be > 0");
    require(rho > -1.0 && rho < 1.0, "rho must lie in (-1, 1)");
    require(lambda > 0.0, "lambda must be > 0");
    require(beta > 0.0, "beta must be > 0");
    require(p > 0.0 && p < 1.0, "p must lie in (0, 1)");
    require(u_scale > 0.0, "u_scale must be > 0");
}

double UtilityPower::operator()(double c) const {
    if (c <= 0.0) return 0.0;
    return u_scale * std::pow(c, p);
}

UtilityPower::Conjugate UtilityPower::legendre(double q) const {
    if (!(q > 0.0)) throw UnboundedConjugate("legendre transform needs q > 0");
    const double c_star = std::pow(u_scale * p / q, 1.0 / (1.0 - p));
    const double value = (1.0 - p) * std::pow(u_scale, 1.0 / (1.0 - p)) *
                         std::pow(p / q, p / (1.0 - p));
    return {value, c_star};
}

namespace {

// max over u in [lo, hi] of a u - s u^2 / 2 for s >= 0
std::pair<double, double> clamped_quadratic_max(double a, double s, double lo, double hi) {
    auto f = [&](double u) { return a * u - 0.5 * s * u * u; };
    if (s > 0.0) {
        const double u = std::clamp(a / s, lo, hi);
        return {f(u), u};
    }
    return f(hi) > f(lo) ? std::pair{f(hi), hi} : std::pair{f(lo), lo};
}

double illiquid_excess_drift(const MarketParams& m) {
    return m.b_I - m.rho * m.b_L * m.sigma_I / m.sigma_L;
}

}  // namespace

double compute_k_tilde(const MarketParams& m) {
    m.validate();
    const double a = m.p * illiquid_excess_drift(m);
    const double s = m.p * (1.0 - m.p) * m.sigma_I * m.sigma_I * (1.0 - m.rho * m.rho);
    return clamped_quadratic_max(a, s, 0.0, 1.0).first;
}

double liquid_growth(const MarketParams& m) {
    return m.p / (2.0 * (1.0 - m.p)) * m.b_L * m.b_L / (m.sigma_L * m.sigma_L);
}

double unconstrained_growth(const MarketParams& m) {
    m.validate();
    const double vL = m.sigma_L * m.sigma_L;
    const double vI = m.sigma_I * m.sigma_I;
    const double cov = m.rho * m.sigma_L * m.sigma_I;
    const double det = vL * vI - cov * cov;
    const double quad = (vI * m.b_L * m.b_L - 2.0 * cov * m.b_L * m.b_I + vL * m.b_I * m.b_I) / det;
    return m.p / (2.0 * (1.0 - m.p)) * quad;
}

DerivedConstants derive_constants(const MarketParams& m) {
    m.validate();
    DerivedConstants d{};
    d.k_tilde_p = compute_k_tilde(m);
    d.k_p = liquid_growth(m) + d.k_tilde_p;
    d.margin = m.beta - d.k_p;
    if (!(d.margin > 0.0)) throw WellPosednessViolated(m.beta, d.k_p);
    d.delta = m.lambda / (m.lambda + d.margin);
    d.drift_Y = m.rho * m.b_L * m.sigma_I / m.sigma_L;
    d.vol_Y = m.rho * m.sigma_I;
    d.drift_J = m.b_I - d.drift_Y;
    d.vol_J = m.sigma_I * std::sqrt(1.0 - m.rho * m.rho);
    return d;
}

double merton_coefficient(double p, double u_scale, double discount, double growth) {
    if (!(discount > growth)) throw WellPosednessViolated(discount, growth);
    return u_scale * std::pow((1.0 - p) / (discount - growth), 1.0 - p);
}

double merton_value(const MarketParams& m, bool constrained, double discount) {
    m.validate();
    const double k = constrained ? liquid_growth(m) + compute_k_tilde(m) : unconstrained_growth(m);
    return merton_coefficient(m.p, m.u_scale, discount, k);
}

MertonFractions merton_fractions(const MarketParams& m) {
    m.validate();
    const double a = m.p * illiquid_excess_drift(m);
    const double s = m.p * (1.0 - m.p) * m.sigma_I * m.sigma_I * (1.0 - m.rho * m.rho);
    const double u_I = clamped_quadratic_max(a, s, 0.0, 1.0).second;
    const double u_L = (m.b_L - (1.0 - m.p) * m.rho * m.sigma_L * m.sigma_I * u_I) /
                       ((1.0 - m.p) * m.sigma_L * m.sigma_L);
    return {u_L, u_I};
}

}  // namespace illiquid
