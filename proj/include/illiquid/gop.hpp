#pragma once

#include "illiquid/lattice.hpp"
#include "illiquid/model.hpp"

#include <vector>

namespace illiquid {

/// Law of the unhedgeable illiquid factor: J_t = exp((drift - vol^2/2) t +
/// vol sqrt(t) xi), J_0 = 1.
struct JLaw {
    double drift = 0.0;
    double vol = 0.0;

    static JLaw from(const DerivedConstants& d) { return {d.drift_J, d.vol_J}; }

    double log_mean(double t) const { return (drift - 0.5 * vol * vol) * t; }
    double log_sd(double t) const;
};

/// Gauss-Hermite rule for expectations against the standard normal density.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    int order() const { return int(nodes.size()); }

    /// Nodes/weights of the n-point rule; weights sum to one.
    static QuadratureRule gauss_hermite(int n);

    /// E[f(xi)], xi ~ N(0, 1).
    template <class F>
    double expect(F&& f) const {
        double s = 0.0;
        for (std::size_t k = 0; k < nodes.size(); ++k) s += weights[k] * f(nodes[k]);
        return s;
    }
};

/// G[psi](t, x, y) = E[psi(x + y J_t)].
double g_point(const RadialField& psi, const JLaw& law, const QuadratureRule& rule, double t,
               double x, double y, Interpolation mode = Interpolation::linear);

/// Tabulates G[psi] on every lattice node of the grid.
ValueField g_field(const RadialField& psi, const JLaw& law, const QuadratureRule& rule,
                   const GridSpec& grid, Interpolation mode = Interpolation::linear);

}  // namespace illiquid
