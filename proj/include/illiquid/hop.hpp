#pragma once

#include "illiquid/lattice.hpp"

#include <iosfwd>
#include <vector>

namespace illiquid {

struct HPoint {
    double value;
    double a_star;  // wealth placed in the illiquid asset
};

/// [H v](r) = max over a in [0, r] of v(0, r - a, a), evaluated on the
/// time-0 layer. Coarse scan over 64 cells, then golden-section refinement
/// in the bracket around the best scan point; ties go to the smallest a.
HPoint h_apply(const LayerView& vhat0, double r, Interpolation mode = Interpolation::linear);

/// Optimal illiquid allocation a*(r) on the radial grid.
struct AllocationProfile {
    std::vector<double> r;
    std::vector<double> a_star;

    double fraction(std::size_t i) const { return r[i] > 0.0 ? a_star[i] / r[i] : 0.0; }
    /// Linear interpolation of a*(r); scales linearly beyond the last node.
    double a_at(double r) const;
};

struct HFieldResult {
    RadialField value;
    AllocationProfile alloc;
};

/// Applies h_apply at every node of the radial grid (r_max, n_r).
HFieldResult h_field(const LayerView& vhat0, double r_max, int n_r, double envelope_exponent,
                     Interpolation mode = Interpolation::linear);

/// CSV with columns r,a_star,a_star_over_r.
void write_csv(std::ostream& os, const AllocationProfile& alloc);

}  // namespace illiquid
