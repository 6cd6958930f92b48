#include "illiquid/hop.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace illiquid {

namespace {

constexpr int kScanCells = 64;

bool better(double candidate, double incumbent) {
    return candidate > incumbent + 1e-12 * std::max(1.0, std::abs(incumbent));
}

}  // namespace

HPoint h_apply(const LayerView& vhat0, double r, Interpolation mode) {
    if (r <= 0.0) return {interp2(vhat0, 0.0, 0.0), 0.0};
    auto f = [&](double a) { return interp2(vhat0, r - a, a, mode); };

    int best = 0;
    double best_v = f(0.0);
    for (int k = 1; k <= kScanCells; ++k) {
        const double v = f(r * k / kScanCells);
        if (better(v, best_v)) {
            best = k;
            best_v = v;
        }
    }
    double best_a = r * best / kScanCells;

    // golden-section maximisation on the two cells around the scan optimum
    double lo = r * std::max(best - 1, 0) / kScanCells;
    double hi = r * std::min(best + 1, kScanCells) / kScanCells;
    constexpr double inv_phi = 0.6180339887498949;
    double a1 = hi - inv_phi * (hi - lo);
    double a2 = lo + inv_phi * (hi - lo);
    double f1 = f(a1);
    double f2 = f(a2);
    while (hi - lo > 1e-10 * r) {
        if (f1 >= f2) {
            hi = a2;
            a2 = a1;
            f2 = f1;
            a1 = hi - inv_phi * (hi - lo);
            f1 = f(a1);
        } else {
            lo = a1;
            a1 = a2;
            f1 = f2;
            a2 = lo + inv_phi * (hi - lo);
            f2 = f(a2);
        }
    }
    const double a_gs = 0.5 * (lo + hi);
    const double v_gs = f(a_gs);
    if (better(v_gs, best_v)) {
        best_v = v_gs;
        best_a = a_gs;
    }
    return {best_v, best_a};
}

double AllocationProfile::a_at(double x) const {
    if (r.empty() || x <= 0.0) return 0.0;
    if (x >= r.back()) return r.back() > 0.0 ? a_star.back() * x / r.back() : 0.0;
    const auto it = std::upper_bound(r.begin(), r.end(), x);
    const std::size_t i = std::size_t(it - r.begin()) - 1;
    const double u = (x - r[i]) / (r[i + 1] - r[i]);
    return (1.0 - u) * a_star[i] + u * a_star[i + 1];
}

HFieldResult h_field(const LayerView& vhat0, double r_max, int n_r, double envelope_exponent,
                     Interpolation mode) {
    HFieldResult out{RadialField(r_max, n_r, envelope_exponent), {}};
    out.alloc.r.resize(std::size_t(n_r) + 1);
    out.alloc.a_star.resize(std::size_t(n_r) + 1);
    for (int i = 0; i <= n_r; ++i) {
        const double r = out.value.r(i);
        const auto h = h_apply(vhat0, r, mode);
        out.value[i] = h.value;
        out.alloc.r[i] = r;
        out.alloc.a_star[i] = h.a_star;
    }
    return out;
}

void write_csv(std::ostream& os, const AllocationProfile& alloc) {
    os << "r,a_star,a_star_over_r\n" << std::setprecision(12);
    for (std::size_t i = 0; i < alloc.r.size(); ++i)
        os << alloc.r[i] << ',' << alloc.a_star[i] << ',' << alloc.fraction(i) << '\n';
}

}  // namespace illiquid
