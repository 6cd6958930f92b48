#include "illiquid/hop.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace illiquid;
using doctest::Approx;

namespace {

template <class F>
ValueField layer_of(double x_max, double y_max, int n, F&& f, double exponent = 0.5) {
    ValueField v(GridSpec::with_radial_cover(1.0, 2, x_max, y_max, n, n), exponent);
    v.fill([&](double, double x, double y) { return f(x, y); });
    return v;
}

/// Largest value of interp2 over a 10^4-point scan of the segment.
HPoint scan(const LayerView& v, double r) {
    HPoint best{-1e300, 0.0};
    for (int k = 0; k <= 10'000; ++k) {
        const double a = r * k / 10'000.0;
        const double val = interp2(v, r - a, a);
        if (val > best.value) best = {val, a};
    }
    return best;
}

/// scan, then a second 10^4-point pass over the two neighbouring steps.
HPoint fine_scan(const LayerView& v, double r) {
    HPoint best = scan(v, r);
    const double step = r / 10'000.0;
    const double lo = std::max(best.a_star - step, 0.0);
    const double hi = std::min(best.a_star + step, r);
    for (int k = 0; k <= 10'000; ++k) {
        const double a = lo + (hi - lo) * k / 10'000.0;
        const double val = interp2(v, r - a, a);
        if (val > best.value) best = {val, a};
    }
    return best;
}

}  // namespace

TEST_CASE("level and decreasing segments pick a = 0") {
    const auto level = layer_of(2.0, 2.0, 20, [](double x, double y) { return std::sqrt(x + y); });
    const auto h = h_apply(level.view(0), 1.0);
    CHECK(h.value == Approx(1.0).epsilon(1e-12));
    CHECK(h.a_star == 0.0);
    const auto liquid = layer_of(2.0, 2.0, 20, [](double x, double) { return std::sqrt(x); });
    const auto g = h_apply(liquid.view(0), 1.0);
    CHECK(g.value == Approx(1.0).epsilon(1e-12));
    CHECK(g.a_star == 0.0);
}

TEST_CASE("interior maximum of a concave quadratic") {
    const auto q = layer_of(4.0, 4.0, 400, [](double x, double y) {
        return -(x - 1.0) * (x - 1.0) - (y - 2.0) * (y - 2.0) + 10.0;
    });
    const auto h = h_apply(q.view(0), 3.0);
    CHECK(h.value == Approx(10.0).epsilon(1e-4));
    CHECK(h.a_star == Approx(2.0).epsilon(1e-3));
    const auto s = scan(q.view(0), 3.0);
    CHECK(h.value >= s.value - 1e-12);
    CHECK(std::abs(h.a_star - s.a_star) <= 1e-6 * 3.0 + 3.0 / 10'000.0);
}

TEST_CASE("golden section matches a fine scan on concave slices") {
    std::mt19937_64 gen(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const double cx = 3.0 * u(gen), cy = 3.0 * u(gen), w = 0.2 + u(gen);
        const auto f = layer_of(4.0, 4.0, 40, [&](double x, double y) {
            return -w * (x - cx) * (x - cx) - (y - cy) * (y - cy) + std::sqrt(x + y);
        });
        const double r = 0.5 + 3.0 * u(gen);
        const auto h = h_apply(f.view(0), r);
        const auto s = fine_scan(f.view(0), r);
        CHECK(h.value >= s.value - 1e-9);
        CHECK(h.value == Approx(s.value).epsilon(1e-6));
    }
}

TEST_CASE("H dominates the endpoints, is monotone and subadditive") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const double a1 = u(gen), a2 = u(gen), c1 = 2.0 * u(gen), c2 = 2.0 * u(gen);
        auto f1 = [&](double x, double y) { return std::sqrt(x + a1 * y) - 0.1 * (y - c1) * (y - c1); };
        auto f2 = [&](double x, double y) { return std::sqrt(a2 * x + y) - 0.1 * (x - c2) * (x - c2); };
        const auto v1 = layer_of(3.0, 3.0, 30, f1);
        const auto v2 = layer_of(3.0, 3.0, 30, f2);
        const auto sum = layer_of(3.0, 3.0, 30, [&](double x, double y) { return f1(x, y) + f2(x, y); });
        const auto up = layer_of(3.0, 3.0, 30, [&](double x, double y) { return f1(x, y) + 0.1 + 0.05 * x; });
        for (double r : {0.3, 1.0, 2.2}) {
            const double h1 = h_apply(v1.view(0), r).value;
            CHECK(h1 >= interp2(v1.view(0), r, 0.0));
            CHECK(h1 >= interp2(v1.view(0), 0.0, r));
            CHECK(h_apply(up.view(0), r).value >= h1);
            CHECK(h_apply(sum.view(0), r).value <= h1 + h_apply(v2.view(0), r).value + 1e-9);
        }
    }
}

TEST_CASE("h_field profiles") {
    const auto zero = layer_of(2.0, 2.0, 10, [](double, double) { return 0.0; });
    const auto hz = h_field(zero.view(0), 4.0, 20, 0.5);
    for (double v : hz.value.values()) CHECK(v == 0.0);

    // degree-1/2 homogeneous with an interior optimum at a / r = 1/3
    auto f = [](double x, double y) { return std::sqrt(x + y) * (1.0 - 0.5 * std::pow(y / (x + y + 1e-300) - 1.0 / 3.0, 2.0)); };
    const auto v = layer_of(2.0, 2.0, 60, f);
    const auto hf = h_field(v.view(0), 4.0, 40, 0.5, Interpolation::homogeneous);
    const double frac1 = hf.alloc.a_star[10] / hf.alloc.r[10];
    const double frac2 = hf.alloc.a_star[30] / hf.alloc.r[30];
    CHECK(frac1 == Approx(1.0 / 3.0).epsilon(0.02));
    CHECK(frac2 == Approx(frac1).epsilon(0.02));
    CHECK(hf.value[0] == v.at(0, 0, 0));
    for (std::size_t i = 0; i < hf.alloc.r.size(); ++i) {
        CHECK(hf.alloc.fraction(i) >= 0.0);
        CHECK(hf.alloc.fraction(i) <= 1.0);
    }
    CHECK(hf.alloc.a_at(0.0) == 0.0);
    CHECK(hf.alloc.a_at(hf.alloc.r[7]) == Approx(hf.alloc.a_star[7]));

    std::stringstream ss;
    write_csv(ss, hf.alloc);
    std::string header;
    std::getline(ss, header);
    CHECK(header == "r,a_star,a_star_over_r");
}
