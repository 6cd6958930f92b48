#include "illiquid/gop.hpp"

#include "illiquid/errors.hpp"

#include <cmath>
#include <numbers>

namespace illiquid {

double JLaw::log_sd(double t) const { return vol * std::sqrt(std::max(t, 0.0)); }

QuadratureRule QuadratureRule::gauss_hermite(int n) {
    if (n < 1) throw InvalidParameter("quadrature order must be >= 1");
    // Newton iteration on the orthonormal Hermite recurrence for the
    // physicists' weight exp(-x^2), then rescaled to the standard normal.
    std::vector<double> x(n), w(n);
    const int m = (n + 1) / 2;
    const double pim4 = std::pow(std::numbers::pi, -0.25);
    double z = 0.0;
    for (int i = 0; i < m; ++i) {
        if (i == 0)
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
        else if (i == 1)
            z -= 1.14 * std::pow(double(n), 0.426) / z;
        else if (i == 2)
            z = 1.86 * z - 0.86 * x[0];
        else if (i == 3)
            z = 1.91 * z - 0.91 * x[1];
        else
            z = 2.0 * z - x[i - 2];
        double pp = 0.0;
        for (int its = 0; its < 100; ++its) {
            double p1 = pim4;
            double p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(double(j) / (j + 1)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = std::numbers::sqrt2 * x[n - 1 - i];
        rule.weights[i] = w[n - 1 - i] * inv_sqrt_pi;
        total += rule.weights[i];
    }
    // remove the last ulps of drift so constants integrate exactly
    for (double& wi : rule.weights) wi /= total;
    return rule;
}

double g_point(const RadialField& psi, const JLaw& law, const QuadratureRule& rule, double t,
               double x, double y, Interpolation mode) {
    if (y == 0.0 || t == 0.0 || law.vol == 0.0) {
        const double j = t == 0.0 ? 1.0 : std::exp(law.drift * t);
        return interp1(psi, x + y * j, mode);
    }
    const double mu = law.log_mean(t);
    const double sd = law.log_sd(t);
    return rule.expect([&](double xi) { return interp1(psi, x + y * std::exp(mu + sd * xi), mode); });
}

ValueField g_field(const RadialField& psi, const JLaw& law, const QuadratureRule& rule,
                   const GridSpec& grid, Interpolation mode) {
    ValueField out(grid, psi.envelope_exponent());
    const int q = rule.order();
    std::vector<double> jumps(q);
    for (int k = 0; k <= grid.n_t; ++k) {
        const double t = grid.t(k);
        const bool degenerate = t == 0.0 || law.vol == 0.0;
        const double j0 = t == 0.0 ? 1.0 : std::exp(law.drift * t);
        for (int m = 0; m < q; ++m) jumps[m] = std::exp(law.log_mean(t) + law.log_sd(t) * rule.nodes[m]);
        auto layer = out.layer(k);
        for (int i = 0; i <= grid.n_x; ++i) {
            const double x = grid.x(i);
            for (int j = 0; j <= grid.n_y; ++j) {
                const double y = grid.y(j);
                double v;
                if (y == 0.0 || degenerate) {
                    v = interp1(psi, x + y * j0, mode);
                } else {
                    v = 0.0;
                    for (int m = 0; m < q; ++m) v += rule.weights[m] * interp1(psi, x + y * jumps[m], mode);
                }
                layer[std::size_t(i) * (grid.n_y + 1) + j] = v;
            }
        }
    }
    return out;
}

}  // namespace illiquid
