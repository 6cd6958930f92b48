#include "illiquid/hjb.hpp"

#include "illiquid/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace illiquid {

void SolverConfig::validate() const {
    grid.validate();
    if (std::isnan(c_max) || std::isnan(pi_max)) throw InvalidParameter("control caps must be numbers");
    if (n_c < 2 || n_pi < 2) throw InvalidParameter("control grids need at least 2 points");
    if (!(cfl_safety > 0.0 && cfl_safety <= 1.0)) throw InvalidParameter("cfl_safety must lie in (0, 1]");
    if (max_substeps < 1) throw InvalidParameter("max_substeps must be >= 1");
    if (quadrature_order < 1) throw InvalidParameter("quadrature order must be >= 1");
    if (terminal) {
        const auto& g = terminal->grid();
        if (g.n_x != grid.n_x || g.n_y != grid.n_y || g.x_max != grid.x_max || g.y_max != grid.y_max)
            throw InvalidParameter("terminal field must share the solver's (x, y) grid");
    }
}

double SolverConfig::resolved_c_max(const MarketParams& m) const {
    return c_max > 0.0 ? c_max : 3.0 * (m.beta + m.lambda) * grid.x_max;
}

double SolverConfig::resolved_pi_max() const { return pi_max > 0.0 ? pi_max : 3.0 * grid.x_max; }

HamiltonianValue hamiltonian_closed(const HamiltonianArgs& a, const MarketParams& m,
                                    const UtilityPower& u) {
    if (!(a.q1 > 0.0)) throw DegenerateJet("Hamiltonian needs q1 > 0");
    if (!(a.Q11 < 0.0)) throw DegenerateJet("Hamiltonian needs Q11 < 0");
    const auto conj = u.legendre(a.q1);
    const double lin = m.b_L * a.q1 + m.rho * m.sigma_L * m.sigma_I * a.y * a.Q12;
    const double s2 = m.sigma_L * m.sigma_L;
    const double pi_star = -lin / (s2 * a.Q11);
    const double drift_y = m.rho * m.b_L * m.sigma_I / m.sigma_L;
    const double vol_y = m.rho * m.sigma_I;
    const double value = conj.value - lin * lin / (2.0 * s2 * a.Q11) + drift_y * a.y * a.q2 +
                         0.5 * vol_y * vol_y * a.y * a.y * a.Q22;
    if (!std::isfinite(value) || !std::isfinite(pi_star))
        throw DegenerateJet("Hamiltonian overflows: Q11 too close to zero");
    return {value, conj.c_star, pi_star};
}

namespace {

/// E[vn(y * exp(mean + sd xi))] for a lognormal multiplier.
double lognormal_expect(const RadialField& vn, const QuadratureRule& rule, double y, double log_mean,
                        double log_sd, Interpolation mode) {
    if (y == 0.0) return interp1(vn, 0.0);
    if (log_sd == 0.0) return interp1(vn, y * std::exp(log_mean), mode);
    return rule.expect([&](double xi) { return interp1(vn, y * std::exp(log_mean + log_sd * xi), mode); });
}

struct BoundaryLaw {
    double discount;
    double lambda;
    double drift_y, vol_y;
    double drift_j, vol_j;

    BoundaryLaw(const MarketParams& m, const DerivedConstants& d)
        : discount(m.beta + m.lambda),
          lambda(m.lambda),
          drift_y(d.drift_Y),
          vol_y(d.vol_Y),
          drift_j(d.drift_J),
          vol_j(d.vol_J) {}

    /// lambda e^{-discount (s - t)} E[vn(Y_s^{t,y} J'_s)]
    double integrand(const RadialField& vn, const QuadratureRule& rule, double t, double s, double y,
                     Interpolation mode) const {
        const double el = s - t;
        const double mean = (drift_y - 0.5 * vol_y * vol_y) * el + (drift_j - 0.5 * vol_j * vol_j) * s;
        const double var = vol_y * vol_y * el + vol_j * vol_j * s;
        return lambda * std::exp(-discount * el) *
               lognormal_expect(vn, rule, y, mean, std::sqrt(std::max(var, 0.0)), mode);
    }
};

// Simpson panels no wider than this in units of 1/discount
constexpr double kSimpsonSpan = 0.05;

int simpson_intervals(double length, double discount, double cap) {
    const double h = std::min(cap, kSimpsonSpan / discount);
    int n = int(std::ceil(length / h - 1e-9));
    n = std::max(n, 2);
    return n + (n % 2);
}

template <class F>
double simpson(F&& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
    return s * h / 3.0;
}

double terminal_at_x0(const SolverConfig& cfg, double y) {
    if (!cfg.terminal) return 0.0;
    return interp2(cfg.terminal->view(cfg.terminal->grid().n_t), 0.0, y, cfg.interpolation);
}

}  // namespace

double boundary_x0(const RadialField& vn, const MarketParams& m, const SolverConfig& cfg, double t,
                   double y) {
    const auto d = derive_constants(m);
    const BoundaryLaw law(m, d);
    const auto rule = QuadratureRule::gauss_hermite(cfg.quadrature_order);
    const double T = cfg.grid.t_max;
    if (t >= T) return terminal_at_x0(cfg, y);

    const int n = simpson_intervals(T - t, law.discount, cfg.grid.dt());
    double v = simpson([&](double s) { return law.integrand(vn, rule, t, s, y, cfg.interpolation); }, t, T, n);
    if (cfg.terminal && y > 0.0) {
        const double el = T - t;
        const double mean = (law.drift_y - 0.5 * law.vol_y * law.vol_y) * el;
        const double sd = law.vol_y * std::sqrt(el);
        const double tail = sd == 0.0
                                ? terminal_at_x0(cfg, y * std::exp(mean))
                                : rule.expect([&](double xi) {
                                      return terminal_at_x0(cfg, y * std::exp(mean + sd * xi));
                                  });
        v += std::exp(-law.discount * el) * tail;
    } else if (cfg.terminal) {
        v += std::exp(-law.discount * (T - t)) * terminal_at_x0(cfg, 0.0);
    }
    return v;
}

std::vector<std::vector<double>> boundary_x0_layers(const RadialField& vn, const MarketParams& m,
                                                    const SolverConfig& cfg) {
    const auto d = derive_constants(m);
    const BoundaryLaw law(m, d);
    const auto rule = QuadratureRule::gauss_hermite(cfg.quadrature_order);
    const GridSpec& g = cfg.grid;
    const int ny = g.n_y;
    const double exponent = vn.envelope_exponent();

    std::vector<std::vector<double>> out(std::size_t(g.n_t) + 1, std::vector<double>(ny + 1));
    for (int j = 0; j <= ny; ++j) out[g.n_t][j] = terminal_at_x0(cfg, g.y(j));

    // B at a y between (or beyond) nodes of the layer above
    auto interp_y = [&](const std::vector<double>& row, double y) {
        if (y >= g.y_max) {
            const double b = row[ny];
            return b * std::pow(y / g.y_max, exponent);
        }
        const double u = y / g.hy();
        const int j = std::min(int(u), ny - 1);
        const double w = u - j;
        if (cfg.interpolation == Interpolation::linear) return (1.0 - w) * row[j] + w * row[j + 1];
        if (j == 0) return row[0] + (row[1] - row[0]) * std::pow(u, exponent);
        const double lo = row[j] / std::pow(double(j), exponent);
        const double hi = row[j + 1] / std::pow(double(j + 1), exponent);
        return ((1.0 - w) * lo + w * hi) * std::pow(u, exponent);
    };

    const bool frozen_y = law.vol_y == 0.0 && law.drift_y == 0.0;
    for (int k = g.n_t - 1; k >= 0; --k) {
        const double t0 = g.t(k);
        const double t1 = g.t(k + 1);
        const double el = t1 - t0;
        const int n = simpson_intervals(el, law.discount, el);
        const double carry = std::exp(-law.discount * el);
        const double mean = (law.drift_y - 0.5 * law.vol_y * law.vol_y) * el;
        const double sd = law.vol_y * std::sqrt(el);
        const auto& next = out[k + 1];
        for (int j = 0; j <= ny; ++j) {
            const double y = g.y(j);
            double v = simpson([&](double s) { return law.integrand(vn, rule, t0, s, y, cfg.interpolation); },
                               t0, t1, n);
            double cont;
            if (frozen_y || y == 0.0)
                cont = next[j];
            else if (sd == 0.0)
                cont = interp_y(next, y * std::exp(mean));
            else
                cont = rule.expect([&](double xi) { return interp_y(next, y * std::exp(mean + sd * xi)); });
            out[k][j] = v + carry * cont;
        }
    }
    return out;
}

std::string StageDiagnostics::to_json_line(int stage) const {
    nlohmann::json j{{"event", "stage"},
                     {"stage", stage},
                     {"substeps_per_layer", substeps_per_layer},
                     {"dt_sub", dt_sub},
                     {"max_update", max_update},
                     {"boundary_max", boundary_max},
                     {"clamp_hits", clamp_hits},
                     {"seconds", seconds}};
    return j.dump();
}

namespace {

/// max of a u + b u^2 over u in [0, cap]; returns the argmax (0 on ties).
inline double branch_argmax(double a, double b, double cap, double& best) {
    double u;
    if (b < 0.0) {
        u = std::clamp(-a / (2.0 * b), 0.0, cap);
    } else {
        u = a * cap + b * cap * cap > 0.0 ? cap : 0.0;
    }
    best = a * u + b * u * u;
    return u;
}

/// sup over c in [0, cap] of U(c) - c q.
struct ConsumptionMax {
    double p, scale, cap;
    bool sqrt_case;

    ConsumptionMax(const UtilityPower& u, double c_cap)
        : p(u.p), scale(u.u_scale), cap(c_cap), sqrt_case(u.p == 0.5) {}

    inline double argmax(double q) const {
        if (q <= 0.0) return cap;
        double c;
        if (sqrt_case) {
            const double r = 0.5 * scale / q;
            c = r * r;
        } else {
            c = std::pow(scale * p / q, 1.0 / (1.0 - p));
        }
        return std::min(c, cap);
    }
    inline double utility(double c) const {
        return sqrt_case ? scale * std::sqrt(c) : scale * std::pow(c, p);
    }
};

/// Working storage with one ghost ring around the (x, y) box.
class Padded {
public:
    Padded(int nx, int ny) : nx_(nx), ny_(ny), stride_(ny + 3), data_(std::size_t(nx + 3) * (ny + 3)) {}

    double& operator()(int i, int j) { return data_[std::size_t(i + 1) * stride_ + (j + 1)]; }
    double operator()(int i, int j) const { return data_[std::size_t(i + 1) * stride_ + (j + 1)]; }
    const double* ptr(int i, int j) const { return &data_[std::size_t(i + 1) * stride_ + (j + 1)]; }
    std::size_t stride() const { return stride_; }

    void load(std::span<const double> layer) {
        for (int i = 0; i <= nx_; ++i)
            for (int j = 0; j <= ny_; ++j) (*this)(i, j) = layer[std::size_t(i) * (ny_ + 1) + j];
    }
    void store(std::span<double> layer) const {
        for (int i = 0; i <= nx_; ++i)
            for (int j = 0; j <= ny_; ++j) layer[std::size_t(i) * (ny_ + 1) + j] = (*this)(i, j);
    }

private:
    int nx_, ny_;
    std::size_t stride_;
    std::vector<double> data_;
};

}  // namespace

StageResult solve_stage(const ValueField& source, const RadialField& vn, const MarketParams& m,
                        const SolverConfig& cfg) {
    const auto started = std::chrono::steady_clock::now();
    cfg.validate();
    const auto d = derive_constants(m);
    const GridSpec& g = cfg.grid;
    if (!(source.grid() == g)) throw InvalidParameter("source field is not on the solver grid");

    const int nx = g.n_x;
    const int ny = g.n_y;
    const double hx = g.hx();
    const double hy = g.hy();
    const double p = m.p;
    const UtilityPower util(m);
    const ConsumptionMax cons(util, cfg.resolved_c_max(m));
    const double pi_cap = cfg.resolved_pi_max();
    const double disc = m.beta + m.lambda;
    const double half_s2 = 0.5 * m.sigma_L * m.sigma_L;
    const double b_L = m.b_L;
    const double k_hat = merton_value(m, true, m.beta);

    StageResult out{ValueField(g, p), {}, {}, {}};
    if (cfg.record_policy) {
        out.c_star = ValueField(g, 1.0);
        out.pi_star = ValueField(g, 1.0);
    }

    const auto bnd = boundary_x0_layers(vn, m, cfg);

    // per-row coefficients of the y-operator and the mixed term
    std::vector<double> mu_y(ny + 1), a_yy(ny + 1), cross(ny + 1);
    for (int j = 0; j <= ny; ++j) {
        const double y = g.y(j);
        mu_y[j] = d.drift_Y * y;
        a_yy[j] = 0.5 * d.vol_Y * d.vol_Y * y * y;
        cross[j] = m.rho * m.sigma_I * m.sigma_L * y;
    }
    // envelope ratios for the ghost ring
    std::vector<double> ghost_x(ny + 2), ghost_y(nx + 2);
    for (int j = 0; j <= ny; ++j)
        ghost_x[j] = std::pow((g.x_max + hx + g.y(j)) / (g.x_max + g.y(j)), p);
    for (int i = 0; i <= nx; ++i)
        ghost_y[i] = std::pow((g.x(i) + g.y_max + hy) / (g.x(i) + g.y_max), p);
    const double ghost_corner =
        std::pow((g.x_max + hx + g.y_max + hy) / (g.x_max + g.y_max), p);
    std::vector<double> clamp_base_x(ny + 1), clamp_base_y(nx + 1);
    for (int j = 0; j <= ny; ++j) clamp_base_x[j] = k_hat * std::pow(g.x_max + g.y(j), p);
    for (int i = 0; i <= nx; ++i) clamp_base_y[i] = k_hat * std::pow(g.x(i) + g.y_max, p);

    Padded cur(nx, ny);
    {
        auto last = out.value.layer(g.n_t);
        if (cfg.terminal) {
            const auto src = cfg.terminal->layer(cfg.terminal->grid().n_t);
            std::copy(src.begin(), src.end(), last.begin());
        }
        cur.load(last);
    }

    auto fill_ghosts = [&](Padded& v) {
        for (int j = 0; j <= ny; ++j) v(nx + 1, j) = v(nx, j) * ghost_x[j];
        for (int i = 0; i <= nx; ++i) v(i, ny + 1) = v(i, ny) * ghost_y[i];
        v(nx + 1, ny + 1) = v(nx, ny) * ghost_corner;
        // the y = 0 row never weighs its lower neighbours; keep them finite
        for (int i = -1; i <= nx + 1; ++i) v(i, -1) = v(std::clamp(i, 0, nx + 1), 0);
        for (int j = -1; j <= ny + 1; ++j) v(-1, j) = v(0, std::clamp(j, 0, ny + 1));
    };

    const std::size_t interior = std::size_t(nx) * (ny + 1);
    std::vector<double> rate(interior), diag(interior), c_pick(interior), pi_pick(interior);

    const bool grid_search = cfg.search == ControlSearch::grid;
    const bool central = cfg.central_weighting;
    std::vector<double> c_grid, pi_grid;
    if (grid_search) {
        for (int a = 0; a < cfg.n_c; ++a) c_grid.push_back(cons.cap * a / (cfg.n_c - 1));
        for (int b = 0; b < cfg.n_pi; ++b) pi_grid.push_back(-pi_cap + 2.0 * pi_cap * b / (cfg.n_pi - 1));
    }

    // x-difference weights that make the quotients exact along each row for
    // k_s x^p + k_v (x + y)^p: the liquid-only Merton value at discount
    // beta + lambda plus the continuation read from V^n at r = 1
    const std::size_t ls = g.layer_size();
    std::vector<double> fit_f(ls, 1.0), fit_b(ls, 1.0), fit_s(ls, 1.0);
    if (cfg.power_fitted) {
        const double k_s = merton_coefficient(p, m.u_scale, m.beta + m.lambda, liquid_growth(m));
        const double k_v = std::max(interp1(vn, 1.0), 0.0);
        auto phi = [&](double x, double y) { return k_s * std::pow(x, p) + k_v * std::pow(x + y, p); };
        for (int i = 1; i <= nx; ++i) {
            const double x = i * hx;
            for (int j = 0; j <= ny; ++j) {
                const double y = g.y(j);
                const double lo = phi(x - hx, y), mid = phi(x, y), hi = phi(x + hx, y);
                const double slope = p * (k_s * std::pow(x, p - 1.0) + k_v * std::pow(x + y, p - 1.0));
                const double curv =
                    p * (p - 1.0) * (k_s * std::pow(x, p - 2.0) + k_v * std::pow(x + y, p - 2.0));
                const std::size_t n = std::size_t(i) * (ny + 1) + j;
                fit_b[n] = slope * hx / (mid - lo);
                fit_f[n] = slope * hx / (hi - mid);
                const double second = hi - 2.0 * mid + lo;
                fit_s[n] = second != 0.0 ? curv * hx * hx / second : 1.0;
            }
        }
    }
    const double inv_hx = 1.0 / hx, inv_hy = 1.0 / hy;
    const double inv_hx2 = inv_hx * inv_hx, inv_hy2 = inv_hy * inv_hy;
    const double inv_2hxhy = 0.5 * inv_hx * inv_hy;

    long total_sub = 0;
    double min_dt = std::numeric_limits<double>::infinity();
    double clamp_hits = 0.0;
    double boundary_max = 0.0;
    for (const auto& row : bnd)
        for (double b : row) boundary_max = std::max(boundary_max, b);

    Padded prev(nx, ny);
    for (int k = g.n_t - 1; k >= 0; --k) {
        const double t_hi = g.t(k + 1);
        const double t_lo = g.t(k);
        const auto src_hi = source.layer(k + 1);
        const auto src_lo = source.layer(k);
        prev = cur;
        double s = t_hi;
        long steps = 0;
        int hits = 0;
        while (s > t_lo) {
            if (++steps > cfg.max_substeps) throw CflUnsatisfiable(steps, cfg.max_substeps);
            fill_ghosts(cur);
            const double w_src = (s - t_lo) / (t_hi - t_lo);
            double max_diag = 0.0;
            for (int i = 1; i <= nx; ++i) {
                for (int j = 0; j <= ny; ++j) {
                    const double* c0 = cur.ptr(i, j);
                    const std::size_t st = cur.stride();
                    const double v = *c0;
                    const double ve = c0[st], vw = c0[-std::ptrdiff_t(st)];
                    const double vn_ = c0[1], vs = c0[-1];
                    const std::size_t at = std::size_t(i) * (ny + 1) + j;
                    const double ffw = fit_f[at], fbw = fit_b[at], fsw = fit_s[at];
                    const double dxf = ffw * (ve - v) * inv_hx, dxb = fbw * (v - vw) * inv_hx;
                    const double dxx = fsw * (ve - 2.0 * v + vw) * inv_hx2;
                    const double fmax = std::max(ffw, fbw);
                    const double dyf = (vn_ - v) * inv_hy, dyb = (v - vs) * inv_hy;
                    const double dyy = (vn_ - 2.0 * v + vs) * inv_hy2;

                    const double cr = cross[j];
                    double dxy_pos = 0.0, dxy_neg = 0.0;
                    if (cr != 0.0) {
                        const double vne = c0[st + 1], vsw = c0[-std::ptrdiff_t(st) - 1];
                        const double vse = c0[st - 1], vnw = c0[-std::ptrdiff_t(st) + 1];
                        dxy_pos = (2.0 * v + vne + vsw - ve - vw - vn_ - vs) * inv_2hxhy;
                        dxy_neg = -(2.0 * v + vse + vnw - ve - vw - vn_ - vs) * inv_2hxhy;
                    }
                    const double ly = (mu_y[j] >= 0.0 ? mu_y[j] * dyf : mu_y[j] * dyb) + a_yy[j] * dyy;
                    const double ly_diag = std::abs(mu_y[j]) * inv_hy + 2.0 * a_yy[j] * inv_hy2;

                    double c, pi, gain;
                    double x_diag;  // loss rate of the centre node from the x-operator
                    if (!grid_search) {
                        // pi > 0 and pi < 0 branches see different upwind stencils
                        const double dx_up = b_L >= 0.0 ? dxf : dxb;
                        const double dx_dn = b_L >= 0.0 ? dxb : dxf;
                        const double mix_up = cr * (cr >= 0.0 ? dxy_pos : dxy_neg);
                        const double mix_dn = cr * (cr >= 0.0 ? dxy_neg : dxy_pos);
                        const double bq = half_s2 * dxx;
                        double f_up, f_dn;
                        const double u_up = branch_argmax(b_L * dx_up + mix_up, bq, pi_cap, f_up);
                        const double u_dn = branch_argmax(-(b_L * dx_dn + mix_dn), bq, pi_cap, f_dn);
                        if (f_dn > f_up) {
                            pi = -u_dn;
                            gain = f_dn;
                        } else {
                            pi = u_up;
                            gain = f_up;
                        }
                        c = cons.argmax(dxb);
                        gain += cons.utility(c) - c * dxb;
                        x_diag = 2.0 * half_s2 * pi * pi * fsw * inv_hx2 + std::abs(b_L * pi) * fmax * inv_hx +
                                 c * fbw * inv_hx;

                        if (central) {
                            // blend towards central x-differences as far as the
                            // diffusion keeps every neighbour weight nonnegative
                            const double dxc = 0.5 * (dxf + dxb);
                            auto blended = [&](double cc, double pc, double& loss) {
                                const double drift = pc * b_L - cc;
                                const double diff2 = 2.0 * half_s2 * pc * pc;
                                const double ad = std::abs(drift);
                                const double f_up = drift >= 0.0 ? ffw : fbw;
                                const double f_far = drift >= 0.0 ? fbw : ffw;
                                const double room = diff2 * fsw;
                                const double theta = ad * hx * f_far <= room ? 1.0 : room / (ad * hx * f_far);
                                const double dx_up = drift >= 0.0 ? dxf : dxb;
                                const double mix = pc * cr >= 0.0 ? dxy_pos : dxy_neg;
                                loss = room * inv_hx2 +
                                       ((1.0 - theta) * f_up + 0.5 * theta * std::abs(fbw - ffw)) * ad * inv_hx;
                                return cons.utility(cc) + drift * (theta * dxc + (1.0 - theta) * dx_up) +
                                       half_s2 * pc * pc * dxx + pc * cr * mix;
                            };
                            double loss_u;
                            const double gu = blended(c, pi, loss_u);
                            const double cc = cons.argmax(dxc);
                            double g_up, g_dn;
                            const double w_up = branch_argmax(b_L * dxc + mix_up, bq, pi_cap, g_up);
                            const double w_dn = branch_argmax(-(b_L * dxc + mix_dn), bq, pi_cap, g_dn);
                            const double pc = g_dn > g_up ? -w_dn : w_up;
                            double loss_c;
                            const double gc = blended(cc, pc, loss_c);
                            if (gc > gu) {
                                gain = gc;
                                c = cc;
                                pi = pc;
                                x_diag = loss_c;
                            } else {
                                gain = gu;
                                x_diag = loss_u;
                            }
                        }
                    } else {
                        double best_c = 0.0, best_cg = -std::numeric_limits<double>::infinity();
                        for (double cc : c_grid) {
                            const double val = cons.utility(cc) - cc * dxb;
                            if (val > best_cg) {
                                best_cg = val;
                                best_c = cc;
                            }
                        }
                        double best_p = 0.0, best_pg = -std::numeric_limits<double>::infinity();
                        for (double pp : pi_grid) {
                            const double drift = pp * b_L;
                            const double dx = drift >= 0.0 ? dxf : dxb;
                            const double a_xy = pp * cr;
                            const double val = drift * dx + half_s2 * pp * pp * dxx +
                                               a_xy * (a_xy >= 0.0 ? dxy_pos : dxy_neg);
                            if (val > best_pg || (val == best_pg && std::abs(pp) < std::abs(best_p))) {
                                best_pg = val;
                                best_p = pp;
                            }
                        }
                        c = best_c;
                        pi = best_p;
                        gain = best_cg + best_pg;
                        x_diag = 2.0 * half_s2 * pi * pi * fsw * inv_hx2 + std::abs(b_L * pi) * fmax * inv_hx +
                                 c * fbw * inv_hx;
                    }

                    const double src = w_src * src_hi[std::size_t(i) * (ny + 1) + j] +
                                       (1.0 - w_src) * src_lo[std::size_t(i) * (ny + 1) + j];
                    const std::size_t n = std::size_t(i - 1) * (ny + 1) + j;
                    rate[n] = gain + ly + src - disc * v;
                    diag[n] = x_diag + std::abs(pi * cr) * 2.0 * inv_2hxhy + ly_diag + disc;
                    c_pick[n] = c;
                    pi_pick[n] = pi;
                    max_diag = std::max(max_diag, diag[n]);
                }
            }
            double tau = cfg.cfl_safety / max_diag;
            if (s - tau <= t_lo + 1e-12 * (t_hi - t_lo)) tau = s - t_lo;
            min_dt = std::min(min_dt, tau);

            if (cfg.record_policy && (steps == 1 && k == g.n_t - 1)) {
                for (int i = 1; i <= nx; ++i)
                    for (int j = 0; j <= ny; ++j) {
                        const std::size_t n = std::size_t(i - 1) * (ny + 1) + j;
                        out.c_star.at(g.n_t, i, j) = c_pick[n];
                        out.pi_star.at(g.n_t, i, j) = pi_pick[n];
                    }
            }

            s -= tau;
            if (s < t_lo) s = t_lo;
            const double w_b = (s - t_lo) / (t_hi - t_lo);
            const double growth = std::exp(d.k_tilde_p * s);
            hits = 0;
            for (int i = 1; i <= nx; ++i) {
                for (int j = 0; j <= ny; ++j) {
                    const std::size_t n = std::size_t(i - 1) * (ny + 1) + j;
                    double v = cur(i, j) + tau * rate[n];
                    if (i == nx || j == ny) {
                        const double cap = (i == nx ? clamp_base_x[j] : clamp_base_y[i]) * growth;
                        if (v > cap) {
                            v = cap;
                            ++hits;
                        }
                    }
                    cur(i, j) = v;
                }
            }
            for (int j = 0; j <= ny; ++j) cur(0, j) = w_b * bnd[k + 1][j] + (1.0 - w_b) * bnd[k][j];
        }
        total_sub += steps;
        clamp_hits = hits;

        auto layer = out.value.layer(k);
        cur.store(layer);
        double upd = 0.0;
        for (int i = 0; i <= nx; ++i)
            for (int j = 0; j <= ny; ++j) {
                const double v = cur(i, j);
                if (!std::isfinite(v)) throw NonFiniteValue("non-finite value at layer " + std::to_string(k));
                upd = std::max(upd, std::abs(v - prev(i, j)));
            }
        out.diag.max_update = std::max(out.diag.max_update, upd);

        if (cfg.record_policy) {
            for (int i = 1; i <= nx; ++i)
                for (int j = 0; j <= ny; ++j) {
                    const std::size_t n = std::size_t(i - 1) * (ny + 1) + j;
                    out.c_star.at(k, i, j) = c_pick[n];
                    out.pi_star.at(k, i, j) = pi_pick[n];
                }
        }
    }

    out.diag.substeps_per_layer = g.n_t > 0 ? (total_sub + g.n_t - 1) / g.n_t : 0;
    out.diag.dt_sub = std::isfinite(min_dt) ? min_dt : 0.0;
    out.diag.boundary_max = boundary_max;
    out.diag.clamp_hits = clamp_hits;
    out.diag.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return out;
}

}  // namespace illiquid
