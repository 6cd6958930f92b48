#include "illiquid/driver.hpp"

#include "illiquid/errors.hpp"
#include "illiquid/gop.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace illiquid {

void IterationConfig::validate() const {
    if (!(tol_rel > 0.0)) throw InvalidParameter("tol_rel must be positive");
    if (n_max < 1) throw InvalidParameter("n_max must be >= 1");
    if (horizon && !(*horizon > 0.0)) throw InvalidParameter("horizon must be positive");
    if (!(horizon_tol >= 0.0 && horizon_tol < 1.0)) throw InvalidParameter("horizon_tol must lie in [0, 1)");
}

double choose_horizon(const MarketParams& m, double tol_rel, double t_cap) {
    if (!(tol_rel > 0.0 && tol_rel < 1.0)) throw InvalidParameter("horizon tolerance must lie in (0, 1)");
    const auto d = derive_constants(m);
    const double exponent = m.beta + m.lambda - d.k_p;
    return std::min(std::log(10.0 / tol_rel) / exponent, t_cap);
}

Solution iterate(const MarketParams& m, const SolverConfig& solver, const IterationConfig& it) {
    m.validate();
    it.validate();
    const auto d = derive_constants(m);

    SolverConfig cfg = solver;
    GridSpec& g = cfg.grid;
    if (it.horizon) {
        g.t_max = *it.horizon;
    } else {
        // the truncation error of every stage accumulates through the contraction
        const double htol = (it.horizon_tol > 0.0 ? it.horizon_tol : it.tol_rel) * (1.0 - d.delta);
        g.t_max = choose_horizon(m, htol, g.t_max);
    }
    g.r_max = g.x_max + g.y_max;
    g.n_r = (g.n_x + g.n_y) * it.radial_refine;
    cfg.record_policy = true;
    cfg.validate();

    Solution sol;
    sol.params = m;
    sol.solver = cfg;
    SolveReport& rep = sol.report;
    rep.delta = d.delta;
    rep.horizon = g.t_max;
    rep.horizon_exponent = m.beta + m.lambda - d.k_p;
    rep.stop_threshold = it.tol_rel * (1.0 - d.delta) / d.delta;

    const auto rule = QuadratureRule::gauss_hermite(cfg.quadrature_order);
    const auto law = JLaw::from(d);
    RadialField v(g.r_max, g.n_r, m.p, 0.0);

    for (int n = 0; n < it.n_max; ++n) {
        ValueField src = g_field(v, law, rule, g, cfg.interpolation);
        for (double& s : src.values()) s *= m.lambda;
        StageResult stage = solve_stage(src, v, m, cfg);
        HFieldResult h = h_field(stage.value.view(0), g.r_max, g.n_r, m.p, cfg.interpolation);

        double inc = 0.0, top = 0.0, drop = 0.0;
        for (int i = 0; i <= g.n_r; ++i) {
            inc = std::max(inc, std::abs(h.value[i] - v[i]));
            drop = std::max(drop, v[i] - h.value[i]);
            top = std::max(top, std::abs(h.value[i]));
        }
        rep.max_decrease = std::max(rep.max_decrease, drop);
        rep.ratios.push_back(rep.increments.empty() || rep.increments.back() == 0.0
                                 ? std::nan("")
                                 : inc / rep.increments.back());
        rep.increments.push_back(inc);
        rep.stage_seconds.push_back(stage.diag.seconds);
        rep.stages.push_back(stage.diag);
        rep.iterations = n + 1;
        if (it.log) *it.log << stage.diag.to_json_line(n) << '\n';

        v = h.value;
        sol.iterates.push_back(v);
        const double rel = top > 0.0 ? inc / top : 0.0;
        const bool done = rel <= rep.stop_threshold || n + 1 == it.n_max;
        if (done) {
            rep.converged = rel <= rep.stop_threshold;
            sol.vhat = std::move(stage.value);
            sol.c_star = std::move(stage.c_star);
            sol.pi_star = std::move(stage.pi_star);
            sol.alloc = std::move(h.alloc);
            break;
        }
    }
    sol.v_radial = v;
    if (it.log) {
        *it.log << R"({"event":"iterate","iterations":)" << rep.iterations << R"(,"converged":)"
                << (rep.converged ? "true" : "false") << R"(,"horizon":)" << rep.horizon
                << R"(,"delta":)" << rep.delta << "}\n";
    }
    return sol;
}

void require_converged(const Solution& s) {
    if (!s.report.converged) {
        const double top = [&] {
            double t = 0.0;
            for (double x : s.v_radial.values()) t = std::max(t, std::abs(x));
            return t;
        }();
        throw NoConvergence(s.report.iterations, top > 0.0 ? s.report.last_increment() / top : 0.0);
    }
}

namespace {

double time_interp(const ValueField& f, double t, double t_clamp, double x, double y) {
    const GridSpec& g = f.grid();
    t = std::clamp(t, 0.0, t_clamp);
    const double u = t / g.dt();
    const int k = std::min(int(u), g.n_t - 1);
    const double w = std::clamp(u - k, 0.0, 1.0);
    const double lo = interp2_homogeneous(f, k, x, y);
    if (w == 0.0) return lo;
    return (1.0 - w) * lo + w * interp2_homogeneous(f, k + 1, x, y);
}

}  // namespace

double PolicyBundle::consumption(double t, double x, double y) const {
    if (x <= 0.0) return 0.0;
    return std::max(time_interp(c_star, t, t_clamp, x, y), 0.0);
}

double PolicyBundle::position(double t, double x, double y) const {
    if (x <= 0.0) return 0.0;
    return time_interp(pi_star, t, t_clamp, x, y);
}

PolicyBundle extract_policy(const Solution& s, const MarketParams& m) {
    (void)m;
    PolicyBundle b;
    b.alloc = s.alloc;
    b.c_star = s.c_star;
    b.pi_star = s.pi_star;
    // the finite-horizon stage consumes everything as T approaches
    b.t_clamp = 0.5 * s.c_star.grid().t_max;
    return b;
}

void write_report_csv(std::ostream& os, const SolveReport& r) {
    os << "iteration,increment,ratio,delta\n" << std::setprecision(12);
    for (std::size_t n = 0; n < r.increments.size(); ++n) {
        os << n + 1 << ',' << r.increments[n] << ',';
        if (!std::isnan(r.ratios[n])) os << r.ratios[n];
        os << ',' << r.delta << '\n';
    }
}

void save_solution(const std::string& dir, const Solution& s) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path base(dir);
    save((base / "v_radial.bin").string(), s.v_radial);
    save((base / "vhat.bin").string(), s.vhat);
    save((base / "c_star.bin").string(), s.c_star);
    save((base / "pi_star.bin").string(), s.pi_star);
    RadialField alloc(s.v_radial.r_max(), s.v_radial.n_r(), 1.0);
    for (int i = 0; i <= alloc.n_r() && std::size_t(i) < s.alloc.a_star.size(); ++i) alloc[i] = s.alloc.a_star[i];
    save((base / "alloc.bin").string(), alloc);
    std::ofstream csv(base / "report.csv");
    if (!csv) throw FormatError("cannot write " + (base / "report.csv").string());
    write_report_csv(csv, s.report);
}

Solution load_solution(const std::string& dir, const MarketParams& m) {
    namespace fs = std::filesystem;
    const fs::path base(dir);
    Solution s;
    s.params = m;
    s.v_radial = load_radial_field((base / "v_radial.bin").string());
    s.vhat = load_value_field((base / "vhat.bin").string());
    s.c_star = load_value_field((base / "c_star.bin").string());
    s.pi_star = load_value_field((base / "pi_star.bin").string());
    const RadialField alloc = load_radial_field((base / "alloc.bin").string());
    for (int i = 0; i <= alloc.n_r(); ++i) {
        s.alloc.r.push_back(alloc.r(i));
        s.alloc.a_star.push_back(alloc[i]);
    }
    s.solver.grid = s.vhat.grid();
    s.solver.grid.r_max = s.v_radial.r_max();
    s.solver.grid.n_r = s.v_radial.n_r();
    return s;
}

}  // namespace illiquid
