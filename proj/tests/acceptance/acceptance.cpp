// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
//   acceptance [--only 1,4] [--out-dir DIR] [--workers N]

#include "illiquid/config.hpp"
#include "illiquid/driver.hpp"
#include "illiquid/gop.hpp"
#include "illiquid/mc.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <functional>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

using namespace illiquid;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
    bool pass;
    std::string detail;
};

std::string fixed(double v, int digits = 5) {
    std::ostringstream os;
    os << std::setprecision(digits) << v;
    return os.str();
}

/// Reference grid shared by the sweep-based criteria.
RunConfig reference_config() { return RunConfig::defaults(); }

MarketParams market(double rho, double lambda) {
    MarketParams m;
    m.rho = rho;
    m.lambda = lambda;
    return m;
}

class SolveCache {
public:
    explicit SolveCache(int workers) : workers_(workers) {}

    const Solution& get(double rho, double lambda) {
        const auto key = std::make_pair(rho, lambda);
        auto it = cache_.find(key);
        if (it == cache_.end()) {
            const RunConfig c = reference_config();
            it = cache_.emplace(key, iterate(market(rho, lambda), c.solver, c.iteration)).first;
        }
        return it->second;
    }

    /// Solves every missing point of the grid, several at a time.
    void prefetch(const std::vector<double>& rhos, const std::vector<double>& lambdas) {
        std::vector<std::pair<double, double>> todo;
        for (double rho : rhos)
            for (double lam : lambdas)
                if (!cache_.count({rho, lam})) todo.emplace_back(rho, lam);
        std::vector<Solution> out(todo.size());
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            const RunConfig c = reference_config();
            for (std::size_t i = next++; i < todo.size(); i = next++)
                out[i] = iterate(market(todo[i].first, todo[i].second), c.solver, c.iteration);
        };
        std::vector<std::thread> pool;
        for (int w = 1; w < std::min<int>(workers_, int(todo.size())); ++w) pool.emplace_back(work);
        work();
        for (auto& t : pool) t.join();
        for (std::size_t i = 0; i < todo.size(); ++i) cache_.emplace(todo[i], std::move(out[i]));
    }

private:
    int workers_;
    std::map<std::pair<double, double>, Solution> cache_;
};

const std::vector<double> kRhos{-0.8, -0.4, 0.0, 0.4, 0.8};
const std::vector<double> kLambdas{1.0, 5.0, 10.0, 50.0};

Verdict first_stage() {
    const MarketParams m = market(0.0, 1.0);
    SolverConfig cfg;
    cfg.grid = GridSpec::with_radial_cover(choose_horizon(m, 1e-2), 50, 2.0, 2.0, 100, 100);
    const ValueField source(cfg.grid, m.p, 0.0);
    const RadialField v0(cfg.grid.r_max, cfg.grid.n_r, m.p, 0.0);
    const auto t0 = Clock::now();
    const StageResult st = solve_stage(source, v0, m, cfg);
    const double secs = seconds_since(t0);
    const double target = 0.6486;
    const int i1 = 50;
    double worst = 0.0, at0 = st.value.at(0, i1, 0);
    for (int j = 0; j <= cfg.grid.n_y; ++j) worst = std::max(worst, std::abs(st.value.at(0, i1, j) / target - 1.0));
    const bool pass = worst <= 0.015 && secs < 120.0;
    return {pass, "V(0,1,y)=" + fixed(at0, 6) + " worst rel.err over y " + fixed(100 * worst, 3) +
                      "% (tol 1.5%), runtime " + fixed(secs, 3) + " s (limit 120 s)"};
}

Verdict dominance(SolveCache& cache) {
    bool pass = true;
    std::ostringstream os;
    double worst_excess = -1e300, worst_drop = -1e300;
    for (double rho : kRhos) {
        const double M = merton_value(market(rho, 1.0), true);
        double prev = -1e300;
        for (double lam : kLambdas) {
            const Solution& s = cache.get(rho, lam);
            const double v = interp1(s.v_radial, 1.0);
            worst_excess = std::max(worst_excess, v - M);
            worst_drop = std::max(worst_drop, prev - v);
            if (v > M + 1e-3 || v < prev - 1e-3 || !s.report.converged) pass = false;
            prev = v;
        }
    }
    os << "max V(1)-Merton " << fixed(worst_excess, 3) << " (tol 1e-3), max decrease in lambda "
       << fixed(worst_drop, 3) << " (tol 1e-3) over 20 points";
    return {pass, os.str()};
}

Verdict contraction(SolveCache& cache) {
    const Solution& s = cache.get(0.0, 1.0);
    const auto& r = s.report;
    double worst = 0.0;
    for (std::size_t n = 1; n < r.ratios.size(); ++n) worst = std::max(worst, r.ratios[n]);
    const bool pass = worst <= r.delta + 0.05 && r.ratios.size() > 2;
    return {pass, "max ratio " + fixed(worst, 4) + " over " + std::to_string(r.ratios.size()) +
                      " iterations, delta " + fixed(r.delta, 5) + " (bound delta+0.05)"};
}

Verdict nonlocal_operator(SolveCache& cache) {
    const MarketParams m = market(0.0, 1.0);
    const auto d = derive_constants(m);
    const JLaw law = JLaw::from(d);
    const auto rule = QuadratureRule::gauss_hermite(32);
    const GridSpec g = cache.get(0.0, 1.0).solver.grid;

    const auto id = RadialField::sample(g.r_max, g.n_r, 1.0, [](double r) { return r; });
    double worst_mean = 0.0;
    for (int k = 0; k <= g.n_t; ++k)
        for (int i = 0; i <= g.n_x; ++i)
            for (int j = 0; j <= g.n_y; ++j) {
                const double exact = g.x(i) + g.y(j) * std::exp(law.drift * g.t(k));
                if (exact == 0.0) continue;
                const double got = g_point(id, law, rule, g.t(k), g.x(i), g.y(j));
                worst_mean = std::max(worst_mean, std::abs(got / exact - 1.0));
            }

    const auto power = RadialField::sample(g.r_max, g.n_r, m.p, [&](double r) { return std::pow(r, m.p); });
    double worst_growth = -1e300;
    for (auto mode : {Interpolation::linear, Interpolation::homogeneous}) {
        const ValueField f = g_field(power, law, rule, g, mode);
        for (int k = 0; k <= g.n_t; ++k)
            for (int i = 0; i <= g.n_x; ++i)
                for (int j = 0; j <= g.n_y; ++j) {
                    const double bound = std::exp(d.k_tilde_p * g.t(k)) * std::pow(g.x(i) + g.y(j), m.p);
                    if (bound > 0.0) worst_growth = std::max(worst_growth, f.at(k, i, j) / bound - 1.0);
                    else worst_growth = std::max(worst_growth, f.at(k, i, j));
                }
    }
    const bool pass = worst_mean <= 1e-6 && worst_growth <= 1e-12;
    return {pass, "max rel.err of G[r] " + fixed(worst_mean, 3) + " (tol 1e-6), max G[r^p]-bound " +
                      fixed(worst_growth, 3) + " over all lattice nodes, t in [0, " + fixed(g.t_max, 4) + "]"};
}

Verdict shape(SolveCache& cache) {
    const Solution& s = cache.get(0.0, 1.0);
    const LayerView v0 = s.vhat.view(0);
    const double tol = 2.0 * cell_truncation_estimate(v0);
    const ShapeReport rep = shape_check(v0, tol);
    const double v1 = interp1(s.v_radial, 1.0);
    const double rmax = s.v_radial.r_max();
    double worst_h = 0.0;
    for (int i = 0; i <= s.v_radial.n_r(); ++i) {
        const double r = s.v_radial.r(i);
        if (r < 0.25 * rmax || r > 0.75 * rmax) continue;
        const double ref = v1 * std::pow(r, s.params.p);
        worst_h = std::max(worst_h, std::abs(s.v_radial[i] - ref) / ref);
    }
    const bool pass = rep.passed() && worst_h <= 0.01;
    return {pass, "worst shape violation " + fixed(rep.worst(), 3) + " vs 2x truncation estimate " + fixed(tol, 3) +
                      ", homogeneity " + fixed(100 * worst_h, 3) + "% on r in [" + fixed(0.25 * rmax, 3) + ", " +
                      fixed(0.75 * rmax, 3) + "] (tol 1%)"};
}

Verdict allocation(SolveCache& cache) {
    std::ostringstream os;
    bool pass = true;
    double prev = -1.0;
    os << "alpha(1)/1 at lambda";
    for (double lam : kLambdas) {
        const double a = cache.get(0.0, lam).alloc.a_at(1.0);
        os << ' ' << fixed(lam, 3) << ':' << fixed(a, 4);
        if (a < prev - 1e-9) pass = false;
        prev = a;
    }
    const double u_I = merton_fractions(market(0.0, 50.0)).u_I;
    pass = pass && std::abs(prev - u_I) <= 0.1;
    os << "; target " << u_I << " +- 0.1 at lambda 50";
    return {pass, os.str()};
}

Verdict monte_carlo(int workers, const std::string& out_dir) {
    const MarketParams m = market(0.0, 1.0);
    RunConfig c = reference_config();
    c.solver.grid.n_x = 60;
    c.solver.grid.n_y = 60;
    const auto t0 = Clock::now();
    const Solution s = iterate(m, c.solver, c.iteration);
    const double solve_secs = seconds_since(t0);
    const double v1 = interp1(s.v_radial, 1.0);
    const FeedbackPolicy policy = FeedbackPolicy::from(extract_policy(s, m));
    PathConfig pc;
    pc.n_paths = 100'000;
    pc.workers = workers;
    const McEstimate e = simulate_policy(m, policy, 1.0, pc);
    const DppResult dpp = dpp_check(m, s, policy, 1.0, pc);
    if (!out_dir.empty()) {
        std::ofstream csv(std::filesystem::path(out_dir) / "mc.csv");
        write_csv_header(csv);
        write_csv_row(csv, policy.id, 1.0, e, pc.seed);
    }
    const bool in_band = e.mean >= 0.9 * v1 && e.mean <= v1 + 2.0 * e.std_error;
    const bool dpp_ok = std::abs(dpp.discrepancy) <= std::max(2.0 * dpp.std_error, 0.02 * v1);
    return {in_band && dpp_ok && s.report.converged,
            "V(1)=" + fixed(v1, 6) + " (60x60 grid, " + fixed(solve_secs, 3) + " s), MC " + fixed(e.mean, 6) +
                " +- " + fixed(e.std_error, 3) + " in [" + fixed(0.9 * v1, 6) + ", " +
                fixed(v1 + 2.0 * e.std_error, 6) + "], dpp " + fixed(dpp.discrepancy, 3) + " +- " +
                fixed(dpp.std_error, 3) + " (tol " + fixed(std::max(2.0 * dpp.std_error, 0.02 * v1), 3) + ")"};
}

Verdict robustness(SolveCache& cache) {
    const MarketParams m = market(0.0, 1.0);
    const double base = interp1(cache.get(0.0, 1.0).v_radial, 1.0);
    const RunConfig ref = reference_config();
    struct Variant {
        const char* name;
        SolverConfig cfg;
    };
    std::vector<Variant> variants;
    {
        SolverConfig s = ref.solver;
        s.grid.x_max *= 2.0;
        s.grid.n_x *= 2;
        variants.push_back({"x_max", s});
    }
    {
        SolverConfig s = ref.solver;
        s.grid.y_max *= 2.0;
        s.grid.n_y *= 2;
        variants.push_back({"y_max", s});
    }
    {
        SolverConfig s = ref.solver;
        s.c_max = 2.0 * ref.solver.resolved_c_max(m);
        variants.push_back({"c_max", s});
    }
    {
        SolverConfig s = ref.solver;
        s.pi_max = 2.0 * ref.solver.resolved_pi_max();
        variants.push_back({"pi_max", s});
    }
    bool pass = true;
    std::ostringstream os;
    os << "base V(1)=" << fixed(base, 6) << ";";
    for (const auto& v : variants) {
        const double val = interp1(iterate(m, v.cfg, ref.iteration).v_radial, 1.0);
        const double rel = std::abs(val / base - 1.0);
        if (rel >= 0.01) pass = false;
        os << " 2x " << v.name << ' ' << fixed(100 * rel, 3) << "%";
    }
    os << " (tol 1%)";
    return {pass, os.str()};
}

void write_sweep(SolveCache& cache, const std::string& out_dir) {
    std::ofstream csv(std::filesystem::path(out_dir) / "sweep.csv");
    csv << "rho,lambda,V_at_1,alpha_frac_at_1,merton_constrained,merton_unconstrained\n" << std::setprecision(10);
    for (double rho : kRhos)
        for (double lam : kLambdas) {
            const Solution& s = cache.get(rho, lam);
            const MarketParams m = market(rho, lam);
            csv << rho << ',' << lam << ',' << interp1(s.v_radial, 1.0) << ',' << s.alloc.a_at(1.0) << ','
                << merton_value(m, true) << ',' << merton_value(m, false) << '\n';
        }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string only;
    std::string out_dir;
    int workers = int(std::max(1u, std::thread::hardware_concurrency()));
    app.add_option("--only", only, "comma list of criteria to run");
    app.add_option("--out-dir", out_dir, "write sweep.csv and mc.csv here");
    app.add_option("--workers", workers, "threads for sweeps and paths");
    CLI11_PARSE(app, argc, argv);

    std::set<int> selected;
    if (only.empty())
        for (int k = 1; k <= 8; ++k) selected.insert(k);
    else
        for (double k : parse_list(only)) selected.insert(int(k));
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    SolveCache cache(workers);

    const std::map<int, std::pair<const char*, std::function<Verdict()>>> criteria = {
        {1, {"first-stage closed form", first_stage}},
        {2, {"Merton dominance and lambda-monotonicity",
             [&] {
                 cache.prefetch(kRhos, kLambdas);
                 return dominance(cache);
             }}},
        {3, {"contraction rate", [&] { return contraction(cache); }}},
        {4, {"nonlocal operator", [&] { return nonlocal_operator(cache); }}},
        {5, {"shape and homogeneity", [&] { return shape(cache); }}},
        {6, {"allocation limit", [&] { return allocation(cache); }}},
        {7, {"Monte-Carlo consistency", [&] { return monte_carlo(workers, out_dir); }}},
        {8, {"robustness to truncation", [&] { return robustness(cache); }}},
    };

    int failures = 0;
    for (int k : selected) {
        const auto it = criteria.find(k);
        if (it == criteria.end()) continue;
        const auto t0 = Clock::now();
        Verdict v{false, ""};
        try {
            v = it->second.second();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        failures += !v.pass;
        std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << k << " (" << it->second.first << "): " << v.detail
                  << " [" << fixed(seconds_since(t0), 3) << " s]" << std::endl;
    }
    if (!out_dir.empty() && selected.count(2)) write_sweep(cache, out_dir);
    return failures == 0 ? 0 : 1;
}
