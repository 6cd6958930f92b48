// Command-line runner: validate, merton, solve, sweep, mc.

#include "illiquid/config.hpp"
#include "illiquid/driver.hpp"
#include "illiquid/errors.hpp"
#include "illiquid/mc.hpp"
#include "illiquid/model.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace illiquid;

namespace {

enum Exit { ok = 0, config_error = 2, ill_posed = 3, solver_failure = 4 };

struct Options {
    std::string config_path;
    std::string out_dir;
    std::string rho;
    std::string lambda;
    std::string solution_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<double> tol;
};

void log_line(const nlohmann::json& j) { std::cerr << j.dump() << '\n'; }

RunConfig load(const Options& o) {
    RunConfig c = o.config_path.empty() ? RunConfig::defaults() : load_config(o.config_path);
    if (o.seed) c.mc.seed = *o.seed;
    if (o.workers) {
        if (*o.workers < 1) throw ConfigError("--workers must be >= 1");
        c.mc.workers = *o.workers;
    }
    if (o.tol) {
        if (!(*o.tol > 0.0)) throw ConfigError("--tol must be positive");
        c.iteration.tol_rel = *o.tol;
    }
    if (!o.rho.empty()) c.sweep_rho = parse_list(o.rho);
    if (!o.lambda.empty()) c.sweep_lambda = parse_list(o.lambda);
    return c;
}

/// Single-point commands take --rho / --lambda as one value.
void apply_point(const Options& o, RunConfig& c) {
    auto single = [](const std::string& text, const char* flag) {
        const auto xs = parse_list(text);
        if (xs.size() != 1) throw ConfigError(std::string(flag) + " takes one value for this command");
        return xs[0];
    };
    if (!o.rho.empty()) c.market.rho = single(o.rho, "--rho");
    if (!o.lambda.empty()) c.market.lambda = single(o.lambda, "--lambda");
    c.market.validate();
}

/// Opens out_dir/name, or returns stdout when no directory was given.
std::ostream& sink(const Options& o, const std::string& name, std::ofstream& file) {
    if (o.out_dir.empty()) return std::cout;
    fs::create_directories(o.out_dir);
    file.open(fs::path(o.out_dir) / name);
    if (!file) throw ConfigError("cannot write " + (fs::path(o.out_dir) / name).string());
    return file;
}

int cmd_validate(const Options& o) {
    RunConfig c = load(o);
    apply_point(o, c);
    const auto d = derive_constants(c.market);
    std::cout << std::setprecision(10) << "k_tilde_p = " << d.k_tilde_p << "\nk_p = " << d.k_p
              << "\nmargin = " << d.margin << "\ndelta = " << d.delta << "\ndrift_J = " << d.drift_J
              << "\nvol_J = " << d.vol_J << "\ndrift_Y = " << d.drift_Y << "\nvol_Y = " << d.vol_Y
              << "\nwell_posed = true\n";
    std::cout << "lambda,delta\n";
    for (double lam : c.sweep_lambda) {
        MarketParams m = c.market;
        m.lambda = lam;
        std::cout << lam << ',' << derive_constants(m).delta << '\n';
    }
    return ok;
}

int cmd_merton(const Options& o) {
    RunConfig c = load(o);
    std::ofstream file;
    std::ostream& os = sink(o, "merton.csv", file);
    os << "rho,merton_constrained,merton_unconstrained,u_L,u_I\n" << std::setprecision(10);
    for (double rho : c.sweep_rho) {
        MarketParams m = c.market;
        m.rho = rho;
        m.validate();
        const auto f = merton_fractions(m);
        os << rho << ',' << merton_value(m, true) << ',' << merton_value(m, false) << ',' << f.u_L << ','
           << f.u_I << '\n';
    }
    return ok;
}

int cmd_solve(const Options& o) {
    RunConfig c = load(o);
    apply_point(o, c);
    const std::string dir = o.out_dir.empty() ? "solution" : o.out_dir;
    IterationConfig it = c.iteration;
    it.log = &std::cerr;
    const Solution s = iterate(c.market, c.solver, it);
    save_solution(dir, s);
    {
        std::ofstream cfg(fs::path(dir) / "config.cfg");
        write_config(cfg, c);
    }
    log_line({{"event", "solve"},
              {"dir", dir},
              {"V_at_1", interp1(s.v_radial, 1.0)},
              {"alpha_frac_at_1", s.alloc.a_at(1.0)},
              {"iterations", s.report.iterations},
              {"converged", s.report.converged}});
    require_converged(s);
    return ok;
}

int cmd_sweep(const Options& o) {
    const RunConfig c = load(o);
    struct Point {
        double rho, lambda;
        double v1 = 0.0, alpha = 0.0;
        bool converged = false;
    };
    std::vector<Point> pts;
    for (double rho : c.sweep_rho)
        for (double lam : c.sweep_lambda) pts.push_back({rho, lam});

    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    std::vector<std::exception_ptr> errors(pts.size());
    auto worker = [&] {
        for (std::size_t i = next++; i < pts.size(); i = next++) {
            try {
                MarketParams m = c.market;
                m.rho = pts[i].rho;
                m.lambda = pts[i].lambda;
                const Solution s = iterate(m, c.solver, c.iteration);
                pts[i].v1 = interp1(s.v_radial, 1.0);
                pts[i].alpha = s.alloc.a_at(1.0);
                pts[i].converged = s.report.converged;
                std::lock_guard lock(log_mutex);
                log_line({{"event", "sweep_point"},
                          {"rho", m.rho},
                          {"lambda", m.lambda},
                          {"V_at_1", pts[i].v1},
                          {"iterations", s.report.iterations},
                          {"converged", s.report.converged}});
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int workers = std::max(1, std::min<int>(c.mc.workers, int(pts.size())));
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::ofstream file;
    std::ostream& os = sink(o, "sweep.csv", file);
    os << "rho,lambda,V_at_1,alpha_frac_at_1,merton_constrained,merton_unconstrained\n" << std::setprecision(10);
    bool all_converged = true;
    for (const auto& pt : pts) {
        MarketParams m = c.market;
        m.rho = pt.rho;
        m.lambda = pt.lambda;
        os << pt.rho << ',' << pt.lambda << ',' << pt.v1 << ',' << pt.alpha << ',' << merton_value(m, true)
           << ',' << merton_value(m, false) << '\n';
        all_converged = all_converged && pt.converged;
    }
    if (!all_converged) {
        log_line({{"event", "sweep"}, {"error", "some points did not converge"}});
        return solver_failure;
    }
    return ok;
}

int cmd_mc(const Options& o) {
    RunConfig c = load(o);
    apply_point(o, c);
    Solution s;
    if (o.solution_dir.empty()) {
        IterationConfig it = c.iteration;
        it.log = &std::cerr;
        s = iterate(c.market, c.solver, it);
        require_converged(s);
    } else {
        s = load_solution(o.solution_dir, c.market);
    }
    const FeedbackPolicy policy = FeedbackPolicy::from(extract_policy(s, c.market));
    const McEstimate e = simulate_policy(c.market, policy, c.r0, c.mc);
    const DppResult dpp = dpp_check(c.market, s, policy, c.r0, c.mc);

    std::ofstream file;
    std::ostream& os = sink(o, "mc.csv", file);
    write_csv_header(os);
    write_csv_row(os, policy.id, c.r0, e, c.mc.seed);
    log_line({{"event", "mc"},
              {"V_at_r0", dpp.value},
              {"mean", e.mean},
              {"stderr", e.std_error},
              {"tail_upper", e.tail_upper},
              {"clipped_fraction", e.clipped_fraction},
              {"dpp_discrepancy", dpp.discrepancy},
              {"dpp_stderr", dpp.std_error}});
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Investment and consumption with an asset traded at Poisson times"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "key = value config file")->check(CLI::ExistingFile);
        sub->add_option("--out-dir", o.out_dir, "directory for output files");
        sub->add_option("--rho", o.rho, "correlation, comma list for sweeps");
        sub->add_option("--lambda", o.lambda, "trading intensity, comma list for sweeps");
        sub->add_option("--seed", o.seed, "Monte-Carlo seed");
        sub->add_option("--workers", o.workers, "worker threads");
        sub->add_option("--tol", o.tol, "relative stopping tolerance of the outer iteration");
    };
    auto* validate = app.add_subcommand("validate", "check a config and print derived constants");
    auto* merton = app.add_subcommand("merton", "Merton coefficients over the rho list");
    auto* solve = app.add_subcommand("solve", "solve one (rho, lambda) point and save the fields");
    auto* sweep = app.add_subcommand("sweep", "V(1) and allocation over the rho x lambda lists");
    auto* mc = app.add_subcommand("mc", "Monte-Carlo check of the solved policy");
    for (auto* sub : {validate, merton, solve, sweep, mc}) common(sub);
    mc->add_option("--solution", o.solution_dir, "directory written by solve; solves afresh when omitted");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    try {
        if (*validate) return cmd_validate(o);
        if (*merton) return cmd_merton(o);
        if (*solve) return cmd_solve(o);
        if (*sweep) return cmd_sweep(o);
        if (*mc) return cmd_mc(o);
    } catch (const ConfigError& e) {
        log_line({{"event", "error"}, {"kind", "config"}, {"message", e.what()}});
        return config_error;
    } catch (const InvalidParameter& e) {
        log_line({{"event", "error"}, {"kind", "config"}, {"message", e.what()}});
        return config_error;
    } catch (const WellPosednessViolated& e) {
        log_line({{"event", "error"}, {"kind", "well_posedness"}, {"message", e.what()}});
        return ill_posed;
    } catch (const std::exception& e) {
        log_line({{"event", "error"}, {"kind", "solver"}, {"message", e.what()}});
        return solver_failure;
    }
    return ok;
}
