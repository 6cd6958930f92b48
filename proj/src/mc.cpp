#include "illiquid/mc.hpp"

#include "illiquid/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <thread>

namespace illiquid {

void PathConfig::validate() const {
    if (n_paths < 1) throw InvalidParameter("n_paths must be >= 1");
    if (!(dt > 0.0)) throw InvalidParameter("dt must be positive");
    if (!(horizon > 0.0)) throw InvalidParameter("horizon must be positive");
    if (workers < 1) throw InvalidParameter("workers must be >= 1");
}

FeedbackPolicy FeedbackPolicy::from(const PolicyBundle& b, std::string id) {
    auto shared = std::make_shared<PolicyBundle>(b);
    FeedbackPolicy f;
    f.id = std::move(id);
    f.consumption = [shared](double t, double x, double y) { return shared->consumption(t, x, y); };
    f.position = [shared](double t, double x, double y) { return shared->position(t, x, y); };
    f.allocation = [shared](double r) { return shared->allocation(r); };
    return f;
}

FeedbackPolicy FeedbackPolicy::zero() {
    FeedbackPolicy f;
    f.id = "zero";
    f.consumption = [](double, double, double) { return 0.0; };
    f.position = [](double, double, double) { return 0.0; };
    f.allocation = [](double) { return 0.0; };
    return f;
}

namespace {

/// Random stream of one path; antithetic partners share a seed and flip
/// the sign of every normal draw.
class PathRng {
public:
    PathRng(std::uint64_t seed, long path, bool antithetic) {
        const std::uint64_t stream = antithetic ? std::uint64_t(path / 2) : std::uint64_t(path);
        std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream),
                          std::uint32_t(stream >> 32)};
        gen_.seed(seq);
        flip_ = antithetic && (path % 2 == 1);
    }

    double normal() {
        const double z = normal_(gen_);
        return flip_ ? -z : z;
    }
    double exponential(double rate) {
        const double u = uniform_(gen_);
        return -std::log1p(-(flip_ ? 1.0 - u : u)) / rate;
    }

private:
    std::mt19937_64 gen_;
    std::normal_distribution<double> normal_;
    std::uniform_real_distribution<double> uniform_;
    bool flip_ = false;
};

struct PathOutcome {
    double value = 0.0;
    long steps = 0;
    long clipped = 0;
};

struct Dynamics {
    const MarketParams& m;
    DerivedConstants d;
    UtilityPower u;

    explicit Dynamics(const MarketParams& mp) : m(mp), d(derive_constants(mp)), u(mp) {}

    /// e^{-beta t} times the integral of e^{-beta s} over [0, h]
    double discount_weight(double t, double h) const {
        return std::exp(-m.beta * t) * (m.beta > 0.0 ? -std::expm1(-m.beta * h) / m.beta : h);
    }
};

/// Runs one path until `stop(t)` or the first trade when `first_trade_only`.
/// Returns the discounted utility; wealth at the stopping point in r_end.
PathOutcome run_path(const Dynamics& dyn, const FeedbackPolicy& pol, double r0, const PathConfig& cfg,
                     PathRng& rng, bool first_trade_only, double& r_end, double& t_end) {
    const auto& m = dyn.m;
    const auto& d = dyn.d;
    PathOutcome out;
    double a0 = std::clamp(pol.allocation(r0), 0.0, r0);
    double x = r0 - a0;
    double y = a0;
    double j = 1.0;
    double since = 0.0;
    double t = 0.0;
    double next_trade = rng.exponential(m.lambda);
    const double drift_l = m.b_L - 0.5 * m.sigma_L * m.sigma_L;
    const double drift_y = d.drift_Y - 0.5 * d.vol_Y * d.vol_Y;
    const double drift_j = d.drift_J - 0.5 * d.vol_J * d.vol_J;

    while (t < cfg.horizon) {
        const double h = std::min({cfg.dt, next_trade - t, cfg.horizon - t});
        const double sq = std::sqrt(h);
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        double c = std::max(pol.consumption(since, x, y), 0.0);
        double pi = x > 0.0 ? pol.position(since, x, y) : 0.0;
        const double gross = std::exp(drift_l * h + m.sigma_L * sq * z1) - 1.0;
        double invested = x + pi * gross;
        bool clipped = false;
        if (invested < 0.0) {
            invested = 0.0;
            clipped = true;
        }
        if (c * h > invested) {
            c = invested / h;
            clipped = true;
        }
        out.value += dyn.discount_weight(t, h) * dyn.u(c);
        x = std::max(invested - c * h, 0.0);
        y *= std::exp(drift_y * h + d.vol_Y * sq * z1);
        j *= std::exp(drift_j * h + d.vol_J * sq * z2);
        t += h;
        since += h;
        ++out.steps;
        out.clipped += clipped;

        if (t >= next_trade) {
            const double r = x + y * j;
            if (first_trade_only) {
                r_end = r;
                t_end = t;
                return out;
            }
            const double a = std::clamp(pol.allocation(r), 0.0, r);
            x = r - a;
            y = a;
            j = 1.0;
            since = 0.0;
            next_trade = t + rng.exponential(m.lambda);
        }
    }
    r_end = x + y * j;
    t_end = t;
    return out;
}

/// Calls body(path) for every path, split over the worker threads.
template <class F>
void for_paths(const PathConfig& cfg, F&& body) {
    const int workers = int(std::min<long>(cfg.workers, cfg.n_paths));
    if (workers <= 1) {
        for (long p = 0; p < cfg.n_paths; ++p) body(p);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (long p = w; p < cfg.n_paths; p += workers) body(p);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

struct Moments {
    double mean;
    double std_error;
};

Moments moments(const std::vector<double>& v, bool antithetic) {
    // antithetic pairs are averaged first so the error estimate sees independent samples
    std::vector<double> s;
    if (antithetic && v.size() >= 2) {
        for (std::size_t i = 0; i + 1 < v.size(); i += 2) s.push_back(0.5 * (v[i] + v[i + 1]));
        if (v.size() % 2) s.push_back(v.back());
    } else {
        s = v;
    }
    double sum = 0.0;
    for (double x : s) sum += x;
    const double mean = sum / double(s.size());
    double ss = 0.0;
    for (double x : s) ss += (x - mean) * (x - mean);
    const double var = s.size() > 1 ? ss / double(s.size() - 1) : 0.0;
    return {mean, std::sqrt(var / double(s.size()))};
}

}  // namespace

McEstimate simulate_policy(const MarketParams& m, const FeedbackPolicy& policy, double r0,
                           const PathConfig& cfg) {
    m.validate();
    cfg.validate();
    if (r0 < 0.0) throw InvalidParameter("initial wealth must be nonnegative");
    const Dynamics dyn(m);
    std::vector<double> values(cfg.n_paths);
    std::vector<long> steps(cfg.n_paths), clipped(cfg.n_paths);
    for_paths(cfg, [&](long p) {
        PathRng rng(cfg.seed, p, cfg.antithetic);
        double r_end, t_end;
        const auto o = run_path(dyn, policy, r0, cfg, rng, false, r_end, t_end);
        values[p] = o.value;
        steps[p] = o.steps;
        clipped[p] = o.clipped;
    });
    long total_steps = 0, total_clipped = 0;
    for (long p = 0; p < cfg.n_paths; ++p) {
        total_steps += steps[p];
        total_clipped += clipped[p];
    }
    McEstimate e;
    const auto mo = moments(values, cfg.antithetic);
    e.mean = mo.mean;
    e.std_error = mo.std_error;
    e.n_paths = cfg.n_paths;
    e.clipped_fraction = total_steps > 0 ? double(total_clipped) / double(total_steps) : 0.0;
    e.tail_upper = std::exp(-dyn.d.margin * cfg.horizon) * merton_value(m, true) * std::pow(r0, m.p);
    if (e.clipped_fraction > 0.01) throw InadmissiblePolicy(e.clipped_fraction);
    return e;
}

DppResult dpp_check(const MarketParams& m, const Solution& s, const FeedbackPolicy& policy, double r0,
                    const PathConfig& cfg) {
    m.validate();
    cfg.validate();
    DppResult res;
    res.value = interp1(s.v_radial, r0);
    if (r0 <= 0.0) return res;
    const Dynamics dyn(m);
    std::vector<double> values(cfg.n_paths);
    for_paths(cfg, [&](long p) {
        PathRng rng(cfg.seed, p, cfg.antithetic);
        double r_end = 0.0, t_end = 0.0;
        const auto o = run_path(dyn, policy, r0, cfg, rng, true, r_end, t_end);
        double v = o.value;
        if (t_end < cfg.horizon) v += std::exp(-m.beta * t_end) * interp1(s.v_radial, r_end);
        values[p] = v;
    });
    const auto mo = moments(values, cfg.antithetic);
    res.discrepancy = mo.mean - res.value;
    res.std_error = mo.std_error;
    return res;
}

DppResult dpp_check(const MarketParams& m, const Solution& s, double r0, const PathConfig& cfg) {
    return dpp_check(m, s, FeedbackPolicy::from(extract_policy(s, m)), r0, cfg);
}

std::vector<MomentCase> moment_check(const MarketParams& m, const PathConfig& cfg) {
    m.validate();
    cfg.validate();
    const auto d = derive_constants(m);
    const double k_l = liquid_growth(m);
    const double merton_liquid = m.b_L / ((1.0 - m.p) * m.sigma_L * m.sigma_L);
    const double thetas[] = {0.0, merton_liquid, 1.0};
    const double starts[][2] = {{1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
    const double horizons[] = {0.5, 1.0, 2.0};

    std::vector<MomentCase> out;
    for (double theta : thetas)
        for (const auto& st : starts)
            for (double s : horizons) {
                MomentCase mc{theta, st[0], st[1], s, 0.0, 0.0, 0.0, false};
                const double sq = std::sqrt(s);
                const double drift_x = (theta * m.b_L - 0.5 * theta * theta * m.sigma_L * m.sigma_L) * s;
                const double drift_y = (d.drift_Y - 0.5 * d.vol_Y * d.vol_Y) * s;
                std::vector<double> v(cfg.n_paths);
                for_paths(cfg, [&](long p) {
                    PathRng rng(cfg.seed, p, cfg.antithetic);
                    const double z = rng.normal();
                    const double x = mc.x0 * std::exp(drift_x + theta * m.sigma_L * sq * z);
                    const double y = mc.y0 * std::exp(drift_y + d.vol_Y * sq * z);
                    v[p] = std::pow(x + y, m.p);
                });
                const auto mo = moments(v, cfg.antithetic);
                mc.mean = mo.mean;
                mc.std_error = mo.std_error;
                mc.bound = std::exp(k_l * s) * std::pow(mc.x0 + mc.y0, m.p);
                mc.passed = mc.mean <= mc.bound + 3.0 * mc.std_error;
                out.push_back(mc);
            }
    return out;
}

void write_csv_header(std::ostream& os) { os << "policy_id,r0,mean,stderr,n_paths,seed\n"; }

void write_csv_row(std::ostream& os, const std::string& policy_id, double r0, const McEstimate& e,
                   std::uint64_t seed) {
    os << std::setprecision(12) << policy_id << ',' << r0 << ',' << e.mean << ',' << e.std_error << ','
       << e.n_paths << ',' << seed << '\n';
}

}  // namespace illiquid
