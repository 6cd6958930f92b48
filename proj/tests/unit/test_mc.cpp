#include "illiquid/errors.hpp"
#include "illiquid/mc.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace illiquid;
using doctest::Approx;

namespace {

FeedbackPolicy proportional(double kappa) {
    FeedbackPolicy f = FeedbackPolicy::zero();
    f.id = "proportional";
    f.consumption = [kappa](double, double x, double) { return kappa * x; };
    return f;
}

}  // namespace

TEST_CASE("zero policy has zero value") {
    PathConfig cfg;
    cfg.n_paths = 200;
    cfg.horizon = 5.0;
    cfg.dt = 0.05;
    const auto e = simulate_policy(MarketParams{}, FeedbackPolicy::zero(), 1.0, cfg);
    CHECK(e.mean == 0.0);
    CHECK(e.std_error == 0.0);
    CHECK(e.clipped_fraction == 0.0);
}

TEST_CASE("deterministic proportional consumption") {
    PathConfig cfg;
    cfg.n_paths = 4;
    cfg.horizon = 80.0;
    cfg.dt = 0.001;
    const auto e = simulate_policy(MarketParams{}, proportional(0.2), 1.0, cfg);
    const double exact = std::sqrt(0.2) / 0.3;
    CHECK(e.mean == Approx(exact).epsilon(1e-3));
    CHECK(e.std_error < 1e-8);  // paths differ only in where jumps split the steps
    CHECK(exact == Approx(1.4907).epsilon(1e-4));
}

TEST_CASE("results do not depend on the worker count") {
    PathConfig cfg;
    cfg.n_paths = 300;
    cfg.horizon = 3.0;
    cfg.dt = 0.02;
    FeedbackPolicy f = proportional(0.5);
    f.position = [](double, double x, double) { return 0.3 * x; };
    f.allocation = [](double r) { return 0.4 * r; };
    const auto one = simulate_policy(MarketParams{}, f, 1.0, cfg);
    cfg.workers = 4;
    const auto four = simulate_policy(MarketParams{}, f, 1.0, cfg);
    CHECK(one.mean == four.mean);
    CHECK(one.std_error == four.std_error);
    cfg.seed += 1;
    CHECK(simulate_policy(MarketParams{}, f, 1.0, cfg).mean != one.mean);
    cfg.antithetic = true;
    const auto anti = simulate_policy(MarketParams{}, f, 1.0, cfg);
    CHECK(anti.mean == Approx(one.mean).epsilon(0.05));
}

TEST_CASE("tail bracket") {
    PathConfig cfg;
    cfg.n_paths = 10;
    cfg.horizon = 10.0;
    cfg.dt = 0.1;
    const MarketParams m;
    const auto e = simulate_policy(m, proportional(0.3), 2.0, cfg);
    CHECK(e.tail_upper == Approx(std::exp(-0.16875 * 10.0) * merton_value(m) * std::sqrt(2.0)));
}

TEST_CASE("overspending policies are flagged") {
    PathConfig cfg;
    cfg.n_paths = 50;
    cfg.horizon = 2.0;
    cfg.dt = 0.05;
    FeedbackPolicy greedy = FeedbackPolicy::zero();
    greedy.consumption = [](double, double, double) { return 100.0; };
    CHECK_THROWS_AS(simulate_policy(MarketParams{}, greedy, 1.0, cfg), InadmissiblePolicy);
    CHECK_THROWS_AS(simulate_policy(MarketParams{}, greedy, -1.0, cfg), InvalidParameter);
}

TEST_CASE("dynamic programming check on a small solve") {
    const MarketParams m;
    SolverConfig solver;
    solver.grid = GridSpec::with_radial_cover(100.0, 20, 2.0, 2.0, 10, 10);
    IterationConfig it;
    it.tol_rel = 1e-3;
    const Solution s = iterate(m, solver, it);
    PathConfig cfg;
    cfg.n_paths = 2000;
    cfg.dt = 0.02;
    cfg.horizon = 30.0;

    const auto at_zero = dpp_check(m, s, 0.0, cfg);
    CHECK(at_zero.discrepancy == 0.0);
    CHECK(at_zero.value == 0.0);

    const auto lazy = dpp_check(m, s, FeedbackPolicy::zero(), 1.0, cfg);
    CHECK(lazy.discrepancy <= 0.0);

    const auto best = dpp_check(m, s, 1.0, cfg);
    CHECK(std::abs(best.discrepancy) <= std::max(3.0 * best.std_error, 0.02 * best.value));
}

TEST_CASE("moment bound under proportional positions") {
    PathConfig cfg;
    cfg.n_paths = 20'000;
    for (double rho : {0.0, 0.6}) {
        MarketParams m;
        m.rho = rho;
        const auto cases = moment_check(m, cfg);
        CHECK(cases.size() == 27);
        for (const auto& c : cases) CHECK(c.passed);
    }
}

TEST_CASE("MC CSV layout") {
    std::stringstream ss;
    write_csv_header(ss);
    McEstimate e;
    e.mean = 1.5;
    e.std_error = 0.01;
    e.n_paths = 10;
    write_csv_row(ss, "solver", 1.0, e, 42);
    CHECK(ss.str() == "policy_id,r0,mean,stderr,n_paths,seed\nsolver,1,1.5,0.01,10,42\n");
}
