#include "illiquid/config.hpp"
#include "illiquid/errors.hpp"

#include <doctest.h>

#include <sstream>

using namespace illiquid;
using doctest::Approx;

namespace {

const char* kMarket =
    "market.b_L = 0.15\nmarket.sigma_L = 1\nmarket.b_I = 0.2\nmarket.sigma_I = 1\nmarket.rho = 0\n"
    "market.lambda = 1\nmarket.beta = 0.2\nmarket.p = 0.5\nmarket.u_scale = 1\n";

RunConfig parse(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

std::string error_of(const std::string& text) {
    try {
        parse(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("shipped default config") {
    const RunConfig c = load_config(ILLIQUID_DEFAULT_CONFIG);
    CHECK(c.market.beta == 0.2);
    CHECK(c.market.p == 0.5);
    CHECK(c.market.b_L == 0.15);
    CHECK(c.solver.grid.n_x == 20);
    CHECK(c.solver.grid.r_max == 4.0);
    CHECK(c.solver.grid.n_r == 40);
    CHECK(c.solver.interpolation == Interpolation::homogeneous);
    CHECK(c.sweep_lambda == std::vector<double>{1, 5, 10, 50});
    CHECK(c.sweep_rho.size() == 5);
    CHECK_FALSE(c.iteration.horizon.has_value());
}

TEST_CASE("write and parse round trip") {
    RunConfig c = parse(std::string(kMarket) + "grid.n_x = 12\nsolver.search = grid\nmc.seed = 77\nsolver.horizon = 2.5\n");
    CHECK(c.solver.grid.n_x == 12);
    CHECK(c.solver.search == ControlSearch::grid);
    CHECK(c.mc.seed == 77);
    CHECK(*c.iteration.horizon == 2.5);
    std::stringstream ss;
    write_config(ss, c);
    const RunConfig back = parse_config(ss);
    std::stringstream again;
    write_config(again, back);
    CHECK(ss.str() == again.str());
    for (const auto& k : config_keys()) CHECK(ss.str().find(k + " = ") != std::string::npos);
}

TEST_CASE("config errors") {
    CHECK(error_of("").find("missing keys: market.b_L") != std::string::npos);
    CHECK(error_of(std::string(kMarket) + "market.colour = 3\n").find("unknown key 'market.colour'") !=
          std::string::npos);
    CHECK(error_of(std::string(kMarket) + "market.p = 0.4\n").find("duplicate key") != std::string::npos);
    CHECK(error_of(std::string(kMarket) + "grid.n_x = ten\n").find("grid.n_x") != std::string::npos);
    CHECK(error_of(std::string(kMarket) + "mc.antithetic = maybe\n").find("mc.antithetic") != std::string::npos);
    CHECK(error_of(std::string(kMarket) + "just words\n").find(":10:") != std::string::npos);
    CHECK_FALSE(error_of(std::string(kMarket) + "grid.n_x = 1\n").empty());
    std::string bad_p = kMarket;
    bad_p.replace(bad_p.find("market.p = 0.5"), 14, "market.p = 1.5");
    CHECK_FALSE(error_of(bad_p).empty());
    CHECK_THROWS_AS(load_config("/nonexistent.cfg"), ConfigError);
}

TEST_CASE("comment lines and lists") {
    const RunConfig c = parse(std::string("# hello\n\n") + kMarket + "sweep.rho = -0.5, 0 ,0.5\n");
    CHECK(c.sweep_rho == std::vector<double>{-0.5, 0.0, 0.5});
    CHECK(parse_list("1,2.5") == std::vector<double>{1.0, 2.5});
    CHECK_THROWS_AS(parse_list("1,,2"), ConfigError);
    CHECK_THROWS_AS(parse_list(""), ConfigError);
    CHECK_THROWS_AS(parse_list("a"), ConfigError);
}
