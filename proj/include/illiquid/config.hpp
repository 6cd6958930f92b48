#pragma once

#include "illiquid/driver.hpp"
#include "illiquid/mc.hpp"
#include "illiquid/model.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace illiquid {

/// Everything a run needs, read from a flat `key = value` file.
///
/// Sections: market.* (all nine keys required), grid.*, solver.*, mc.*,
/// sweep.*. Blank lines and lines starting with '#' are skipped. Unknown
/// keys, duplicate keys and malformed values raise ConfigError.
struct RunConfig {
    MarketParams market;
    SolverConfig solver;
    IterationConfig iteration;
    PathConfig mc;
    double r0 = 1.0;
    std::vector<double> sweep_rho{-0.8, -0.4, 0.0, 0.4, 0.8};
    std::vector<double> sweep_lambda{1.0, 5.0, 10.0, 50.0};

    /// Defaults of every optional key; market fields hold the reference set.
    static RunConfig defaults();
};

RunConfig parse_config(std::istream& is, const std::string& origin = "<config>");
RunConfig load_config(const std::string& path);

/// All recognised keys, in file order of a complete config.
const std::vector<std::string>& config_keys();

/// Writes a complete config that parses back to `c`.
void write_config(std::ostream& os, const RunConfig& c);

/// "1,5,10" -> {1, 5, 10}; throws ConfigError on junk.
std::vector<double> parse_list(const std::string& text);

}  // namespace illiquid
