#include "illiquid/config.hpp"

#include "illiquid/errors.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace illiquid {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto res = std::from_chars(v.data(), end, out);
    if (res.ec != std::errc() || res.ptr != end) throw ConfigError(key + ": not a number: '" + v + "'");
    return out;
}

long to_long(const std::string& key, const std::string& v) {
    long out = 0;
    const auto* end = v.data() + v.size();
    const auto res = std::from_chars(v.data(), end, out);
    if (res.ec != std::errc() || res.ptr != end) throw ConfigError(key + ": not an integer: '" + v + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

struct Key {
    std::string name;
    bool required;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string fmt_list(const std::vector<double>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + fmt(xs[i]);
    return s;
}

#define REAL(NAME, REQ, FIELD)                                                             \
    Key {                                                                                  \
        NAME, REQ, [](RunConfig& c, const std::string& v) { c.FIELD = to_double(NAME, v); }, \
            [](const RunConfig& c) { return fmt(c.FIELD); }                                \
    }
#define INT(NAME, FIELD, TYPE)                                                                \
    Key {                                                                                     \
        NAME, false, [](RunConfig& c, const std::string& v) { c.FIELD = TYPE(to_long(NAME, v)); }, \
            [](const RunConfig& c) { return std::to_string(c.FIELD); }                        \
    }
#define BOOL(NAME, FIELD)                                                                 \
    Key {                                                                                 \
        NAME, false, [](RunConfig& c, const std::string& v) { c.FIELD = to_bool(NAME, v); }, \
            [](const RunConfig& c) { return std::string(c.FIELD ? "true" : "false"); }    \
    }

const std::vector<Key>& keys() {
    static const std::vector<Key> table = {
        REAL("market.b_L", true, market.b_L),
        REAL("market.sigma_L", true, market.sigma_L),
        REAL("market.b_I", true, market.b_I),
        REAL("market.sigma_I", true, market.sigma_I),
        REAL("market.rho", true, market.rho),
        REAL("market.lambda", true, market.lambda),
        REAL("market.beta", true, market.beta),
        REAL("market.p", true, market.p),
        REAL("market.u_scale", true, market.u_scale),

        REAL("grid.x_max", false, solver.grid.x_max),
        REAL("grid.y_max", false, solver.grid.y_max),
        INT("grid.n_x", solver.grid.n_x, int),
        INT("grid.n_y", solver.grid.n_y, int),
        INT("grid.n_t", solver.grid.n_t, int),
        REAL("grid.t_max", false, solver.grid.t_max),
        INT("grid.radial_refine", iteration.radial_refine, int),

        REAL("solver.tol_rel", false, iteration.tol_rel),
        INT("solver.n_max", iteration.n_max, int),
        Key{"solver.horizon", false,
            [](RunConfig& c, const std::string& v) {
                const double h = to_double("solver.horizon", v);
                if (h > 0.0)
                    c.iteration.horizon = h;
                else
                    c.iteration.horizon.reset();
            },
            [](const RunConfig& c) { return fmt(c.iteration.horizon.value_or(0.0)); }},
        REAL("solver.horizon_tol", false, iteration.horizon_tol),
        REAL("solver.c_max", false, solver.c_max),
        REAL("solver.pi_max", false, solver.pi_max),
        INT("solver.n_c", solver.n_c, int),
        INT("solver.n_pi", solver.n_pi, int),
        Key{"solver.search", false,
            [](RunConfig& c, const std::string& v) {
                if (v == "exact")
                    c.solver.search = ControlSearch::exact;
                else if (v == "grid")
                    c.solver.search = ControlSearch::grid;
                else
                    throw ConfigError("solver.search: expected exact or grid, got '" + v + "'");
            },
            [](const RunConfig& c) {
                return std::string(c.solver.search == ControlSearch::exact ? "exact" : "grid");
            }},
        BOOL("solver.central_weighting", solver.central_weighting),
        BOOL("solver.power_fitted", solver.power_fitted),
        Key{"solver.interpolation", false,
            [](RunConfig& c, const std::string& v) {
                if (v == "linear")
                    c.solver.interpolation = Interpolation::linear;
                else if (v == "homogeneous")
                    c.solver.interpolation = Interpolation::homogeneous;
                else
                    throw ConfigError("solver.interpolation: expected linear or homogeneous, got '" + v +
                                      "'");
            },
            [](const RunConfig& c) {
                return std::string(c.solver.interpolation == Interpolation::linear ? "linear"
                                                                                   : "homogeneous");
            }},
        REAL("solver.cfl_safety", false, solver.cfl_safety),
        INT("solver.max_substeps", solver.max_substeps, long),
        INT("solver.quadrature_order", solver.quadrature_order, int),

        INT("mc.n_paths", mc.n_paths, long),
        REAL("mc.horizon", false, mc.horizon),
        REAL("mc.dt", false, mc.dt),
        Key{"mc.seed", false,
            [](RunConfig& c, const std::string& v) {
                std::uint64_t s = 0;
                const auto* end = v.data() + v.size();
                const auto res = std::from_chars(v.data(), end, s);
                if (res.ec != std::errc() || res.ptr != end)
                    throw ConfigError("mc.seed: not an unsigned integer: '" + v + "'");
                c.mc.seed = s;
            },
            [](const RunConfig& c) { return std::to_string(c.mc.seed); }},
        BOOL("mc.antithetic", mc.antithetic),
        INT("mc.workers", mc.workers, int),
        REAL("mc.r0", false, r0),

        Key{"sweep.rho", false,
            [](RunConfig& c, const std::string& v) { c.sweep_rho = parse_list(v); },
            [](const RunConfig& c) { return fmt_list(c.sweep_rho); }},
        Key{"sweep.lambda", false,
            [](RunConfig& c, const std::string& v) { c.sweep_lambda = parse_list(v); },
            [](const RunConfig& c) { return fmt_list(c.sweep_lambda); }},
    };
    return table;
}

#undef REAL
#undef INT
#undef BOOL

}  // namespace

RunConfig RunConfig::defaults() {
    RunConfig c;
    GridSpec& g = c.solver.grid;
    g.x_max = 2.0;
    g.y_max = 2.0;
    g.n_x = 20;
    g.n_y = 20;
    g.n_t = 20;
    g.t_max = 100.0;
    g.r_max = g.x_max + g.y_max;
    g.n_r = g.n_x + g.n_y;
    c.iteration.tol_rel = 1e-3;
    c.iteration.n_max = 5000;
    return c;
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& k : keys()) out.push_back(k.name);
        return out;
    }();
    return names;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError("empty entry in list '" + text + "'");
        out.push_back(to_double("list", item));
    }
    if (out.empty()) throw ConfigError("empty list");
    return out;
}

RunConfig parse_config(std::istream& is, const std::string& origin) {
    std::map<std::string, const Key*> by_name;
    for (const auto& k : keys()) by_name[k.name] = &k;

    RunConfig c = RunConfig::defaults();
    std::set<std::string> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        const std::string where = origin + ":" + std::to_string(line_no) + ": ";
        if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        const auto it = by_name.find(key);
        if (it == by_name.end()) throw ConfigError(where + "unknown key '" + key + "'");
        if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
        try {
            it->second->set(c, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }

    std::string missing;
    for (const auto& k : keys())
        if (k.required && !seen.count(k.name)) missing += (missing.empty() ? "" : ", ") + k.name;
    if (!missing.empty()) throw ConfigError(origin + ": missing keys: " + missing);

    GridSpec& g = c.solver.grid;
    g.r_max = g.x_max + g.y_max;
    g.n_r = (g.n_x + g.n_y) * std::max(c.iteration.radial_refine, 1);
    try {
        c.market.validate();
        c.solver.validate();
        c.iteration.validate();
        c.mc.validate();
    } catch (const InvalidParameter& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    if (c.iteration.radial_refine < 1) throw ConfigError(origin + ": grid.radial_refine must be >= 1");
    if (!(c.r0 >= 0.0)) throw ConfigError(origin + ": mc.r0 must be nonnegative");
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_config(in, path);
}

void write_config(std::ostream& os, const RunConfig& c) {
    std::string section;
    for (const auto& k : keys()) {
        const std::string s = k.name.substr(0, k.name.find('.'));
        if (s != section) {
            if (!section.empty()) os << '\n';
            section = s;
        }
        os << k.name << " = " << k.get(c) << '\n';
    }
}

}  // namespace illiquid
