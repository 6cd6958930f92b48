#include "illiquid/config.hpp"
#include "illiquid/driver.hpp"
#include "illiquid/errors.hpp"
#include "illiquid/mc.hpp"
#include "illiquid/model.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <limits>
#include <memory>
#include <sstream>

namespace py = pybind11;
using namespace illiquid;

namespace {

py::array_t<double> to_array(std::span<const double> xs) {
    py::array_t<double> out(static_cast<py::ssize_t>(xs.size()));
    std::copy(xs.begin(), xs.end(), out.mutable_data());
    return out;
}

py::array_t<double> layer_array(const ValueField& f, int k) {
    const LayerView v = f.view(k);
    py::array_t<double> out({v.n_x + 1, v.n_y + 1});
    auto w = out.mutable_unchecked<2>();
    for (int i = 0; i <= v.n_x; ++i)
        for (int j = 0; j <= v.n_y; ++j) w(i, j) = v.at(i, j);
    return out;
}

py::array_t<double> radial_nodes(const RadialField& f) {
    py::array_t<double> out(f.n_r() + 1);
    for (int i = 0; i <= f.n_r(); ++i) out.mutable_data()[i] = f.r(i);
    return out;
}

py::dict estimate_dict(const McEstimate& e) {
    py::dict d;
    d["mean"] = e.mean;
    d["std_error"] = e.std_error;
    d["n_paths"] = e.n_paths;
    d["tail_upper"] = e.tail_upper;
    d["clipped_fraction"] = e.clipped_fraction;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
    mod.doc() = "Consumption and investment with an asset traded at Poisson times";

    static py::exception<Error> base(mod, "IlliquidError", PyExc_RuntimeError);
    py::register_exception<InvalidParameter>(mod, "InvalidParameter", base.ptr());
    py::register_exception<WellPosednessViolated>(mod, "WellPosednessViolated", base.ptr());
    py::register_exception<ConfigError>(mod, "ConfigError", base.ptr());
    py::register_exception<NoConvergence>(mod, "NoConvergence", base.ptr());
    py::register_exception<InadmissiblePolicy>(mod, "InadmissiblePolicy", base.ptr());
    py::register_exception<FormatError>(mod, "FormatError", base.ptr());

    py::class_<MarketParams>(mod, "MarketParams")
        .def(py::init<>())
        .def(py::init([](py::kwargs kw) {
            MarketParams m;
            py::object self = py::cast(&m, py::return_value_policy::reference);
            for (auto item : kw) py::setattr(self, item.first, item.second);
            return m;
        }))
        .def_readwrite("b_L", &MarketParams::b_L)
        .def_readwrite("sigma_L", &MarketParams::sigma_L)
        .def_readwrite("b_I", &MarketParams::b_I)
        .def_readwrite("sigma_I", &MarketParams::sigma_I)
        .def_readwrite("rho", &MarketParams::rho)
        .def_readwrite("lambda_", &MarketParams::lambda)
        .def_readwrite("beta", &MarketParams::beta)
        .def_readwrite("p", &MarketParams::p)
        .def_readwrite("u_scale", &MarketParams::u_scale)
        .def("validate", &MarketParams::validate)
        .def("__repr__", [](const MarketParams& m) {
            return "MarketParams(b_L=" + std::to_string(m.b_L) + ", sigma_L=" + std::to_string(m.sigma_L) +
                   ", b_I=" + std::to_string(m.b_I) + ", sigma_I=" + std::to_string(m.sigma_I) +
                   ", rho=" + std::to_string(m.rho) + ", lambda_=" + std::to_string(m.lambda) +
                   ", beta=" + std::to_string(m.beta) + ", p=" + std::to_string(m.p) +
                   ", u_scale=" + std::to_string(m.u_scale) + ")";
        });

    py::class_<DerivedConstants>(mod, "DerivedConstants")
        .def_readonly("k_tilde_p", &DerivedConstants::k_tilde_p)
        .def_readonly("k_p", &DerivedConstants::k_p)
        .def_readonly("margin", &DerivedConstants::margin)
        .def_readonly("delta", &DerivedConstants::delta)
        .def_readonly("drift_J", &DerivedConstants::drift_J)
        .def_readonly("vol_J", &DerivedConstants::vol_J)
        .def_readonly("drift_Y", &DerivedConstants::drift_Y)
        .def_readonly("vol_Y", &DerivedConstants::vol_Y);

    mod.def("derive_constants", &derive_constants, py::arg("market"));
    mod.def("merton_value", py::overload_cast<const MarketParams&, bool>(&merton_value), py::arg("market"),
            py::arg("constrained") = true);
    mod.def(
        "merton_fractions",
        [](const MarketParams& m) {
            const auto f = merton_fractions(m);
            return py::make_tuple(f.u_L, f.u_I);
        },
        py::arg("market"), "(u_L, u_I) fractions of the constrained Merton portfolio");
    mod.def("choose_horizon", &choose_horizon, py::arg("market"), py::arg("tol_rel"),
            py::arg("t_cap") = std::numeric_limits<double>::infinity());

    py::class_<RunConfig>(mod, "RunConfig")
        .def_static("defaults", &RunConfig::defaults)
        .def_static("load", &load_config, py::arg("path"))
        .def_static(
            "parse",
            [](const std::string& text) {
                std::istringstream is(text);
                return parse_config(is, "<string>");
            },
            py::arg("text"))
        .def_readwrite("market", &RunConfig::market)
        .def_readwrite("r0", &RunConfig::r0)
        .def_readwrite("sweep_rho", &RunConfig::sweep_rho)
        .def_readwrite("sweep_lambda", &RunConfig::sweep_lambda)
        .def_property(
            "grid_size",
            [](const RunConfig& c) { return py::make_tuple(c.solver.grid.n_x, c.solver.grid.n_y); },
            [](RunConfig& c, std::pair<int, int> n) {
                c.solver.grid.n_x = n.first;
                c.solver.grid.n_y = n.second;
                c.solver.grid.n_r = (n.first + n.second) * std::max(c.iteration.radial_refine, 1);
            })
        .def_property(
            "box",
            [](const RunConfig& c) { return py::make_tuple(c.solver.grid.x_max, c.solver.grid.y_max); },
            [](RunConfig& c, std::pair<double, double> b) {
                c.solver.grid.x_max = b.first;
                c.solver.grid.y_max = b.second;
                c.solver.grid.r_max = b.first + b.second;
            })
        .def_property(
            "tol_rel", [](const RunConfig& c) { return c.iteration.tol_rel; },
            [](RunConfig& c, double t) { c.iteration.tol_rel = t; })
        .def_property(
            "n_max", [](const RunConfig& c) { return c.iteration.n_max; },
            [](RunConfig& c, int n) { c.iteration.n_max = n; })
        .def_property(
            "n_paths", [](const RunConfig& c) { return c.mc.n_paths; },
            [](RunConfig& c, long n) { c.mc.n_paths = n; })
        .def_property(
            "mc_horizon", [](const RunConfig& c) { return c.mc.horizon; },
            [](RunConfig& c, double h) { c.mc.horizon = h; })
        .def_property(
            "mc_dt", [](const RunConfig& c) { return c.mc.dt; }, [](RunConfig& c, double h) { c.mc.dt = h; })
        .def_property(
            "seed", [](const RunConfig& c) { return c.mc.seed; },
            [](RunConfig& c, std::uint64_t s) { c.mc.seed = s; })
        .def_property(
            "workers", [](const RunConfig& c) { return c.mc.workers; },
            [](RunConfig& c, int w) { c.mc.workers = w; })
        .def("to_text", [](const RunConfig& c) {
            std::ostringstream os;
            write_config(os, c);
            return os.str();
        });

    py::class_<Solution, std::shared_ptr<Solution>>(mod, "Solution")
        .def_property_readonly("market", [](const Solution& s) { return s.params; })
        .def("value", [](const Solution& s, double r) { return interp1(s.v_radial, r); }, py::arg("r"))
        .def("allocation", [](const Solution& s, double r) { return s.alloc.a_at(r); }, py::arg("r"))
        .def_property_readonly("r", [](const Solution& s) { return radial_nodes(s.v_radial); })
        .def_property_readonly("v", [](const Solution& s) { return to_array(s.v_radial.values()); })
        .def_property_readonly("a_star", [](const Solution& s) { return to_array(s.alloc.a_star); })
        .def(
            "vhat", [](const Solution& s, int k) { return layer_array(s.vhat, k); }, py::arg("layer") = 0,
            "V-hat on the (x, y) lattice at time layer k")
        .def_property_readonly("iterations", [](const Solution& s) { return s.report.iterations; })
        .def_property_readonly("converged", [](const Solution& s) { return s.report.converged; })
        .def_property_readonly("delta", [](const Solution& s) { return s.report.delta; })
        .def_property_readonly("horizon", [](const Solution& s) { return s.report.horizon; })
        .def_property_readonly("increments", [](const Solution& s) { return s.report.increments; })
        .def_property_readonly("ratios", [](const Solution& s) { return s.report.ratios; })
        .def("save", [](const Solution& s, const std::string& dir) { save_solution(dir, s); }, py::arg("dir"));

    mod.def(
        "solve",
        [](const RunConfig& c) {
            auto out = std::make_shared<Solution>();
            {
                py::gil_scoped_release release;
                *out = iterate(c.market, c.solver, c.iteration);
            }
            return out;
        },
        py::arg("config"), "Runs the outer fixed point for config.market");

    mod.def(
        "simulate",
        [](const RunConfig& c, const Solution& s) {
            McEstimate e;
            DppResult dpp;
            {
                py::gil_scoped_release release;
                const FeedbackPolicy policy = FeedbackPolicy::from(extract_policy(s, c.market));
                e = simulate_policy(c.market, policy, c.r0, c.mc);
                dpp = dpp_check(c.market, s, policy, c.r0, c.mc);
            }
            py::dict d = estimate_dict(e);
            d["value"] = dpp.value;
            d["dpp_discrepancy"] = dpp.discrepancy;
            d["dpp_std_error"] = dpp.std_error;
            return d;
        },
        py::arg("config"), py::arg("solution"),
        "Monte-Carlo value of the solution's feedback policy from config.r0, with the one-trade check");
}
