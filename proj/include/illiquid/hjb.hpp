#pragma once

#include "illiquid/gop.hpp"
#include "illiquid/lattice.hpp"
#include "illiquid/model.hpp"

#include <memory>
#include <string>
#include <vector>

namespace illiquid {

/// How the per-node supremum over (c, pi) is taken.
enum class ControlSearch {
    exact,  // closed-form maximum of the discretised Hamiltonian on each sign branch
    grid,   // brute-force scan of the n_c x n_pi control lattice
};

struct SolverConfig {
    GridSpec grid;
    double c_max = 0.0;   // consumption cap; <= 0 selects the default 3 (beta + lambda) x_max
    double pi_max = 0.0;  // liquid position cap; <= 0 selects the default 3 x_max
    int n_c = 41;
    int n_pi = 81;
    ControlSearch search = ControlSearch::exact;
    /// Use central differences for first derivatives at nodes and controls
    /// where the scheme stays monotone (exact search only).
    bool central_weighting = true;
    /// Scale the x-difference quotients so they are exact on a two-term
    /// power profile in x and x + y (see solve_stage).
    bool power_fitted = true;
    /// How V^n is read between radial nodes (x = 0 boundary here; the driver
    /// also uses it for G and H).
    Interpolation interpolation = Interpolation::homogeneous;
    double cfl_safety = 0.9;
    long max_substeps = 2'000'000;  // per time layer
    int quadrature_order = 32;
    /// Terminal condition at t = T; zero when null. Its last layer is used and
    /// must share the (x, y) grid of `grid`.
    std::shared_ptr<const ValueField> terminal;
    /// Keep the maximising controls at every layer.
    bool record_policy = false;

    void validate() const;
    double resolved_c_max(const MarketParams& m) const;
    double resolved_pi_max() const;
};

/// Jet arguments of the Hamiltonian: first derivatives q and second
/// derivatives Q of v in (x, y).
struct HamiltonianArgs {
    double y = 0.0;
    double q1 = 0.0;
    double q2 = 0.0;
    double Q11 = 0.0;
    double Q12 = 0.0;
    double Q22 = 0.0;
};

struct HamiltonianValue {
    double value;
    double c_star;
    double pi_star;
};

/// Closed-form sup over c >= 0, pi in R of the controlled generator plus
/// utility. Throws DegenerateJet unless q1 > 0 and Q11 < 0.
HamiltonianValue hamiltonian_closed(const HamiltonianArgs& args, const MarketParams& m,
                                    const UtilityPower& u);

/// lambda int_t^T e^{-(beta+lambda)(s-t)} E[vn(Y_s J'_s)] ds plus the
/// discounted terminal term, by composite Simpson in s and Gauss-Hermite in
/// the single lognormal Y_s J'_s.
double boundary_x0(const RadialField& vn, const MarketParams& m, const SolverConfig& cfg, double t,
                   double y);

/// The same boundary values on every (layer, y-node), built backward one
/// layer at a time from the Markov property of Y. Row k holds layer k.
std::vector<std::vector<double>> boundary_x0_layers(const RadialField& vn, const MarketParams& m,
                                                    const SolverConfig& cfg);

struct StageDiagnostics {
    long substeps_per_layer = 0;
    double dt_sub = 0.0;
    double max_update = 0.0;     // largest |change| of a node over one layer
    double boundary_max = 0.0;   // largest x = 0 boundary value
    double clamp_hits = 0.0;     // outer-boundary nodes capped by the envelope, last layer
    double seconds = 0.0;

    std::string to_json_line(int stage) const;
};

struct StageResult {
    ValueField value;
    ValueField c_star;   // only with record_policy
    ValueField pi_star;  // only with record_policy
    StageDiagnostics diag;
};

/// Solves one finite-horizon HJB stage backward from T with the explicit
/// monotone scheme. `source` holds lambda G[V^n] on cfg.grid.
StageResult solve_stage(const ValueField& source, const RadialField& vn, const MarketParams& m,
                        const SolverConfig& cfg);

}  // namespace illiquid
