#pragma once

#include "illiquid/hjb.hpp"
#include "illiquid/hop.hpp"

#include <algorithm>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace illiquid {

struct IterationConfig {
    double tol_rel = 1e-4;
    int n_max = 5000;
    /// Explicit stage horizon; when empty it is chosen from horizon_tol.
    std::optional<double> horizon;
    /// Target relative error of the horizon truncation; 0 means tol_rel.
    double horizon_tol = 0.0;
    /// Radial grid intervals per (x, y) grid step along the diagonal.
    int radial_refine = 1;
    /// Structured log lines, one per stage.
    std::ostream* log = nullptr;

    void validate() const;
};

struct SolveReport {
    std::vector<double> increments;  // sup-norm of V^{n+1} - V^n on the r-grid
    std::vector<double> ratios;      // increments[n] / increments[n-1]; ratios[0] is NaN
    std::vector<double> stage_seconds;
    std::vector<StageDiagnostics> stages;
    double delta = 0.0;
    double horizon = 0.0;
    double horizon_exponent = 0.0;  // beta + lambda - k_p
    double stop_threshold = 0.0;    // relative increment that ends the loop
    double max_decrease = 0.0;      // largest drop of any node between iterates
    int iterations = 0;
    bool converged = false;

    double last_increment() const { return increments.empty() ? 0.0 : increments.back(); }
};

struct Solution {
    MarketParams params;
    SolverConfig solver;          // grid and caps of the final stage
    RadialField v_radial;         // approximate V
    ValueField vhat;              // approximate V-hat of the final stage
    ValueField c_star;            // maximising consumption of the final stage
    ValueField pi_star;           // maximising liquid position of the final stage
    AllocationProfile alloc;
    std::vector<RadialField> iterates;  // V^1, V^2, ...
    SolveReport report;
};

/// Smallest T with exp(-(beta + lambda - k_p) T) <= tol_rel / 10, capped at t_cap.
double choose_horizon(const MarketParams& m, double tol_rel,
                      double t_cap = std::numeric_limits<double>::infinity());

/// Fixed-point loop V^0 = 0, V^{n+1} = H V-hat^n(0). The radial grid is reset
/// to cover the (x, y) box. The returned report says whether the loop
/// converged; see require_converged.
Solution iterate(const MarketParams& m, const SolverConfig& solver, const IterationConfig& it);

/// Throws NoConvergence when the loop stopped at its cap.
void require_converged(const Solution& s);

/// Feedback controls of a solved problem. Time is time since the last
/// trade; past `t_clamp` the controls of that time are reused.
struct PolicyBundle {
    AllocationProfile alloc;
    ValueField c_star;
    ValueField pi_star;
    double t_clamp = 0.0;

    double consumption(double t, double x, double y) const;
    double position(double t, double x, double y) const;
    double allocation(double r) const { return std::clamp(alloc.a_at(r), 0.0, std::max(r, 0.0)); }
};

PolicyBundle extract_policy(const Solution& s, const MarketParams& m);

/// CSV with columns iteration,increment,ratio,delta.
void write_report_csv(std::ostream& os, const SolveReport& r);

/// Writes v_radial.bin, vhat.bin, c_star.bin, pi_star.bin, alloc.bin and
/// report.csv into dir (created if missing).
void save_solution(const std::string& dir, const Solution& s);
/// Reads what save_solution wrote; params and report are not restored.
Solution load_solution(const std::string& dir, const MarketParams& m);

}  // namespace illiquid
