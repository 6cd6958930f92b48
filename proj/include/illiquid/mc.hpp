#pragma once

#include "illiquid/driver.hpp"
#include "illiquid/model.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace illiquid {

struct PathConfig {
    long n_paths = 100'000;
    double horizon = 40.0;
    double dt = 0.01;
    std::uint64_t seed = 20240601;
    bool antithetic = false;
    int workers = 1;

    void validate() const;
};

/// A feedback policy: consumption and liquid position as functions of
/// (time since the last trade, liquid wealth, observable illiquid wealth),
/// and the illiquid allocation a(r) in [0, r] chosen at each trade.
struct FeedbackPolicy {
    std::string id;
    std::function<double(double, double, double)> consumption;
    std::function<double(double, double, double)> position;
    std::function<double(double)> allocation;

    static FeedbackPolicy from(const PolicyBundle& b, std::string id = "solver");
    static FeedbackPolicy zero();
};

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    long n_paths = 0;
    double tail_upper = 0.0;        // the truncated tail lies in [0, tail_upper]
    double clipped_fraction = 0.0;  // steps where the policy had to be clipped
};

/// Discounted utility of the policy from initial wealth r0, truncated at
/// config.horizon. Throws InadmissiblePolicy when more than 1% of the steps
/// needed clipping to keep liquid wealth nonnegative.
McEstimate simulate_policy(const MarketParams& m, const FeedbackPolicy& policy, double r0,
                           const PathConfig& config);

struct DppResult {
    double discrepancy = 0.0;  // estimate minus V(r0)
    double std_error = 0.0;
    double value = 0.0;        // V(r0)
};

/// E[int_0^tau1 e^{-beta s} U(c_s) ds + e^{-beta tau1} V(R_tau1)] - V(r0)
/// under the policy, with V read from the solution's radial field.
DppResult dpp_check(const MarketParams& m, const Solution& s, const FeedbackPolicy& policy, double r0,
                    const PathConfig& config);
DppResult dpp_check(const MarketParams& m, const Solution& s, double r0, const PathConfig& config);

struct MomentCase {
    double theta;  // liquid position as a fraction of liquid wealth
    double x0, y0;
    double horizon;
    double mean;
    double std_error;
    double bound;
    bool passed;
};

/// Checks E[(X_s + Y_s)^p] <= exp(k_L s) (x + y)^p for proportional
/// positions, zero consumption and the observable illiquid wealth Y.
std::vector<MomentCase> moment_check(const MarketParams& m, const PathConfig& config);

/// CSV with columns policy_id,r0,mean,stderr,n_paths,seed.
void write_csv_header(std::ostream& os);
void write_csv_row(std::ostream& os, const std::string& policy_id, double r0, const McEstimate& e,
                   std::uint64_t seed);

}  // namespace illiquid
