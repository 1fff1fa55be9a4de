#pragma once

#include <vector>

#include "fedalloc/freq_solver.hpp"
#include "fedalloc/power_solver.hpp"

namespace fedalloc {

struct AllocatorConfig {
    int max_outer_iters = 50;      // J_max
    double eps2_rel = 1e-4;        // |s_i - s_{i-1}| <= eps2_rel * |s_0|
    FreqSolverOptions freq;
    PowerSolverOptions power;
    PenaltySchedule penalty;
};

struct SolveReport {
    std::vector<double> outer_trace;  // s^(i)
    std::vector<int> inner_iterations;
    bool converged = false;
    double wall_time_s = 0.0;
    double max_kkt_residual = 0.0;
    double max_epigraph_residual = 0.0;
    bool fallback_used = false;
    double binary_gap = 0.0;  // before rounding
    Multipliers multipliers;  // of the final power solve
    std::vector<double> mu;   // of the final frequency solve
};

// Round-robin subcarriers, equal power split, f = f_max/2, rho = min(rho_max, 0.5).
Allocation feasible_init(const Scenario& s, const AllocatorConfig& cfg = {});

// Alternate the two stages from a feasible initialization until the objective
// stabilizes; the returned allocation is binary-feasible (rounded + polished)
// and is the best feasible iterate seen.
struct AllocateOutcome {
    Allocation allocation;
    CostBreakdown costs;
    SolveReport report;
};
AllocateOutcome allocate(const Scenario& s, const Weights& w, const AllocatorConfig& cfg = {});

}  // namespace fedalloc
