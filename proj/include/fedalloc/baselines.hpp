#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fedalloc/allocator.hpp"

namespace fedalloc {

// Equal subcarrier split, equal power, f = 1 GHz, rho = 1.
Allocation equal_allocation(const Scenario& s);

// Optimize only (power, assignment); f uniform in [0.5, 1.5] GHz (seeded), rho = 1.
Allocation comm_only(const Scenario& s, const Weights& w, std::uint64_t seed,
                     const AllocatorConfig& cfg = {});

// Optimize only (frequency, compression); power at the cap, even assignment.
Allocation comp_only(const Scenario& s, const Weights& w, const AllocatorConfig& cfg = {});

// Rejection sampling from the feasible region; rho = 1.
Allocation random_allocation(const Scenario& s, std::uint64_t seed, int max_attempts = 100000);

struct GridSpec {
    double f_lo_hz = 0.1e9, f_hi_hz = 2e9, f_step_hz = 0.1e9;
    double p_lo_dbm = 10.0, p_hi_dbm = 20.0, p_step_dbm = 2.0;
    double rho_lo = 0.1, rho_hi = 1.0, rho_step = 0.1;
    bool exact_joint_power = false;  // per-subcarrier power enumeration
    double budget = 1e9;             // refuse when the visit estimate exceeds this
};

struct ExhaustiveResult {
    bool feasible_point_found = false;
    Allocation best;
    double objective = 0.0;
    double visited = 0.0;
};

// Grid search over subcarrier assignments, power levels, frequencies and the
// compression rate. Assignments are enumerated exactly; within an assignment
// the per-device (frequency, power) grid is scanned exactly via a deadline
// sweep. By default one power level is shared across a device's subcarriers;
// exact_joint_power enumerates per-subcarrier levels instead.
ExhaustiveResult exhaustive_search(const Scenario& s, const Weights& w, const GridSpec& grid);

// KKT residual summary of a power-stage solution.
struct KktSummary {
    double max_stationarity = 0.0;
    double max_slackness = 0.0;
    double max_primal_violation = 0.0;
    double min_dual = 0.0;
};

KktSummary power_kkt_residuals(const Scenario& s, const Mat& assign, const Mat& power,
                               const std::vector<double>& sigma, const Multipliers& mult,
                               const Mat& assign_ref, const std::vector<double>& y, double rho,
                               const std::vector<double>& r_min, double varsigma, const Weights& w);

}  // namespace fedalloc
