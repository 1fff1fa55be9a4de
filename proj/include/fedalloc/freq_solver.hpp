#pragma once

#include <vector>

#include "fedalloc/metrics.hpp"

namespace fedalloc {

struct FreqSolverOptions {
    double rho_floor = 1e-4;   // keeps the SemCom stage meaningful when kappa3 = 0
    double f_floor_hz = 1e7;   // used when kappa2 = 0 (deadline unconstrained)
    double rho_abs_tol = 1e-12;
    double deadline_rel_tol = 1e-9;
    int max_bisect_iters = 200;
};

// Solution of the frequency/compression subproblem at fixed (power, assignment).
struct FreqSolution {
    std::vector<double> freq_hz;
    double rho = 0.0;
    double deadline_s = 0.0;          // realized FL completion time
    std::vector<double> mu;           // deadline multipliers (diagnostic)
    double stationarity_residual = 0.0;
    double slackness_residual = 0.0;
};

// min(1, T_sc_max * r_n / C_n over devices with C_n > 0), the combined
// compression-rate cap.
double rho_upper_bound(const Scenario& s, const std::vector<double>& rates);

// Root of Delta(rho) = sum_n (kappa1 p_n C_n / r_n - kappa3 A'(rho)) on
// (rho_floor, rho_max], clamped to the bounds.
double solve_rho(const Scenario& s, const std::vector<double>& power_totals,
                 const std::vector<double>& rates, const Weights& w, double rho_max,
                 const FreqSolverOptions& opt = {});

// Root of F(T) = sum_n 2 kappa1 xi (min(eta c d / (T - tau), f_max))^3 - kappa2
// above max(tau_n). Requires kappa1 > 0 and kappa2 > 0.
double solve_deadline(const Scenario& s, const std::vector<double>& taus, const Weights& w,
                      const FreqSolverOptions& opt = {});

// Full subproblem: frequencies tight at the effective deadline, rho by
// bisection. The effective deadline is max of the interior root and the
// cap-limited minimum makespan, so every device finishes exactly at the
// returned deadline.
FreqSolution solve_freq_stage(const Scenario& s, const Allocation& fixed_power_assign,
                              const Weights& w, const FreqSolverOptions& opt = {});

}  // namespace fedalloc
