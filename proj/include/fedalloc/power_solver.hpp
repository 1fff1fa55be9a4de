#pragma once

#include <cstdint>
#include <vector>

#include "fedalloc/metrics.hpp"

namespace fedalloc {

// Lagrange multipliers of the transmit-power/assignment subproblem.
struct Multipliers {
    std::vector<double> beta;    // per subcarrier, exclusive-assignment price
    Mat iota;                    // per (device, subcarrier), tightened power cap
    std::vector<double> lambda;  // per device, minimum-rate floor
    std::vector<double> nu;      // per device, epigraph coupling (> 0)
};

struct PenaltySchedule {
    double initial = 1.0;
    double growth = 5.0;
    double cap = 1e6;
    double binary_tol = 1e-3;  // on sum x(1-x)
};

struct PowerSolverOptions {
    int max_inner_iters = 100;       // I_max
    double eps1_rel = 1e-6;          // |h_i - h_{i-1}| <= eps1_rel * |h_0|
    int max_sweeps = 500;            // multiplier fixed-point budget
    double sweep_tol = 1e-10;
    double damp = 0.5;               // damping on beta and primal updates
    double anchor_alpha = 0.3;       // geometric damping of the nu anchor
    int ignite_sweeps = 6;           // sweeps with nu frozen at the entry anchor
    double epigraph_rel_tol = 1e-6;  // required at convergence
    int descent_max_iters = 6000;    // fallback budget
    double assign_threshold = 0.5;   // rounding threshold
    double exponent_clamp = 600.0;   // cap on the 2^(.) argument
};

struct ResolveResult {
    Multipliers multipliers;
    Mat power;
    Mat assign;
    std::vector<double> sigma;
    bool stabilized = false;
    bool fallback_used = false;
    bool exponent_clamped = false;
    int sweeps = 0;
};

// Per-iteration trace entry of the inner loop.
struct InnerTracePoint {
    double h = 0.0;
    double varsigma = 0.0;
};

struct PowerSolution {
    Mat power;
    Mat assign;
    std::vector<double> sigma;
    Multipliers multipliers;
    std::vector<InnerTracePoint> h_trace;
    std::vector<double> final_y;  // quadratic-transform weights of the last resolve
    int iterations = 0;
    bool converged = false;
    bool fallback_used = false;
    bool h_monotone = true;  // within jitter, per penalty level
    double binary_gap = 0.0; // final sum x(1-x)
    double final_varsigma = 0.0;
    double max_epigraph_residual = 0.0;
};

// r_n^min = max(rho C / T_sc_max, D / (deadline - t_cmp)); throws when the
// deadline is unreachable for some device.
std::vector<double> rate_floor(const Scenario& s, double rho, double deadline_s,
                               const std::vector<double>& freq_hz);

// J(X) = sum (2 x_ref - 1)(x - x_ref) + x_ref (x_ref - 1).
double penalty_term(const Mat& assign, const Mat& assign_ref);

// Closed-form stationary power given the multipliers (clamped below at zero).
// Sets *clamped when the exponent guard was hit.
double power_from_multipliers(const Scenario& s, std::size_t n, std::size_t k, double beta_k,
                              double iota_nk, double lambda_n, double nu_n, double x_ref,
                              double varsigma, bool* clamped = nullptr);

// Stationary assignment fraction at given power, clamped into [0, 1].
double assign_fraction(const Scenario& s, std::size_t n, std::size_t k, double iota_nk,
                       double lambda_n, double nu_n, double p_nk, double power_total,
                       double y_n, double rho);

// sigma_n = cbrt(nu (D + rho C) / (2 y kappa1)).
double sigma_from_nu(const Scenario& s, std::size_t n, double nu_n, double y_n, double rho,
                     double kappa1);

struct ResolveWarmStart {
    std::vector<double> beta;
    std::vector<double> nu;
    std::vector<double> lambda;
    bool prefer_fallback = false;  // stay on the fallback path once it engaged
};

// Stepwise multiplier resolution at fixed quadratic-transform weights y.
ResolveResult resolve_multipliers(const Scenario& s, const Mat& assign_ref,
                                  const std::vector<double>& y, double rho,
                                  const std::vector<double>& r_min, double varsigma,
                                  const Weights& w, const Mat& power_init, const Mat& assign_init,
                                  const PowerSolverOptions& opt = {},
                                  const ResolveWarmStart* warm = nullptr);

// Inner loop: alternate y updates and multiplier resolution until the
// penalized objective stabilizes; escalates the penalty until the assignment
// is near-binary.
PowerSolution solve_power_stage(const Scenario& s, const std::vector<double>& freq_hz, double rho,
                                double deadline_s, const Mat& power_init, const Mat& assign_init,
                                const Weights& w, const PenaltySchedule& sched = {},
                                const PowerSolverOptions& opt = {});

// Binary rounding (argmax per subcarrier above the threshold, ties by channel
// gain then device index) followed by a power re-optimization with the
// assignment frozen. Greedy repair grants starved devices extra subcarriers.
Allocation round_and_polish(const Scenario& s, const Allocation& a, double deadline_s,
                            const Weights& w, const PowerSolverOptions& opt = {});

}  // namespace fedalloc
