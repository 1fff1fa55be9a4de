#include "fedalloc/allocator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace fedalloc {

Allocation feasible_init(const Scenario& s, const AllocatorConfig& cfg) {
    const std::size_t N = s.n_devices(), K = s.n_subcarriers();
    Allocation a;
    a.freq_hz.assign(N, 0.5 * s.constants.f_max_hz);
    a.power_w = Mat(N, K);
    a.assign = Mat(N, K);

    std::vector<std::size_t> owned(N, 0);
    for (std::size_t k = 0; k < K; ++k) {
        const std::size_t n = k % N;
        a.assign(n, k) = 1.0;
        ++owned[n];
    }
    for (std::size_t n = 0; n < N; ++n) {
        if (owned[n] == 0) continue;
        const double p = s.constants.p_max_w / static_cast<double>(owned[n]);
        for (std::size_t k = 0; k < K; ++k)
            if (a.assign(n, k) > 0.5) a.power_w(n, k) = p;
    }
    if (K < N)
        throw InfeasibleError("feasible_init: fewer subcarriers than devices leaves some device mute");

    const auto rates = device_rates(s, a);
    double rho_max = 1.0;
    if (s.constants.semcom_bits_total() > 0.0) rho_max = rho_upper_bound(s, rates);
    if (rho_max < cfg.freq.rho_floor)
        throw InfeasibleError("feasible_init: SemCom deadline unreachable even at the rho floor");
    a.rho = std::min(rho_max, 0.5);
    a.rho = std::max(a.rho, cfg.freq.rho_floor);
    return a;
}

AllocateOutcome allocate(const Scenario& s, const Weights& w, const AllocatorConfig& cfg) {
    w.validate();
    const auto t_start = std::chrono::steady_clock::now();

    AllocateOutcome out;
    Allocation cur = feasible_init(s, cfg);
    SolveReport& rep = out.report;

    auto objective_of = [&](const Allocation& a) { return evaluate(s, a, w).objective; };

    double s_prev = objective_of(cur);
    rep.outer_trace.push_back(s_prev);
    const double s_scale = std::max(1.0, std::abs(s_prev));

    Allocation best = cur;
    double best_obj = s_prev;
    double deadline = 0.0;
    {
        const auto costs0 = evaluate(s, cur, w);
        deadline = costs0.t_fl_s;
    }

    for (int it = 0; it < cfg.max_outer_iters; ++it) {
        // stage 1: frequencies, compression, deadline at fixed (power, assignment)
        FreqSolution fs = solve_freq_stage(s, cur, w, cfg.freq);
        cur.freq_hz = fs.freq_hz;
        cur.rho = fs.rho;
        deadline = fs.deadline_s;
        rep.mu = fs.mu;

        // stage 2: power and assignment at fixed (frequencies, compression)
        PowerSolution ps = solve_power_stage(s, cur.freq_hz, cur.rho, deadline, cur.power_w,
                                             cur.assign, w, cfg.penalty, cfg.power);
        cur.power_w = ps.power;
        cur.assign = ps.assign;
        rep.inner_iterations.push_back(ps.iterations);
        rep.fallback_used = rep.fallback_used || ps.fallback_used;
        rep.max_epigraph_residual = std::max(rep.max_epigraph_residual, ps.max_epigraph_residual);
        rep.binary_gap = ps.binary_gap;
        rep.multipliers = ps.multipliers;

        const double s_cur = objective_of(cur);
        rep.outer_trace.push_back(s_cur);
        if (s_cur < best_obj) {
            best_obj = s_cur;
            best = cur;
        }
        if (std::abs(s_cur - s_prev) <= cfg.eps2_rel * s_scale) {
            rep.converged = true;
            break;
        }
        s_prev = s_cur;
    }

    // finish: binary assignment + power polish on the best iterate
    Allocation rounded = round_and_polish(s, best, std::max(deadline, evaluate(s, best, w).t_fl_s),
                                          w, cfg.power);
    // refresh frequencies/rho once more at the binary assignment
    FreqSolution fs = solve_freq_stage(s, rounded, w, cfg.freq);
    rounded.freq_hz = fs.freq_hz;
    rounded.rho = fs.rho;
    const double rounded_obj = objective_of(rounded);
    if (rounded_obj < best_obj || max_constraint_violation(s, best) > 1e-9) {
        best = rounded;
        best_obj = rounded_obj;
    } else {
        // keep the better of the two only if it is binary-feasible; otherwise
        // the rounded allocation is the deliverable
        double gap = 0.0;
        for (double v : best.assign.data()) gap += v * (1.0 - v);
        if (gap > 0.0) {
            best = rounded;
            best_obj = rounded_obj;
        }
    }

    out.allocation = best;
    out.costs = evaluate(s, best, w);
    rep.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return out;
}

}  // namespace fedalloc
