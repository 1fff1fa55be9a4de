#include "fedalloc/freq_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fedalloc {

namespace {

std::vector<double> device_work(const Scenario& s) {
    std::vector<double> w(s.n_devices());
    for (std::size_t n = 0; n < s.n_devices(); ++n)
        w[n] = s.constants.local_iterations * s.cycles_per_sample[n] * s.constants.samples_per_device;
    return w;
}

}  // namespace

double rho_upper_bound(const Scenario& s, const std::vector<double>& rates) {
    const double c_total = s.constants.semcom_bits_total();
    double bound = 1.0;
    if (c_total <= 0.0) return bound;
    for (std::size_t n = 0; n < s.n_devices(); ++n) {
        if (rates[n] <= 0.0)
            throw InfeasibleError("rho_upper_bound: device " + std::to_string(n) + " has zero rate");
        bound = std::min(bound, s.constants.t_semcom_max_s * rates[n] / c_total);
    }
    return bound;
}

double solve_rho(const Scenario& s, const std::vector<double>& power_totals,
                 const std::vector<double>& rates, const Weights& w, double rho_max,
                 const FreqSolverOptions& opt) {
    if (rho_max <= opt.rho_floor)
        throw InfeasibleError("solve_rho: feasible compression range is degenerate");
    const double c_total = s.constants.semcom_bits_total();
    if (w.kappa3 <= 0.0 || c_total <= 0.0) {
        // no accuracy pressure: pure energy minimization drives rho to the floor
        return w.kappa1 > 0.0 ? opt.rho_floor : rho_max;
    }
    double energy_term = 0.0;
    for (std::size_t n = 0; n < s.n_devices(); ++n) {
        if (rates[n] <= 0.0)
            throw InfeasibleError("solve_rho: device " + std::to_string(n) + " has zero rate");
        energy_term += w.kappa1 * power_totals[n] * c_total / rates[n];
    }
    const double n_dev = static_cast<double>(s.n_devices());
    auto delta = [&](double rho) { return energy_term - w.kappa3 * n_dev * accuracy_derivative(s, rho); };

    if (delta(rho_max) <= 0.0) return rho_max;    // accuracy still dominates at the cap
    if (delta(opt.rho_floor) >= 0.0) return opt.rho_floor;
    double lo = opt.rho_floor, hi = rho_max;
    for (int i = 0; i < opt.max_bisect_iters && hi - lo > opt.rho_abs_tol; ++i) {
        const double mid = 0.5 * (lo + hi);
        (delta(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double solve_deadline(const Scenario& s, const std::vector<double>& taus, const Weights& w,
                      const FreqSolverOptions& opt) {
    if (!(w.kappa1 > 0.0) || !(w.kappa2 > 0.0))
        throw ConfigError("solve_deadline requires kappa1 > 0 and kappa2 > 0");
    const auto work = device_work(s);
    const auto& c = s.constants;
    const double tau_max = *std::max_element(taus.begin(), taus.end());

    auto f_of = [&](std::size_t n, double t) {
        const double gap = t - taus[n];
        if (gap <= 0.0) return c.f_max_hz;
        return std::min(work[n] / gap, c.f_max_hz);
    };
    auto F = [&](double t) {
        double sum = 0.0;
        for (std::size_t n = 0; n < s.n_devices(); ++n) {
            const double f = f_of(n, t);
            sum += 2.0 * w.kappa1 * c.switched_capacitance * f * f * f;
        }
        return sum - w.kappa2;
    };

    const double scale = std::max(tau_max, 1e-12);
    double lo = tau_max + 1e-15 * scale;
    if (F(lo) <= 0.0) return lo;  // kappa2 dominates even at the all-capped plateau
    double hi = std::max(2.0 * scale, 1e-9);
    int guard = 0;
    while (F(hi) > 0.0 && guard++ < 200) hi *= 2.0;
    for (int i = 0; i < opt.max_bisect_iters && (hi - lo) > opt.deadline_rel_tol * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (F(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

FreqSolution solve_freq_stage(const Scenario& s, const Allocation& alloc, const Weights& w,
                              const FreqSolverOptions& opt) {
    const std::size_t n_dev = s.n_devices();
    const auto& c = s.constants;
    const auto work = device_work(s);
    const auto rates = device_rates(s, alloc);

    std::vector<double> taus(n_dev), p_tot(n_dev);
    for (std::size_t n = 0; n < n_dev; ++n) {
        p_tot[n] = alloc.power_w.row_sum(n);
        if (c.model_upload_bits > 0.0) {
            if (rates[n] <= 0.0)
                throw InfeasibleError("solve_freq_stage: device " + std::to_string(n) + " has zero rate");
            taus[n] = c.model_upload_bits / rates[n];
        }
    }

    FreqSolution out;
    out.freq_hz.assign(n_dev, 0.0);
    out.mu.assign(n_dev, 0.0);

    // minimum makespan with all devices at f_max; the deadline can never be
    // pushed below the point where the slowest capped device finishes
    double t_min = 0.0;
    for (std::size_t n = 0; n < n_dev; ++n)
        t_min = std::max(t_min, taus[n] + work[n] / c.f_max_hz);

    double t_eff;
    if (!(w.kappa2 > 0.0)) {
        // deadline unconstrained: only energy matters, frequencies drop to the floor
        for (std::size_t n = 0; n < n_dev; ++n) out.freq_hz[n] = std::min(opt.f_floor_hz, c.f_max_hz);
        t_eff = 0.0;
        for (std::size_t n = 0; n < n_dev; ++n)
            t_eff = std::max(t_eff, taus[n] + work[n] / out.freq_hz[n]);
    } else if (!(w.kappa1 > 0.0)) {
        // no energy cost: run every device at the cap
        for (std::size_t n = 0; n < n_dev; ++n) out.freq_hz[n] = c.f_max_hz;
        t_eff = t_min;
    } else {
        const double t_root = solve_deadline(s, taus, w, opt);
        t_eff = std::max(t_root, t_min);
        for (std::size_t n = 0; n < n_dev; ++n)
            out.freq_hz[n] = std::min(work[n] / (t_eff - taus[n]), c.f_max_hz);
    }
    out.deadline_s = 0.0;
    for (std::size_t n = 0; n < n_dev; ++n)
        out.deadline_s = std::max(out.deadline_s, taus[n] + work[n] / out.freq_hz[n]);

    const double rho_max = rho_upper_bound(s, rates);
    out.rho = solve_rho(s, p_tot, rates, w, rho_max, opt);

    // KKT residuals: mu_n = 2 kappa1 xi f_n^3 for uncapped devices, capped
    // devices absorb the remaining weight with their cap multiplier.
    if (w.kappa1 > 0.0 && w.kappa2 > 0.0) {
        double mu_uncapped = 0.0;
        double cap_count = 0.0;
        for (std::size_t n = 0; n < n_dev; ++n) {
            const double f = out.freq_hz[n];
            out.mu[n] = 2.0 * w.kappa1 * c.switched_capacitance * f * f * f;
            if (f >= c.f_max_hz * (1.0 - 1e-12)) cap_count += 1.0;
            else mu_uncapped += out.mu[n];
        }
        double mu_sum = 0.0;
        for (std::size_t n = 0; n < n_dev; ++n) mu_sum += out.mu[n];
        if (cap_count > 0.0) {
            // distribute any defect kappa2 - sum(mu) over the capped devices
            const double defect = w.kappa2 - mu_sum;
            if (defect > 0.0) {
                for (std::size_t n = 0; n < n_dev; ++n)
                    if (out.freq_hz[n] >= c.f_max_hz * (1.0 - 1e-12)) out.mu[n] += defect / cap_count;
                mu_sum = w.kappa2;
            }
        }
        out.stationarity_residual = std::abs(mu_sum - w.kappa2) / std::max(w.kappa2, 1e-300);
        double slack = 0.0;
        for (std::size_t n = 0; n < n_dev; ++n) {
            const double finish = taus[n] + work[n] / out.freq_hz[n];
            slack = std::max(slack, out.mu[n] * std::abs(finish - out.deadline_s) /
                                        std::max(1.0, w.kappa2 * out.deadline_s));
        }
        out.slackness_residual = slack;
    }
    return out;
}

}  // namespace fedalloc
