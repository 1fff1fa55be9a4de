#include "fedalloc/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

namespace fedalloc {

namespace {

constexpr double kLn2 = 0.6931471805599453;

void check_feasible(const Scenario& s, const Allocation& a, const char* who) {
    if (max_constraint_violation(s, a) > 1e-9)
        throw InfeasibleError(std::string(who) + ": produced allocation violates the constraints");
}

Mat even_assignment(const Scenario& s, std::vector<std::size_t>& owned) {
    const std::size_t N = s.n_devices(), K = s.n_subcarriers();
    Mat x(N, K);
    owned.assign(N, 0);
    const std::size_t base = K / N, rem = K % N;
    std::size_t k = 0;
    for (std::size_t n = 0; n < N; ++n) {
        const std::size_t cnt = base + (n < rem ? 1 : 0);
        for (std::size_t i = 0; i < cnt && k < K; ++i, ++k) x(n, k) = 1.0;
        owned[n] = cnt;
    }
    return x;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

Allocation equal_allocation(const Scenario& s) {
    const std::size_t N = s.n_devices(), K = s.n_subcarriers();
    Allocation a;
    std::vector<std::size_t> owned;
    a.assign = even_assignment(s, owned);
    a.power_w = Mat(N, K);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t k = 0; k < K; ++k)
            if (a.assign(n, k) > 0.5)
                a.power_w(n, k) = s.constants.p_max_w / static_cast<double>(owned[n]);
    a.freq_hz.assign(N, std::min(1e9, s.constants.f_max_hz));
    a.rho = 1.0;
    check_feasible(s, a, "equal_allocation");
    return a;
}

Allocation comm_only(const Scenario& s, const Weights& w, std::uint64_t seed,
                     const AllocatorConfig& cfg) {
    Allocation a = equal_allocation(s);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    for (std::size_t n = 0; n < s.n_devices(); ++n)
        a.freq_hz[n] = std::min((0.5 + uniform01(rng)) * 1e9, s.constants.f_max_hz);
    a.rho = 1.0;
    const double deadline = evaluate(s, a, w).t_fl_s;
    PowerSolution ps = solve_power_stage(s, a.freq_hz, a.rho, deadline, a.power_w, a.assign, w,
                                         cfg.penalty, cfg.power);
    Allocation out = a;
    out.power_w = ps.power;
    out.assign = ps.assign;
    out = round_and_polish(s, out, deadline, w, cfg.power);
    out.freq_hz = a.freq_hz;  // frequencies stay frozen in this baseline
    out.rho = 1.0;
    check_feasible(s, out, "comm_only");
    return out;
}

Allocation comp_only(const Scenario& s, const Weights& w, const AllocatorConfig& cfg) {
    Allocation a = equal_allocation(s);
    FreqSolution fs = solve_freq_stage(s, a, w, cfg.freq);
    a.freq_hz = fs.freq_hz;
    a.rho = fs.rho;
    check_feasible(s, a, "comp_only");
    return a;
}

Allocation random_allocation(const Scenario& s, std::uint64_t seed, int max_attempts) {
    const std::size_t N = s.n_devices(), K = s.n_subcarriers();
    std::mt19937_64 rng(seed ^ 0xd1342543de82ef95ULL);
    std::map<std::string, int> rejections;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        Allocation a;
        a.assign = Mat(N, K);
        a.power_w = Mat(N, K);
        a.freq_hz.assign(N, 0.0);
        a.rho = 1.0;
        for (std::size_t k = 0; k < K; ++k) {
            const std::size_t n = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(N));
            a.assign(std::min(n, N - 1), k) = 1.0;
        }
        for (std::size_t n = 0; n < N; ++n) {
            a.freq_hz[n] = std::max(uniform01(rng), 1e-6) * s.constants.f_max_hz;
            // uniform draw from the simplex {p >= 0, sum p <= P_max} via
            // exponential spacings (one extra variate absorbs the slack)
            double tot = -std::log(std::max(uniform01(rng), 1e-300));
            std::vector<double> e;
            for (std::size_t k = 0; k < K; ++k)
                if (a.assign(n, k) > 0.5) {
                    e.push_back(-std::log(std::max(uniform01(rng), 1e-300)));
                    tot += e.back();
                }
            std::size_t i = 0;
            for (std::size_t k = 0; k < K; ++k)
                if (a.assign(n, k) > 0.5)
                    a.power_w(n, k) = s.constants.p_max_w * e[i++] / tot;
        }
        bool ok = true;
        if (ok) {
            try {
                if (max_constraint_violation(s, a) > 1e-9) {
                    ok = false;
                    ++rejections["constraints"];
                }
            } catch (const InfeasibleError&) {
                ok = false;
                ++rejections["zero_rate"];
            }
        }
        if (ok) return a;
    }
    std::string msg = "random_allocation: no feasible sample within budget; rejections:";
    for (const auto& [k, v] : rejections) msg += " " + k + "=" + std::to_string(v);
    throw InfeasibleError(msg);
}

namespace {

struct DeviceOption {
    double time;
    double cost;
};

// Enumerate subcarrier owners as a base-(N+1) counter; owner N means idle.
bool next_assignment(std::vector<std::size_t>& owner, std::size_t n_dev) {
    for (std::size_t k = 0; k < owner.size(); ++k) {
        if (++owner[k] <= n_dev) return true;
        owner[k] = 0;
    }
    return false;
}

}  // namespace

ExhaustiveResult exhaustive_search(const Scenario& s, const Weights& w, const GridSpec& grid) {
    const std::size_t N = s.n_devices(), K = s.n_subcarriers();
    const auto& c = s.constants;

    std::vector<double> f_grid, p_grid_w, rho_grid;
    for (double f = grid.f_lo_hz; f <= grid.f_hi_hz + 1e-6; f += grid.f_step_hz)
        if (f > 0 && f <= c.f_max_hz + 1e-6) f_grid.push_back(std::min(f, c.f_max_hz));
    for (double d = grid.p_lo_dbm; d <= grid.p_hi_dbm + 1e-12; d += grid.p_step_dbm)
        p_grid_w.push_back(dbm_to_watts(d));
    for (double r = grid.rho_lo; r <= grid.rho_hi + 1e-12; r += grid.rho_step)
        rho_grid.push_back(std::min(r, 1.0));
    if (f_grid.empty() || p_grid_w.empty() || rho_grid.empty())
        throw ConfigError("exhaustive_search: empty grid");

    const double n_assign = std::pow(static_cast<double>(N + 1), static_cast<double>(K));
    double per_device_opts = static_cast<double>(f_grid.size() * p_grid_w.size());
    if (grid.exact_joint_power)
        per_device_opts = static_cast<double>(f_grid.size()) *
                          std::pow(static_cast<double>(p_grid_w.size()), static_cast<double>(K));
    const double estimate =
        n_assign * static_cast<double>(rho_grid.size()) * per_device_opts * static_cast<double>(N);
    if (estimate > grid.budget)
        throw ConfigError("exhaustive_search: estimated visit count " + std::to_string(estimate) +
                          " exceeds budget " + std::to_string(grid.budget));

    ExhaustiveResult res;
    res.best.assign = Mat(N, K);
    res.best.power_w = Mat(N, K);
    res.best.freq_hz.assign(N, f_grid.front());
    double best_obj = std::numeric_limits<double>::infinity();

    const double bbar = c.subcarrier_bandwidth_hz();
    const double c_tot = c.semcom_bits_total();

    std::vector<std::size_t> owner(K, 0);
    std::vector<std::vector<std::size_t>> owned(N);
    std::vector<std::vector<DeviceOption>> opts(N);
    std::vector<std::vector<double>> chosen_f(N), chosen_p(N);

    do {
        for (auto& o : owned) o.clear();
        for (std::size_t k = 0; k < K; ++k)
            if (owner[k] < N) owned[owner[k]].push_back(k);
        bool covered = true;
        for (std::size_t n = 0; n < N; ++n)
            if (owned[n].empty() && (c.model_upload_bits > 0.0 || c_tot > 0.0)) covered = false;
        if (!covered) continue;

        for (double rho : rho_grid) {
            // per-device feasible (time, cost) options over the (f, p) grid
            bool dev_ok = true;
            struct Tagged {
                double time, cost;
                double f;
                std::vector<double> p;
            };
            std::vector<std::vector<Tagged>> options(N);
            for (std::size_t n = 0; n < N && dev_ok; ++n) {
                const double work = c.local_iterations * s.cycles_per_sample[n] * c.samples_per_device;
                auto add_option = [&](const std::vector<double>& pvec) {
                    double r = 0.0, p_tot = 0.0;
                    for (std::size_t i = 0; i < owned[n].size(); ++i) {
                        r += link_rate(pvec[i], s.gains(n, owned[n][i]), bbar, c.noise_psd_w_per_hz);
                        p_tot += pvec[i];
                    }
                    if (p_tot > c.p_max_w + 1e-12) return;
                    if (r <= 0.0) return;
                    if (c_tot > 0.0 && rho * c_tot / r > c.t_semcom_max_s + 1e-12) return;
                    const double tau = c.model_upload_bits > 0.0 ? c.model_upload_bits / r : 0.0;
                    const double e_tx = p_tot * tau;
                    const double e_sc = p_tot * rho * c_tot / r;
                    for (double f : f_grid) {
                        const double t_cmp = work / f;
                        const double e_cmp = c.switched_capacitance * work * f * f;
                        options[n].push_back(
                            {tau + t_cmp, w.kappa1 * (e_tx + e_cmp + e_sc), f, pvec});
                    }
                    res.visited += static_cast<double>(f_grid.size());
                };
                if (grid.exact_joint_power) {
                    std::vector<std::size_t> idx(owned[n].size(), 0);
                    bool more = !owned[n].empty();
                    while (more) {
                        std::vector<double> pvec(owned[n].size());
                        for (std::size_t i = 0; i < idx.size(); ++i) pvec[i] = p_grid_w[idx[i]];
                        add_option(pvec);
                        more = false;
                        for (std::size_t i = 0; i < idx.size(); ++i) {
                            if (++idx[i] < p_grid_w.size()) {
                                more = true;
                                break;
                            }
                            idx[i] = 0;
                        }
                    }
                } else {
                    for (double v : p_grid_w)
                        add_option(std::vector<double>(owned[n].size(), v));
                }
                if (options[n].empty()) dev_ok = false;
            }
            if (!dev_ok) continue;

            // deadline sweep: sort options by time, prefix-min cost
            for (std::size_t n = 0; n < N; ++n)
                std::sort(options[n].begin(), options[n].end(),
                          [](const Tagged& a, const Tagged& b) { return a.time < b.time; });
            std::vector<std::vector<double>> pref_cost(N);
            std::vector<std::vector<std::size_t>> pref_idx(N);
            for (std::size_t n = 0; n < N; ++n) {
                pref_cost[n].resize(options[n].size());
                pref_idx[n].resize(options[n].size());
                double m = std::numeric_limits<double>::infinity();
                std::size_t mi = 0;
                for (std::size_t i = 0; i < options[n].size(); ++i) {
                    if (options[n][i].cost < m) {
                        m = options[n][i].cost;
                        mi = i;
                    }
                    pref_cost[n][i] = m;
                    pref_idx[n][i] = mi;
                }
            }
            std::vector<double> candidates;
            for (std::size_t n = 0; n < N; ++n)
                for (const auto& o : options[n]) candidates.push_back(o.time);
            std::sort(candidates.begin(), candidates.end());
            candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

            const double acc_term =
                w.kappa3 * static_cast<double>(N) *
                (c.accuracy_coeff * std::pow(rho, c.accuracy_exponent));
            for (double t : candidates) {
                double total = w.kappa2 * t - acc_term;
                bool ok = true;
                std::vector<std::size_t> pick(N);
                for (std::size_t n = 0; n < N && ok; ++n) {
                    // last option with time <= t
                    auto it = std::upper_bound(
                        options[n].begin(), options[n].end(), t,
                        [](double val, const Tagged& o) { return val < o.time; });
                    if (it == options[n].begin()) {
                        ok = false;
                        break;
                    }
                    const std::size_t i = static_cast<std::size_t>(it - options[n].begin()) - 1;
                    total += pref_cost[n][i];
                    pick[n] = pref_idx[n][i];
                }
                if (!ok || total >= best_obj) continue;
                best_obj = total;
                res.feasible_point_found = true;
                res.best.assign = Mat(N, K);
                res.best.power_w = Mat(N, K);
                res.best.rho = rho;
                for (std::size_t n = 0; n < N; ++n) {
                    const Tagged& o = options[n][pick[n]];
                    res.best.freq_hz[n] = o.f;
                    for (std::size_t i = 0; i < owned[n].size(); ++i) {
                        res.best.assign(n, owned[n][i]) = 1.0;
                        res.best.power_w(n, owned[n][i]) = o.p[i];
                    }
                }
            }
        }
    } while (next_assignment(owner, N));

    res.objective = best_obj;
    return res;
}

KktSummary power_kkt_residuals(const Scenario& s, const Mat& assign, const Mat& power,
                               const std::vector<double>& sigma, const Multipliers& mult,
                               const Mat& assign_ref, const std::vector<double>& y, double rho,
                               const std::vector<double>& r_min, double varsigma,
                               const Weights& w) {
    const std::size_t N = s.n_devices(), K = s.n_subcarriers();
    const auto& c = s.constants;
    const double bbar = c.subcarrier_bandwidth_hz();
    const double n0 = c.noise_psd_w_per_hz;
    const int q = c.taylor_power_q;
    const double bits = c.model_upload_bits + rho * c.semcom_bits_total();

    KktSummary out;
    out.min_dual = std::numeric_limits<double>::infinity();
    for (double b : mult.beta) out.min_dual = std::min(out.min_dual, b);
    for (double l : mult.lambda) out.min_dual = std::min(out.min_dual, l);
    for (double v : mult.nu) out.min_dual = std::min(out.min_dual, v);
    for (double i : mult.iota.data()) out.min_dual = std::min(out.min_dual, i);

    for (std::size_t n = 0; n < N; ++n) {
        if (bits <= 0.0) continue;
        const double wn = mult.lambda[n] + mult.nu[n];
        const double S = power.row_sum(n);
        double r = 0.0;
        for (std::size_t k = 0; k < K; ++k)
            r += assign(n, k) * link_rate(power(n, k), s.gains(n, k), bbar, n0);

        // implied multiplier of the per-device total power budget: active only
        // when the row sits on the budget, recovered from interior entries
        double mu_power = 0.0;
        if (S >= c.p_max_w * (1.0 - 1e-9)) {
            double worst = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                if (power(n, k) <= 1e-15) continue;
                const double g = s.gains(n, k);
                const double sn = power(n, k) * g / (n0 * bbar);
                const double grad_rate = wn * assign(n, k) * g / ((1.0 + sn) * n0 * kLn2);
                const double dp = mult.iota(n, k) + 2.0 * mult.nu[n] * bits * y[n] * S - grad_rate;
                worst = std::min(worst, dp);
            }
            mu_power = -worst;
        }

        for (std::size_t k = 0; k < K; ++k) {
            const double xr = assign_ref(n, k);
            const double xq1 = q == 1 ? 1.0 : std::pow(xr, q - 1);
            const double cap_slope = static_cast<double>(q) * xq1 * c.p_max_w;
            const double cap =
                q == 1 ? assign(n, k) * c.p_max_w
                       : (xq1 * xr + static_cast<double>(q) * xq1 * (assign(n, k) - xr)) * c.p_max_w;
            if (cap_slope <= 0.0) continue;  // locked pair: x and p pinned at zero
            const double lb = std::max(0.0, xr * (1.0 - 1.0 / static_cast<double>(q)));
            const double g = s.gains(n, k);
            const double rb = link_rate(power(n, k), g, bbar, n0);
            const double sn = power(n, k) * g / (n0 * bbar);

            const double dx = -varsigma * (2.0 * xr - 1.0) + mult.beta[k] - wn * rb -
                              mult.iota(n, k) * cap_slope;
            const double sx = std::abs(varsigma) + mult.beta[k] + wn * rb +
                              mult.iota(n, k) * cap_slope + 1e-300;
            const double x = assign(n, k);
            double rx;
            if (x >= 1.0 - 1e-9) rx = std::max(0.0, dx) / sx;
            else if (x <= lb + 1e-9 && lb <= 1e-12) rx = std::max(0.0, -dx) / sx;
            else rx = std::abs(dx) / sx;
            out.max_stationarity = std::max(out.max_stationarity, rx);

            const double grad_rate = wn * x * g / ((1.0 + sn) * n0 * kLn2);
            const double dp =
                mult.iota(n, k) + 2.0 * mult.nu[n] * bits * y[n] * S + mu_power - grad_rate;
            const double sp = mult.iota(n, k) + std::abs(2.0 * mult.nu[n] * bits * y[n] * S) +
                              mu_power + grad_rate + 1e-300;
            double rp;
            if (power(n, k) <= 1e-15) rp = std::max(0.0, -dp) / sp;
            else rp = std::abs(dp) / sp;
            out.max_stationarity = std::max(out.max_stationarity, rp);

            out.max_slackness = std::max(
                out.max_slackness, std::abs(mult.iota(n, k) * (power(n, k) - cap)) /
                                       ((1.0 + mult.iota(n, k)) * c.p_max_w));
            out.max_primal_violation =
                std::max(out.max_primal_violation, (power(n, k) - cap) / c.p_max_w);
        }
        if (w.kappa1 > 0.0 && sigma[n] > 0.0) {
            const double dsg =
                w.kappa1 - mult.nu[n] * bits / (2.0 * y[n] * sigma[n] * sigma[n] * sigma[n]);
            out.max_stationarity = std::max(out.max_stationarity, std::abs(dsg) / w.kappa1);
        }
        out.max_slackness =
            std::max(out.max_slackness, std::abs(mult.lambda[n] * (r_min[n] - r)) /
                                            ((1.0 + mult.lambda[n]) * std::max(r_min[n], 1.0)));
        if (sigma[n] > 0.0) {
            const double epi = (S * S * y[n] + 1.0 / (4.0 * y[n] * sigma[n] * sigma[n])) * bits - r;
            out.max_slackness = std::max(out.max_slackness, std::abs(mult.nu[n] * epi) /
                                                                ((1.0 + mult.nu[n]) * std::max(r, 1.0)));
            out.max_primal_violation = std::max(out.max_primal_violation, epi / std::max(r, 1.0));
        }
        out.max_primal_violation =
            std::max(out.max_primal_violation, (r_min[n] - r) / std::max(r_min[n], 1.0));
    }
    for (std::size_t k = 0; k < K; ++k) {
        const double cs = assign.col_sum(k);
        out.max_slackness = std::max(out.max_slackness,
                                     std::abs(mult.beta[k] * (cs - 1.0)) / (1.0 + mult.beta[k]));
        out.max_primal_violation = std::max(out.max_primal_violation, cs - 1.0);
    }
    return out;
}

}  // namespace fedalloc
