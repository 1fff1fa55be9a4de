#include "fedalloc/power_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

namespace fedalloc {

namespace {

constexpr double kLn2 = 0.6931471805599453;

struct CapCoef {
    double a0 = 0.0;  // cap(x) = a0 + a1 * x, already scaled by P_max
    double a1 = 0.0;
    double lb = 0.0;  // smallest x with cap(x) >= 0
};

CapCoef cap_coef(double x_ref, int q, double p_max) {
    CapCoef c;
    if (q == 1) {
        c.a0 = 0.0;
        c.a1 = p_max;
        c.lb = 0.0;
        return c;
    }
    const double xq1 = std::pow(x_ref, q - 1);
    c.a1 = static_cast<double>(q) * xq1 * p_max;
    c.a0 = xq1 * x_ref * (1.0 - q) * p_max;
    c.lb = c.a1 > 0.0 ? std::max(0.0, -c.a0 / c.a1) : 0.0;
    return c;
}

// All per-resolve constants and scratch in one place.
struct Ctx {
    const Scenario& s;
    const Mat& x_ref;
    const std::vector<double>& y;
    double rho;
    const std::vector<double>& r_min;
    double vs;
    Weights w;
    PowerSolverOptions opt;

    std::size_t n_dev, n_sub;
    double bbar, n0, p_max;
    int q;
    std::vector<double> bits;      // D + rho * C per device
    std::vector<CapCoef> caps;     // n_dev * n_sub
    bool exp_clamped = false;

    Ctx(const Scenario& s_, const Mat& xr, const std::vector<double>& y_, double rho_,
        const std::vector<double>& rmin_, double vs_, const Weights& w_,
        const PowerSolverOptions& o)
        : s(s_), x_ref(xr), y(y_), rho(rho_), r_min(rmin_), vs(vs_), w(w_), opt(o) {
        n_dev = s.n_devices();
        n_sub = s.n_subcarriers();
        bbar = s.constants.subcarrier_bandwidth_hz();
        n0 = s.constants.noise_psd_w_per_hz;
        p_max = s.constants.p_max_w;
        q = s.constants.taylor_power_q;
        bits.resize(n_dev);
        const double c_tot = s.constants.semcom_bits_total();
        for (std::size_t n = 0; n < n_dev; ++n)
            bits[n] = s.constants.model_upload_bits + rho_ * c_tot;
        caps.resize(n_dev * n_sub);
        for (std::size_t n = 0; n < n_dev; ++n)
            for (std::size_t k = 0; k < n_sub; ++k)
                caps[n * n_sub + k] = cap_coef(xr(n, k), q, p_max);
    }

    const CapCoef& cap(std::size_t n, std::size_t k) const { return caps[n * n_sub + k]; }
    double rbar(double p, double g) const { return p <= 0.0 ? 0.0 : bbar * std::log2(1.0 + p * g / (n0 * bbar)); }
};

struct DemandPoint {
    double x = 0.0;
    double p = 0.0;
    double iota = 0.0;
};

// Stationary (x, p) for one (device, subcarrier) pair at the given multipliers.
// Modes: locked (cap identically zero), incumbent (penalty holds x at 1),
// interior (both first-order conditions), floor (x at the cap-feasibility
// bound, zero power), cap-tight pair.
DemandPoint demand_point(Ctx& ctx, std::size_t n, std::size_t k, double beta_k, double w_n,
                         double lam0) {
    DemandPoint out;
    const CapCoef& cc = ctx.cap(n, k);
    const double g = ctx.s.gains(n, k);
    const double c_x = beta_k - ctx.vs * (2.0 * ctx.x_ref(n, k) - 1.0);
    if (cc.a1 <= 0.0) {
        out.x = c_x >= 0.0 ? 0.0 : 1.0;
        return out;  // locked out at this reference point
    }
    auto cap_at = [&](double x) { return cc.a0 + cc.a1 * x; };
    auto p_wf = [&](double x) {
        if (lam0 <= 0.0) return cap_at(x);
        return w_n * x * ctx.bbar / (lam0 * kLn2) - ctx.n0 * ctx.bbar / g;
    };
    auto snr = [&](double p) { return p * g / (ctx.n0 * ctx.bbar); };

    if (c_x < 0.0) {  // incumbent: objective decreases in x everywhere
        out.x = 1.0;
        out.p = std::min(std::max(p_wf(1.0), 0.0), cap_at(1.0));
        if (p_wf(1.0) > cap_at(1.0))
            out.iota = std::max(0.0, w_n * g / ((1.0 + snr(out.p)) * ctx.n0 * kLn2) - lam0);
        return out;
    }
    double e = c_x / (w_n * ctx.bbar);
    if (e > ctx.opt.exponent_clamp) {
        e = ctx.opt.exponent_clamp;
        ctx.exp_clamped = true;
    }
    const double two_e = std::exp2(e);
    const double p_hat = (two_e - 1.0) * ctx.n0 * ctx.bbar / g;
    const double x_stat = lam0 > 0.0 ? (lam0 * ctx.n0 * kLn2 / (w_n * g)) * two_e
                                     : std::numeric_limits<double>::infinity();
    if (x_stat >= 1.0) {
        out.x = 1.0;
        out.p = std::min(std::max(p_wf(1.0), 0.0), cap_at(1.0));
        if (p_wf(1.0) > cap_at(1.0))
            out.iota = std::max(0.0, w_n * g / ((1.0 + snr(out.p)) * ctx.n0 * kLn2) - lam0);
        return out;
    }
    bool try_cap_pair = false;
    if (x_stat <= cc.lb) {
        const double iota = c_x / cc.a1;
        if (iota + lam0 >= w_n * cc.lb * g / (ctx.n0 * kLn2)) {
            out.x = cc.lb;
            out.iota = iota;
            return out;
        }
        try_cap_pair = true;
    } else if (p_hat <= cap_at(x_stat)) {
        out.x = x_stat;
        out.p = p_hat;
        return out;
    } else {
        try_cap_pair = true;
    }
    (void)try_cap_pair;
    // cap-tight pair: eliminate iota from the two stationarity conditions and
    // solve Phi(x) = 0 on [lb, 1]; Phi is decreasing in x.
    auto phi = [&](double x) {
        const double c = cap_at(x);
        const double sn = snr(c);
        return c_x + cc.a1 * lam0 - cc.a1 * w_n * x * g / ((1.0 + sn) * ctx.n0 * kLn2) -
               w_n * ctx.rbar(c, g);
    };
    if (phi(cc.lb) <= 0.0) {
        out.x = cc.lb;
        out.iota = std::max(0.0, c_x / cc.a1);
        return out;
    }
    if (phi(1.0) >= 0.0) {
        out.x = 1.0;
        out.p = cap_at(1.0);
        out.iota = std::max(0.0, w_n * g / ((1.0 + snr(out.p)) * ctx.n0 * kLn2) - lam0);
        return out;
    }
    double lo = cc.lb, hi = 1.0;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (phi(mid) > 0.0 ? lo : hi) = mid;
    }
    out.x = 0.5 * (lo + hi);
    out.p = cap_at(out.x);
    out.iota = std::max(0.0, w_n * out.x * g / ((1.0 + snr(out.p)) * ctx.n0 * kLn2) - lam0);
    return out;
}

struct DeviceState {
    std::vector<double> x, p, iota;
    double power_total = 0.0;
    double rate = 0.0;
    double mu_power = 0.0;  // multiplier of the per-device total power cap
};

// Self-consistent total power: the coupling price lam0 = 2 nu b y S uses the
// very S the per-subcarrier powers sum to. T(S) is non-increasing, so the
// fixed point is found by bisection. When even S = P_max leaves excess
// demand, the total-power cap binds and its own multiplier mu raises the
// effective power price until the demand sums to exactly P_max.
DeviceState device_pass(Ctx& ctx, std::size_t n, const std::vector<double>& beta, double nu,
                        double lam, double s_warm = 0.0) {
    DeviceState st;
    st.x.resize(ctx.n_sub);
    st.p.resize(ctx.n_sub);
    st.iota.assign(ctx.n_sub, 0.0);
    const double w_n = nu + lam;
    if (ctx.bits[n] <= 0.0 || w_n <= 0.0) return st;  // no traffic -> nothing to send

    auto eval = [&](double price) {
        double total = 0.0;
        for (std::size_t k = 0; k < ctx.n_sub; ++k) {
            DemandPoint d = demand_point(ctx, n, k, beta[k], w_n, price);
            st.x[k] = d.x;
            st.p[k] = d.p;
            st.iota[k] = d.iota;
            total += d.p;
        }
        return total;
    };
    auto lam0_of = [&](double s_guess) { return 2.0 * nu * ctx.bits[n] * ctx.y[n] * s_guess; };

    if (eval(lam0_of(ctx.p_max)) >= ctx.p_max) {
        // cap binds: price up until demand equals the budget exactly
        const double lam0 = lam0_of(ctx.p_max);
        double lo = lam0, hi = std::max(2.0 * lam0, 1e-12);
        int guard = 0;
        while (eval(hi) > ctx.p_max && guard++ < 200) {
            lo = hi;
            hi *= 4.0;
        }
        for (int i = 0; i < 60 && hi - lo > 1e-12 * hi; ++i) {
            const double mid = 0.5 * (lo + hi);
            (eval(mid) > ctx.p_max ? lo : hi) = mid;
        }
        eval(hi);
        st.mu_power = hi - lam0;
    } else {
        // T(S) is non-increasing; bracket the fixed point around the warm guess
        double lo = 0.0, hi = ctx.p_max;
        if (s_warm > 0.0 && s_warm < ctx.p_max) {
            double a = s_warm;
            if (eval(lam0_of(a)) > a) {
                lo = a;
                double b = std::min(2.0 * a, ctx.p_max);
                while (b < ctx.p_max && eval(lam0_of(b)) > b) {
                    lo = b;
                    b = std::min(2.0 * b, ctx.p_max);
                }
                hi = b;
            } else {
                hi = a;
                double b = 0.5 * a;
                while (b > 1e-14 * ctx.p_max && eval(lam0_of(b)) <= b) {
                    hi = b;
                    b *= 0.5;
                }
                lo = b > 1e-14 * ctx.p_max ? b : 0.0;
            }
        }
        for (int i = 0; i < 60 && hi - lo > 1e-13 * ctx.p_max; ++i) {
            const double mid = 0.5 * (lo + hi);
            (eval(lam0_of(mid)) > mid ? lo : hi) = mid;
        }
        eval(lam0_of(0.5 * (lo + hi)));
    }
    for (std::size_t k = 0; k < ctx.n_sub; ++k) {
        st.power_total += st.p[k];
        st.rate += st.x[k] * ctx.rbar(st.p[k], ctx.s.gains(n, k));
    }
    return st;
}

// lambda resolution: zero when the floor is already met; otherwise climb the
// waterfilling channel while it still raises the rate. lambda_prev warm-starts
// the bracket.
double resolve_lambda(Ctx& ctx, std::size_t n, const std::vector<double>& beta, double nu,
                      DeviceState& st, double lambda_prev = 0.0) {
    st = device_pass(ctx, n, beta, nu, 0.0);
    if (ctx.bits[n] <= 0.0) return 0.0;
    if (st.rate >= ctx.r_min[n] * (1.0 - 1e-12)) return 0.0;
    double s_warm = st.power_total;
    auto pass = [&](double lam) {
        DeviceState t = device_pass(ctx, n, beta, nu, lam, s_warm);
        s_warm = t.power_total;
        return t;
    };
    double lo = 0.0, hi = lambda_prev > 0.0 ? lambda_prev : std::max(nu, 1e-12);
    double r_prev = st.rate;
    bool bracketed = false;
    bool saturated = false;
    for (int i = 0; i < 90; ++i) {
        DeviceState t = pass(hi);
        if (t.rate >= ctx.r_min[n] * (1.0 - 1e-9)) {
            bracketed = true;
            break;
        }
        if (t.rate <= r_prev * (1.0 + 1e-12) && i > 0) {
            saturated = true;  // rate ceiling reached below the floor
            break;
        }
        r_prev = t.rate;
        lo = hi;
        hi *= 4.0;
    }
    if (saturated || !bracketed) {
        // keep whichever side serves the floor better; the budget multiplier
        // inside the device pass already caps the climb, so the saturated
        // state is the best this device can do at the current prices
        st = pass(hi);
        if (saturated && st.rate > ctx.r_min[n] * (1.0 - 1e-6)) return hi;
        DeviceState zero = device_pass(ctx, n, beta, nu, 0.0);
        if (zero.rate >= st.rate) {
            st = zero;
            return 0.0;
        }
        return hi;
    }
    // shrink the left edge toward the warm value before bisecting
    if (lambda_prev > 0.0 && lo == 0.0) {
        double probe = 0.5 * hi;
        for (int i = 0; i < 8 && probe > 1e-14 * hi; ++i) {
            DeviceState t = pass(probe);
            if (t.rate >= ctx.r_min[n] * (1.0 - 1e-9)) hi = probe;
            else {
                lo = probe;
                break;
            }
            probe *= 0.5;
        }
    }
    for (int i = 0; i < 50 && hi - lo > 1e-11 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        DeviceState t = pass(mid);
        (t.rate >= ctx.r_min[n] * (1.0 - 1e-9) ? hi : lo) = mid;
    }
    st = pass(hi);
    return hi;
}

// A device can never exceed the rate of owning all its usable subcarriers at
// the cap; floors above that are hopeless regardless of multipliers.
void check_floor_reachable(Ctx& ctx) {
    for (std::size_t n = 0; n < ctx.n_dev; ++n) {
        if (ctx.bits[n] <= 0.0 || ctx.r_min[n] <= 0.0) continue;
        double best = 0.0;
        for (std::size_t k = 0; k < ctx.n_sub; ++k) {
            const CapCoef& cc = ctx.cap(n, k);
            if (cc.a1 <= 0.0) continue;
            const double cap1 = std::max(0.0, cc.a0 + cc.a1);
            best += ctx.rbar(std::min(cap1, ctx.p_max), ctx.s.gains(n, k));
        }
        if (best < ctx.r_min[n] * (1.0 - 1e-9))
            throw InfeasibleError("rate floor unreachable for device " + std::to_string(n) +
                                  " even at the power caps");
    }
}

// Epigraph residual of one device at its resolved floor multiplier.
double epigraph_phi(Ctx& ctx, std::size_t n, const std::vector<double>& beta, double nu,
                    double lambda_prev, DeviceState& st, double* lam_out) {
    const double lam = resolve_lambda(ctx, n, beta, nu, st, lambda_prev);
    if (lam_out) *lam_out = lam;
    const double sigma = std::cbrt(nu * ctx.bits[n] / (2.0 * ctx.y[n] * ctx.w.kappa1));
    const double lhs = (st.power_total * st.power_total * ctx.y[n] +
                        1.0 / (4.0 * ctx.y[n] * sigma * sigma)) *
                       ctx.bits[n];
    return lhs - st.rate;
}

// Bisection on the epigraph equation around a warm bracket; falls back to the
// bracket's best endpoint when no sign change is visible (transient states).
double refine_nu(Ctx& ctx, std::size_t n, const std::vector<double>& beta, double nu0,
                 double& lam, DeviceState& st, bool* exact) {
    if (exact) *exact = false;
    if (ctx.bits[n] <= 0.0 || nu0 <= 0.0 || !(ctx.w.kappa1 > 0.0)) return nu0;
    double phi0 = epigraph_phi(ctx, n, beta, nu0, lam, st, &lam);
    double lo = 0.0, hi = 0.0;
    DeviceState st_try;
    if (phi0 > 0.0) {
        lo = nu0;
        double v = nu0;
        for (int i = 0; i < 10; ++i) {
            v *= 2.0;
            double lam_try = lam;
            const double ph = epigraph_phi(ctx, n, beta, v, lam_try, st_try, &lam_try);
            if (ph <= 0.0) {
                hi = v;
                break;
            }
            lo = v;
        }
        if (hi == 0.0) return nu0;  // no crossing in the window: keep the anchor
    } else {
        hi = nu0;
        double v = nu0;
        for (int i = 0; i < 10; ++i) {
            v *= 0.5;
            double lam_try = lam;
            const double ph = epigraph_phi(ctx, n, beta, v, lam_try, st_try, &lam_try);
            if (ph > 0.0) {
                lo = v;
                break;
            }
            hi = v;
        }
        if (lo == 0.0) return nu0;
    }
    for (int i = 0; i < 60 && hi / lo > 1.0 + 1e-13; ++i) {
        const double mid = std::sqrt(lo * hi);
        double lam_try = lam;
        const double ph = epigraph_phi(ctx, n, beta, mid, lam_try, st_try, &lam_try);
        (ph > 0.0 ? lo : hi) = mid;
    }
    const double nu = std::sqrt(lo * hi);
    epigraph_phi(ctx, n, beta, nu, lam, st, &lam);
    if (exact) *exact = true;
    return nu;
}

double anchored_nu(Ctx& ctx, std::size_t n, double s_total, double rate, double rate_floor_scale) {
    if (ctx.bits[n] <= 0.0) return 0.0;
    double r = rate, st = s_total;
    if (rate < 1e-3 * rate_floor_scale || s_total <= 0.0) {
        // starved device: anchor at a revival scale so the demand stays alive
        r = std::max(rate, 1e-3 * rate_floor_scale);
        st = std::max(s_total, 1e-3 * ctx.p_max);
    }
    const double sigma = st * ctx.bits[n] / std::max(r, 1e-30);
    return 2.0 * ctx.y[n] * ctx.w.kappa1 * sigma * sigma * sigma / ctx.bits[n];
}

double merit_g(Ctx& ctx, const Mat& x, const Mat& p) {
    // kappa1 * sum S b / r + vs * sum x(1-x); +inf when a traffic device is mute
    double tot = 0.0;
    for (std::size_t n = 0; n < ctx.n_dev; ++n) {
        double r = 0.0, s = 0.0;
        for (std::size_t k = 0; k < ctx.n_sub; ++k) {
            r += x(n, k) * ctx.rbar(p(n, k), ctx.s.gains(n, k));
            s += p(n, k);
            tot += ctx.vs * x(n, k) * (1.0 - x(n, k));
        }
        if (ctx.bits[n] <= 0.0) continue;
        if (r <= 0.0) return std::numeric_limits<double>::infinity();
        tot += ctx.w.kappa1 * s * ctx.bits[n] / r;
    }
    return tot;
}

void project_primal(Ctx& ctx, Mat& x, Mat& p) {
    for (std::size_t n = 0; n < ctx.n_dev; ++n) {
        for (std::size_t k = 0; k < ctx.n_sub; ++k) {
            const CapCoef& cc = ctx.cap(n, k);
            if (cc.a1 <= 0.0) {
                x(n, k) = std::clamp(x(n, k), 0.0, 1.0);
                p(n, k) = 0.0;
            } else {
                x(n, k) = std::clamp(x(n, k), cc.lb, 1.0);
            }
        }
    }
    for (std::size_t k = 0; k < ctx.n_sub; ++k) {
        double lb_sum = 0.0, tot = 0.0;
        for (std::size_t n = 0; n < ctx.n_dev; ++n) {
            lb_sum += ctx.cap(n, k).a1 > 0.0 ? ctx.cap(n, k).lb : 0.0;
            tot += x(n, k);
        }
        if (tot > 1.0) {
            const double free = tot - lb_sum;
            const double need = tot - 1.0;
            if (free > 1e-15) {
                const double shrink = 1.0 - need / free;
                for (std::size_t n = 0; n < ctx.n_dev; ++n) {
                    const double lb = ctx.cap(n, k).a1 > 0.0 ? ctx.cap(n, k).lb : 0.0;
                    x(n, k) = lb + (x(n, k) - lb) * std::max(shrink, 0.0);
                }
            }
        }
    }
    for (std::size_t n = 0; n < ctx.n_dev; ++n) {
        double tot = 0.0;
        for (std::size_t k = 0; k < ctx.n_sub; ++k) {
            const CapCoef& cc = ctx.cap(n, k);
            const double cap = cc.a1 <= 0.0 ? 0.0 : std::max(0.0, cc.a0 + cc.a1 * x(n, k));
            p(n, k) = std::clamp(p(n, k), 0.0, cap);
            tot += p(n, k);
        }
        if (tot > ctx.p_max && tot > 0.0) {
            const double sc = ctx.p_max / tot;
            for (std::size_t k = 0; k < ctx.n_sub; ++k) p(n, k) *= sc;
        }
    }
}

// Raise a starved device's powers to exactly meet the rate floor: bisect the
// smallest uniform scale factor whose cap-projected powers reach the floor.
void repair_floors(Ctx& ctx, Mat& x, Mat& p) {
    for (std::size_t n = 0; n < ctx.n_dev; ++n) {
        if (ctx.bits[n] <= 0.0 || ctx.r_min[n] <= 0.0) continue;
        auto rate_at = [&](double scale) {
            double r = 0.0, tot = 0.0;
            for (std::size_t k = 0; k < ctx.n_sub; ++k) {
                const CapCoef& cc = ctx.cap(n, k);
                if (cc.a1 <= 0.0) continue;
                const double cap = std::max(0.0, cc.a0 + cc.a1 * x(n, k));
                tot += std::min(std::max(p(n, k), 1e-7 * ctx.p_max) * scale, cap);
            }
            if (tot > ctx.p_max) return -1.0;  // budget exceeded at this scale
            for (std::size_t k = 0; k < ctx.n_sub; ++k) {
                const CapCoef& cc = ctx.cap(n, k);
                if (cc.a1 <= 0.0) continue;
                const double cap = std::max(0.0, cc.a0 + cc.a1 * x(n, k));
                const double pk = std::min(std::max(p(n, k), 1e-7 * ctx.p_max) * scale, cap);
                r += x(n, k) * ctx.rbar(pk, ctx.s.gains(n, k));
            }
            return r;
        };
        if (rate_at(1.0) >= ctx.r_min[n]) continue;
        // expand to bracket the floor; a budget-exceeding scale caps the hunt
        double lo = 1.0, hi = 2.0;
        bool ok = false;
        for (int i = 0; i < 60; ++i) {
            const double r = rate_at(hi);
            if (r >= ctx.r_min[n]) {
                ok = true;
                break;
            }
            if (r < 0.0) break;
            lo = hi;
            hi *= 2.0;
        }
        if (!ok) {
            // ride the budget boundary: scale everything onto sum p = P_max
            double tot = 0.0;
            for (std::size_t k = 0; k < ctx.n_sub; ++k) tot += p(n, k);
            if (tot <= 0.0)
                throw InfeasibleError("rate floor unreachable for device " + std::to_string(n));
            const double sc = ctx.p_max / tot;
            double r = 0.0;
            for (std::size_t k = 0; k < ctx.n_sub; ++k) {
                const CapCoef& cc = ctx.cap(n, k);
                if (cc.a1 <= 0.0) continue;
                const double cap = std::max(0.0, cc.a0 + cc.a1 * x(n, k));
                p(n, k) = std::min(p(n, k) * sc, cap);
                r += x(n, k) * ctx.rbar(p(n, k), ctx.s.gains(n, k));
            }
            if (r < ctx.r_min[n] * (1.0 - 1e-9))
                throw InfeasibleError("rate floor unreachable for device " + std::to_string(n) +
                                      " even at the power caps");
            continue;
        }
        for (int i = 0; i < 70; ++i) {
            const double mid = 0.5 * (lo + hi);
            const double r = rate_at(mid);
            if (r >= ctx.r_min[n] || r < 0.0) hi = mid;
            else lo = mid;
        }
        for (std::size_t k = 0; k < ctx.n_sub; ++k) {
            const CapCoef& cc = ctx.cap(n, k);
            if (cc.a1 <= 0.0) continue;
            const double cap = std::max(0.0, cc.a0 + cc.a1 * x(n, k));
            p(n, k) = std::min(std::max(p(n, k), 1e-7 * ctx.p_max) * hi, cap);
        }
    }
}

// Fallback: monotone projected descent on the true penalized objective with a
// rate-floor penalty, then feasibility repair.
void descent_fallback(Ctx& ctx, Mat& x, Mat& p) {
    project_primal(ctx, x, p);
    double floor_w = 10.0 * std::max(1.0, std::abs(merit_g(ctx, x, p)) < 1e300
                                              ? std::abs(merit_g(ctx, x, p))
                                              : 1.0);
    auto value = [&](const Mat& xx, const Mat& pp) {
        double v = merit_g(ctx, xx, pp);
        if (!std::isfinite(v)) return v;
        for (std::size_t n = 0; n < ctx.n_dev; ++n) {
            if (ctx.bits[n] <= 0.0) continue;
            double r = 0.0;
            for (std::size_t k = 0; k < ctx.n_sub; ++k)
                r += xx(n, k) * ctx.rbar(pp(n, k), ctx.s.gains(n, k));
            if (r < ctx.r_min[n]) {
                const double d = (ctx.r_min[n] - r) / std::max(ctx.r_min[n], 1.0);
                v += floor_w * d * d;
            }
        }
        return v;
    };
    double f = value(x, p);
    double step = 0.3;
    int escalations = 0;
    Mat gx(ctx.n_dev, ctx.n_sub), gp(ctx.n_dev, ctx.n_sub);
    for (int it = 0; it < ctx.opt.descent_max_iters; ++it) {
        // analytic gradient
        for (std::size_t n = 0; n < ctx.n_dev; ++n) {
            double r = 0.0, s_tot = 0.0;
            for (std::size_t k = 0; k < ctx.n_sub; ++k) {
                r += x(n, k) * ctx.rbar(p(n, k), ctx.s.gains(n, k));
                s_tot += p(n, k);
            }
            double dpen = 0.0;
            const bool traffic = ctx.bits[n] > 0.0 && r > 0.0;
            if (traffic && r < ctx.r_min[n])
                dpen = -2.0 * floor_w * (ctx.r_min[n] - r) / (std::max(ctx.r_min[n], 1.0) * std::max(ctx.r_min[n], 1.0));
            for (std::size_t k = 0; k < ctx.n_sub; ++k) {
                const double g = ctx.s.gains(n, k);
                const double rb = ctx.rbar(p(n, k), g);
                const double rbp = g / (ctx.n0 * kLn2 * (1.0 + p(n, k) * g / (ctx.n0 * ctx.bbar)));
                double gxv = ctx.vs * (1.0 - 2.0 * x(n, k));
                double gpv = 0.0;
                if (traffic) {
                    const double coef = ctx.w.kappa1 * ctx.bits[n];
                    gxv += -coef * s_tot * rb / (r * r) + dpen * rb;
                    gpv += coef * (r - s_tot * x(n, k) * rbp) / (r * r) + dpen * x(n, k) * rbp;
                }
                gx(n, k) = gxv;
                gp(n, k) = gpv;
            }
        }
        double nx = 1e-300, np = 1e-300;
        for (double v : gx.data()) nx = std::max(nx, std::abs(v));
        for (double v : gp.data()) np = std::max(np, std::abs(v));
        Mat x2 = x, p2 = p;
        for (std::size_t i = 0; i < x2.data().size(); ++i) {
            x2.data()[i] -= step / nx * gx.data()[i];
            p2.data()[i] -= step * ctx.p_max / np * gp.data()[i];
        }
        project_primal(ctx, x2, p2);
        const double f2 = value(x2, p2);
        if (f2 < f - 1e-15) {
            x = x2;
            p = p2;
            f = f2;
            step = std::min(step * 1.3, 1.0);
        } else {
            step *= 0.5;
            if (step < 1e-12) {
                bool floors_ok = true;
                for (std::size_t n = 0; n < ctx.n_dev; ++n) {
                    if (ctx.bits[n] <= 0.0) continue;
                    double r = 0.0;
                    for (std::size_t k = 0; k < ctx.n_sub; ++k)
                        r += x(n, k) * ctx.rbar(p(n, k), ctx.s.gains(n, k));
                    if (r < ctx.r_min[n] * (1.0 - 1e-9)) floors_ok = false;
                }
                if (!floors_ok && escalations < 8) {
                    floor_w *= 10.0;
                    ++escalations;
                    f = value(x, p);
                    step = 1e-3;
                } else {
                    break;
                }
            }
        }
    }
    repair_floors(ctx, x, p);
}

// beta, nu, lambda, iota recovered from a primal point (used after the
// fallback; exact at matched quadratic-transform weights).
void recover_multipliers(Ctx& ctx, const Mat& x, const Mat& p, ResolveResult& rr) {
    rr.multipliers.beta.assign(ctx.n_sub, 0.0);
    rr.multipliers.lambda.assign(ctx.n_dev, 0.0);
    rr.multipliers.nu.assign(ctx.n_dev, 0.0);
    rr.multipliers.iota = Mat(ctx.n_dev, ctx.n_sub);
    rr.sigma.assign(ctx.n_dev, 0.0);
    std::vector<double> w_eff(ctx.n_dev, 0.0);
    for (std::size_t n = 0; n < ctx.n_dev; ++n) {
        if (ctx.bits[n] <= 0.0) continue;
        double r = 0.0, s_tot = 0.0;
        for (std::size_t k = 0; k < ctx.n_sub; ++k) {
            r += x(n, k) * ctx.rbar(p(n, k), ctx.s.gains(n, k));
            s_tot += p(n, k);
        }
        if (r <= 0.0) continue;
        rr.sigma[n] = s_tot * ctx.bits[n] / r;
        rr.multipliers.nu[n] = 2.0 * ctx.y[n] * ctx.w.kappa1 * rr.sigma[n] * rr.sigma[n] * rr.sigma[n] / ctx.bits[n];
        // effective rate weight from the power stationarity on an interior entry
        const double lam0 = 2.0 * rr.multipliers.nu[n] * ctx.bits[n] * ctx.y[n] * s_tot;
        double west = 0.0;
        int cnt = 0;
        for (std::size_t k = 0; k < ctx.n_sub; ++k) {
            const CapCoef& cc = ctx.cap(n, k);
            if (cc.a1 <= 0.0 || p(n, k) <= 1e-15) continue;
            const double cap = cc.a0 + cc.a1 * x(n, k);
            if (p(n, k) > cap * (1.0 - 1e-9)) continue;  // cap-tight: iota unknown yet
            const double sn = p(n, k) * ctx.s.gains(n, k) / (ctx.n0 * ctx.bbar);
            west += lam0 * (1.0 + sn) * ctx.n0 * kLn2 / (x(n, k) * ctx.s.gains(n, k));
            ++cnt;
        }
        w_eff[n] = cnt > 0 ? west / cnt : rr.multipliers.nu[n];
        rr.multipliers.lambda[n] = std::max(0.0, w_eff[n] - rr.multipliers.nu[n]);
        if (r > ctx.r_min[n] * (1.0 + 1e-6)) rr.multipliers.lambda[n] = 0.0;
        for (std::size_t k = 0; k < ctx.n_sub; ++k) {
            const CapCoef& cc = ctx.cap(n, k);
            if (cc.a1 <= 0.0) continue;
            const double cap = cc.a0 + cc.a1 * x(n, k);
            if (p(n, k) > 1e-15 && p(n, k) >= cap * (1.0 - 1e-9)) {
                const double sn = p(n, k) * ctx.s.gains(n, k) / (ctx.n0 * ctx.bbar);
                rr.multipliers.iota(n, k) = std::max(
                    0.0, w_eff[n] * x(n, k) * ctx.s.gains(n, k) / ((1.0 + sn) * ctx.n0 * kLn2) - lam0);
            }
        }
    }
    for (std::size_t k = 0; k < ctx.n_sub; ++k) {
        double best = 0.0;
        for (std::size_t n = 0; n < ctx.n_dev; ++n) {
            const CapCoef& cc = ctx.cap(n, k);
            if (cc.a1 <= 0.0 || ctx.bits[n] <= 0.0) continue;
            if (x(n, k) <= cc.lb + 1e-7 || x(n, k) >= 1.0 - 1e-7) continue;
            const double w_n = std::max(w_eff[n], rr.multipliers.nu[n]);
            const double rb = ctx.rbar(p(n, k), ctx.s.gains(n, k));
            best = std::max(best, w_n * rb + ctx.vs * (2.0 * ctx.x_ref(n, k) - 1.0) +
                                      rr.multipliers.iota(n, k) * cc.a1);
        }
        rr.multipliers.beta[k] = std::max(0.0, best);
    }
}

}  // namespace

std::vector<double> rate_floor(const Scenario& s, double rho, double deadline_s,
                               const std::vector<double>& freq_hz) {
    const auto& c = s.constants;
    std::vector<double> out(s.n_devices(), 0.0);
    const double c_tot = c.semcom_bits_total();
    for (std::size_t n = 0; n < s.n_devices(); ++n) {
        double floor = 0.0;
        if (rho * c_tot > 0.0) floor = rho * c_tot / c.t_semcom_max_s;
        if (c.model_upload_bits > 0.0) {
            const double work = c.local_iterations * s.cycles_per_sample[n] * c.samples_per_device;
            const double t_cmp = work / freq_hz[n];
            if (deadline_s <= t_cmp)
                throw InfeasibleError("rate_floor: FL deadline unreachable for device " +
                                      std::to_string(n));
            floor = std::max(floor, c.model_upload_bits / (deadline_s - t_cmp));
        }
        out[n] = floor;
    }
    return out;
}

double penalty_term(const Mat& assign, const Mat& assign_ref) {
    double j = 0.0;
    for (std::size_t n = 0; n < assign.rows(); ++n)
        for (std::size_t k = 0; k < assign.cols(); ++k) {
            const double xr = assign_ref(n, k);
            j += (2.0 * xr - 1.0) * (assign(n, k) - xr) + xr * (xr - 1.0);
        }
    return j;
}

double power_from_multipliers(const Scenario& s, std::size_t n, std::size_t k, double beta_k,
                              double iota_nk, double lambda_n, double nu_n, double x_ref,
                              double varsigma, bool* clamped) {
    const double bbar = s.constants.subcarrier_bandwidth_hz();
    const double n0 = s.constants.noise_psd_w_per_hz;
    const int q = s.constants.taylor_power_q;
    const double xq1 = q == 1 ? 1.0 : std::pow(x_ref, q - 1);
    const double w = lambda_n + nu_n;
    if (!(w > 0.0)) throw ConfigError("power_from_multipliers: lambda + nu must be positive");
    double e = (-varsigma * (2.0 * x_ref - 1.0) + beta_k -
                iota_nk * static_cast<double>(q) * xq1 * s.constants.p_max_w) /
               (w * bbar);
    bool clip = false;
    if (e > 600.0) {
        e = 600.0;
        clip = true;
    }
    if (clamped) *clamped = clip;
    const double p = (std::exp2(e) - 1.0) * n0 * bbar / s.gains(n, k);
    return std::max(p, 0.0);
}

double assign_fraction(const Scenario& s, std::size_t n, std::size_t k, double iota_nk,
                       double lambda_n, double nu_n, double p_nk, double power_total, double y_n,
                       double rho) {
    const double bbar = s.constants.subcarrier_bandwidth_hz();
    const double n0 = s.constants.noise_psd_w_per_hz;
    const double g = s.gains(n, k);
    const double w = lambda_n + nu_n;
    if (!(w > 0.0) || !(g > 0.0))
        throw ConfigError("assign_fraction: requires lambda + nu > 0 and positive gain");
    const double bits = s.constants.model_upload_bits + rho * s.constants.semcom_bits_total();
    const double x_hat = (iota_nk + 2.0 * nu_n * bits * y_n * power_total) *
                         (1.0 + p_nk * g / (n0 * bbar)) * n0 * kLn2 / (w * g);
    return std::clamp(x_hat, 0.0, 1.0);
}

double sigma_from_nu(const Scenario& s, std::size_t n, double nu_n, double y_n, double rho,
                     double kappa1) {
    (void)n;
    if (!(kappa1 > 0.0)) throw ConfigError("sigma_from_nu: kappa1 must be positive");
    const double bits = s.constants.model_upload_bits + rho * s.constants.semcom_bits_total();
    return std::cbrt(nu_n * bits / (2.0 * y_n * kappa1));
}

ResolveResult resolve_multipliers(const Scenario& s, const Mat& assign_ref,
                                  const std::vector<double>& y, double rho,
                                  const std::vector<double>& r_min, double varsigma,
                                  const Weights& w, const Mat& power_init, const Mat& assign_init,
                                  const PowerSolverOptions& opt, const ResolveWarmStart* warm) {
    Ctx ctx(s, assign_ref, y, rho, r_min, varsigma, w, opt);
    const std::size_t N = ctx.n_dev, K = ctx.n_sub;
    check_floor_reachable(ctx);

    ResolveResult rr;
    rr.multipliers.beta.assign(K, 0.0);
    rr.multipliers.lambda.assign(N, 0.0);
    rr.multipliers.nu.assign(N, 0.0);
    rr.multipliers.iota = Mat(N, K);
    rr.power = power_init;
    rr.assign = assign_init;
    rr.sigma.assign(N, 0.0);

    Mat x = assign_init, p = power_init;
    std::vector<double> beta(K, 0.0), nus(N, 0.0), lams(N, 0.0);

    // revival reference rates (uniform power over usable subcarriers)
    std::vector<double> r_rev(N, 0.0);
    for (std::size_t n = 0; n < N; ++n) {
        std::size_t usable = 0;
        for (std::size_t k = 0; k < K; ++k)
            if (ctx.cap(n, k).a1 > 0.0) ++usable;
        if (usable == 0) continue;
        const double pu = ctx.p_max / static_cast<double>(usable);
        for (std::size_t k = 0; k < K; ++k)
            if (ctx.cap(n, k).a1 > 0.0)
                r_rev[n] += std::max(assign_ref(n, k), 0.25) * ctx.rbar(pu, s.gains(n, k));
    }

    auto rates_and_totals = [&](const Mat& xx, const Mat& pp, std::vector<double>& r,
                                std::vector<double>& st) {
        for (std::size_t n = 0; n < N; ++n) {
            double rn = 0.0, sn = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                rn += xx(n, k) * ctx.rbar(pp(n, k), s.gains(n, k));
                sn += pp(n, k);
            }
            r[n] = rn;
            st[n] = sn;
        }
    };

    std::vector<double> r(N), s_tot(N);
    rates_and_totals(x, p, r, s_tot);
    for (std::size_t n = 0; n < N; ++n) nus[n] = anchored_nu(ctx, n, s_tot[n], r[n], r_rev[n]);
    bool warm_started = false;
    if (warm && warm->beta.size() == K && warm->nu.size() == N) {
        beta = warm->beta;
        nus = warm->nu;
        lams = warm->lambda;
        warm_started = true;
    }

    std::vector<DeviceState> states(N);
    bool stabilized = false;
    int sweep = 0;
    double best_change = std::numeric_limits<double>::infinity();
    int stalled = 0;
    int refine_sweeps = 0;
    bool refine_phase = false;
    const int min_sweeps = warm_started ? 2 : opt.ignite_sweeps + 8;
    const bool skip_sweeps = warm && warm->prefer_fallback;
    for (; !skip_sweeps && sweep < opt.max_sweeps; ++sweep) {
        rates_and_totals(x, p, r, s_tot);
        if (!refine_phase && (sweep >= opt.ignite_sweeps || warm_started)) {
            for (std::size_t n = 0; n < N; ++n) {
                const double anchor = anchored_nu(ctx, n, s_tot[n], r[n], r_rev[n]);
                if (anchor > 0.0 && nus[n] > 0.0)
                    nus[n] = std::exp((1.0 - opt.anchor_alpha) * std::log(nus[n]) +
                                      opt.anchor_alpha * std::log(anchor));
                else
                    nus[n] = anchor;
            }
        }
        // device pass with floor resolution: anchored nu while the prices are
        // still moving, exact epigraph bisection in the refinement phase
        for (std::size_t n = 0; n < N; ++n) {
            if (refine_phase)
                nus[n] = refine_nu(ctx, n, beta, nus[n], lams[n], states[n], nullptr);
            else
                lams[n] = resolve_lambda(ctx, n, beta, nus[n], states[n], lams[n]);
        }

        // health: floors met and quadratic-transform mismatch bounded
        std::vector<bool> healthy(N, false);
        for (std::size_t n = 0; n < N; ++n) {
            if (ctx.bits[n] <= 0.0) {
                healthy[n] = true;
                continue;
            }
            const double rn = states[n].rate;
            if (rn <= 0.0 || rn < ctx.r_min[n] * (1.0 - 1e-9)) continue;
            const double u = states[n].power_total * states[n].power_total * ctx.y[n] * ctx.bits[n];
            healthy[n] = u > 0.0 && (u / rn + rn / (4.0 * u) - 1.0) < 0.5;
        }

        // beta step: health-gated market clearing on the (increasing) demand
        double beta_change = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            std::vector<std::size_t> users;
            for (std::size_t n = 0; n < N; ++n)
                if (ctx.cap(n, k).a1 > 0.0 && ctx.bits[n] > 0.0) users.push_back(n);
            double target = 0.0;
            if (!users.empty()) {
                auto sum_x = [&](double bk) {
                    double t = 0.0;
                    for (std::size_t n : users) {
                        const double w_n = nus[n] + lams[n];
                        const double se = !healthy[n] ? std::max(states[n].power_total, 0.1 * ctx.p_max)
                                                      : states[n].power_total;
                        const double lam0 = 2.0 * nus[n] * ctx.bits[n] * ctx.y[n] * se;
                        t += demand_point(ctx, n, k, bk, w_n, lam0).x;
                    }
                    return t;
                };
                const double s0 = sum_x(0.0);
                bool all_healthy = true;
                for (std::size_t n : users) all_healthy = all_healthy && healthy[n];
                if (s0 <= 1.0 + 1e-9 && all_healthy) {
                    target = 0.0;
                } else if (s0 <= 1.0 + 1e-9) {
                    // ignite: smallest price at which demand fills the subcarrier
                    double lo = 0.0, hi = std::max(beta[k], 1e-6);
                    int cnt = 0;
                    while (sum_x(hi) < 1.0 && cnt++ < 200) {
                        lo = hi;
                        hi = hi * 2.0 + 1e-6;
                    }
                    if (cnt >= 200) {
                        target = 0.0;
                    } else {
                        for (int i = 0; i < 60; ++i) {
                            const double mid = 0.5 * (lo + hi);
                            (sum_x(mid) < 1.0 ? lo : hi) = mid;
                        }
                        target = 0.5 * (lo + hi);
                    }
                } else {
                    // oversubscribed: shed through the incumbent jump if present
                    double jump = 0.0;
                    for (std::size_t n : users)
                        jump = std::max(jump, varsigma * (2.0 * assign_ref(n, k) - 1.0));
                    double lo = 0.0, hi = std::max(jump, 1e-9);
                    if (sum_x(hi) < 1.0) {
                        for (int i = 0; i < 60; ++i) {
                            const double mid = 0.5 * (lo + hi);
                            (sum_x(mid) < 1.0 ? hi : lo) = mid;
                        }
                        target = 0.5 * (lo + hi);
                    } else {
                        target = beta[k];  // structural contention; the tie split will settle it
                    }
                }
            }
            const double nb = beta[k] + opt.damp * (target - beta[k]);
            if (std::getenv("FEDALLOC_SWEEP_DEBUG") && std::abs(target - beta[k]) > 1e-3)
                std::fprintf(stderr, "  k=%zu: beta %.4e -> target %.4e\n", k, beta[k], target);
            beta_change = std::max(beta_change, std::abs(nb - beta[k]));
            beta[k] = nb;
        }

        // damped primal refresh
        double x_change = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            for (std::size_t k = 0; k < K; ++k) {
                x_change = std::max(x_change, std::abs(states[n].x[k] - x(n, k)));
                x(n, k) += opt.damp * (states[n].x[k] - x(n, k));
                p(n, k) += opt.damp * (states[n].p[k] - p(n, k));
            }
        }
        const double beta_scale = 1e-30 + *std::max_element(beta.begin(), beta.end());
        const double change = std::max(x_change, beta_change / beta_scale);
        if (std::getenv("FEDALLOC_SWEEP_DEBUG"))
            std::fprintf(stderr, "sweep %d phase=%d change=%.3e x_ch=%.3e b_ch=%.3e\n", sweep,
                         refine_phase ? 1 : 0, change, x_change, beta_change / beta_scale);
        const bool settled = change < opt.sweep_tol && sweep >= min_sweeps;
        bool stall_break = false;
        if (change < best_change * (1.0 - 1e-3)) {
            best_change = change;
            stalled = 0;
        } else if (++stalled >= 25 && sweep >= min_sweeps) {
            stall_break = change < 1e-5;
            if (!stall_break) break;  // diverging; audit will reject
        }
        if (settled || stall_break) {
            if (!refine_phase) {
                // prices settled at anchored multipliers: switch to the exact
                // per-device epigraph roots and let beta co-adapt
                refine_phase = true;
                best_change = std::numeric_limits<double>::infinity();
                stalled = 0;
                refine_sweeps = sweep;
                continue;
            }
            stabilized = true;
            ++sweep;
            break;
        }
        if (refine_phase && sweep - refine_sweeps > 30) {
            stabilized = change < 1e-5;
            ++sweep;
            break;
        }
    }
    rr.sweeps = sweep;

    // final undamped primal at the refined multipliers + tie split
    for (std::size_t n = 0; n < N; ++n) {
        nus[n] = refine_nu(ctx, n, beta, nus[n], lams[n], states[n], nullptr);
        for (std::size_t k = 0; k < K; ++k) {
            x(n, k) = states[n].x[k];
            p(n, k) = states[n].p[k];
            rr.multipliers.iota(n, k) = states[n].iota[k];
        }
    }
    for (std::size_t k = 0; k < K; ++k) {
        double tot = x.col_sum(k);
        if (tot > 1.0 + 1e-12) {
            double lb_sum = 0.0;
            for (std::size_t n = 0; n < N; ++n)
                lb_sum += ctx.cap(n, k).a1 > 0.0 ? ctx.cap(n, k).lb : 0.0;
            const double free = tot - lb_sum;
            if (free > 1e-15) {
                const double shrink = std::max(0.0, 1.0 - (tot - 1.0) / free);
                for (std::size_t n = 0; n < N; ++n) {
                    const double lb = ctx.cap(n, k).a1 > 0.0 ? ctx.cap(n, k).lb : 0.0;
                    const double nx = lb + (x(n, k) - lb) * shrink;
                    if (nx < x(n, k)) {
                        x(n, k) = nx;
                        const CapCoef& cc = ctx.cap(n, k);
                        const double cap = cc.a1 <= 0.0 ? 0.0 : std::max(0.0, cc.a0 + cc.a1 * nx);
                        p(n, k) = std::min(p(n, k), cap);
                    }
                }
            }
        }
    }

    // validity audit of the fast path
    bool valid = stabilized && !skip_sweeps;
    const char* why = (!stabilized) ? "unstabilized" : (valid ? "" : "skip");
    rates_and_totals(x, p, r, s_tot);
    for (std::size_t n = 0; n < N; ++n) {
        if (ctx.bits[n] <= 0.0) continue;
        if (r[n] < ctx.r_min[n] * (1.0 - 1e-6)) {
            valid = false;
            why = "floor";
            if (std::getenv("FEDALLOC_AUDIT_DEBUG"))
                std::fprintf(stderr, "  dev %zu: r=%.8g rmin=%.8g miss=%.3g lam=%.3g nu=%.3g S=%.4g\n", n,
                             r[n], ctx.r_min[n], 1.0 - r[n] / ctx.r_min[n], lams[n], nus[n], s_tot[n]);
        }
        if (s_tot[n] > ctx.p_max * (1.0 + 1e-9)) { valid = false; why = "pcap"; }
    }
    for (std::size_t k = 0; k < K && valid; ++k)
        if (x.col_sum(k) > 1.0 + 1e-9) { valid = false; why = "colsum"; }
    if (!valid && std::getenv("FEDALLOC_AUDIT_DEBUG"))
        std::fprintf(stderr, "audit failed: %s\n", why);

    if (!valid) {
        rr.fallback_used = true;
        x = assign_init;
        p = power_init;
        descent_fallback(ctx, x, p);
        recover_multipliers(ctx, x, p, rr);
        rr.power = p;
        rr.assign = x;
        rr.stabilized = true;
        rr.exponent_clamped = ctx.exp_clamped;
        return rr;
    }

    rr.stabilized = stabilized;
    rr.exponent_clamped = ctx.exp_clamped;
    rr.power = p;
    rr.assign = x;
    rr.multipliers.beta = beta;
    rr.multipliers.lambda = lams;
    rr.multipliers.nu = nus;
    for (std::size_t n = 0; n < N; ++n)
        rr.sigma[n] = ctx.bits[n] > 0.0
                          ? sigma_from_nu(s, n, nus[n], y[n], rho, std::max(w.kappa1, 1e-300))
                          : 0.0;
    return rr;
}

namespace {

double binary_gap_of(const Mat& x) {
    double g = 0.0;
    for (double v : x.data()) g += v * (1.0 - v);
    return g;
}

}  // namespace

PowerSolution solve_power_stage(const Scenario& s, const std::vector<double>& freq_hz, double rho,
                                double deadline_s, const Mat& power_init, const Mat& assign_init,
                                const Weights& w, const PenaltySchedule& sched,
                                const PowerSolverOptions& opt) {
    const std::size_t N = s.n_devices();
    const auto r_min = rate_floor(s, rho, deadline_s, freq_hz);

    PowerSolution out;
    out.power = power_init;
    out.assign = assign_init;
    out.sigma.assign(N, 0.0);

    const double bits0 = s.constants.model_upload_bits + rho * s.constants.semcom_bits_total();
    if (bits0 <= 0.0) {  // nothing to transmit: zero power is optimal
        out.power = Mat(N, s.n_subcarriers());
        out.converged = true;
        return out;
    }
    if (!(w.kappa1 > 0.0)) {
        // degenerate: transmission energy carries no weight; any feasible point
        // works, keep the entry point (floors already hold by construction)
        out.converged = true;
        return out;
    }

    Mat x = assign_init, p = power_init;
    Mat x_ref = assign_init;
    std::vector<double> y(N, 1.0), sigma(N, 0.0), s_tot(N, 0.0), r(N, 0.0);

    auto refresh = [&](const Mat& xx, const Mat& pp) {
        Allocation a{freq_hz, pp, xx, rho};
        auto rates = device_rates(s, a);
        for (std::size_t n = 0; n < N; ++n) {
            r[n] = rates[n];
            s_tot[n] = pp.row_sum(n);
        }
    };
    refresh(x, p);
    for (std::size_t n = 0; n < N; ++n) {
        if (r[n] <= 0.0)
            throw InfeasibleError("solve_power_stage: initial point has zero rate for device " +
                                  std::to_string(n));
        sigma[n] = s_tot[n] * bits0 / r[n];
    }

    double varsigma = sched.initial;
    ResolveWarmStart warm;
    double h_prev = std::numeric_limits<double>::quiet_NaN();
    double h0_scale = 1.0;
    int iter = 0;
    bool level_has_prev = false;
    for (; iter < opt.max_inner_iters; ++iter) {
        for (std::size_t n = 0; n < N; ++n)
            y[n] = (s_tot[n] > 0.0 && sigma[n] > 0.0) ? 1.0 / (2.0 * s_tot[n] * sigma[n]) : 1.0;
        ResolveResult rr = resolve_multipliers(s, x_ref, y, rho, r_min, varsigma, w, p, x, opt,
                                               &warm);
        if (!rr.fallback_used) {
            warm.beta = rr.multipliers.beta;
            warm.nu = rr.multipliers.nu;
            warm.lambda = rr.multipliers.lambda;
        } else {
            warm.beta.clear();
            warm.nu.clear();
            warm.lambda.clear();
            warm.prefer_fallback = true;  // stay on one solution family
        }
        out.fallback_used = out.fallback_used || rr.fallback_used;
        const double h = w.kappa1 * [&] {
            double t = 0.0;
            for (double v : rr.sigma) t += v;
            return t;
        }() - varsigma * penalty_term(rr.assign, x_ref);
        out.h_trace.push_back({h, varsigma});

        x_ref = rr.assign;
        x = rr.assign;
        p = rr.power;
        sigma = rr.sigma;
        out.multipliers = rr.multipliers;
        refresh(x, p);
        for (std::size_t n = 0; n < N; ++n)
            if (sigma[n] <= 0.0 && r[n] > 0.0) sigma[n] = s_tot[n] * bits0 / r[n];

        double phi_max = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            if (r[n] <= 0.0 || sigma[n] <= 0.0) continue;
            const double lhs =
                (s_tot[n] * s_tot[n] * y[n] + 1.0 / (4.0 * y[n] * sigma[n] * sigma[n])) * bits0;
            phi_max = std::max(phi_max, std::abs(lhs - r[n]) / std::max(r[n], 1.0));
        }
        out.max_epigraph_residual = phi_max;

        if (level_has_prev) {
            if (h > h_prev + 1e-8 * std::max(1.0, std::abs(h_prev))) out.h_monotone = false;
            if (std::abs(h - h_prev) <= opt.eps1_rel * h0_scale && phi_max <= opt.epigraph_rel_tol) {
                const double gap = binary_gap_of(x);
                if (gap <= sched.binary_tol || varsigma >= sched.cap) {
                    out.converged = true;
                    ++iter;
                    break;
                }
                varsigma = std::min(varsigma * sched.growth, sched.cap);
                level_has_prev = false;
                warm.beta.clear();
                warm.nu.clear();
                warm.lambda.clear();
                continue;
            }
        } else {
            h0_scale = std::max(1.0, std::abs(h));
        }
        h_prev = h;
        level_has_prev = true;
    }
    out.iterations = iter;
    out.power = p;
    out.assign = x;
    out.sigma = sigma;
    out.final_y = y;
    out.binary_gap = binary_gap_of(x);
    out.final_varsigma = varsigma;
    return out;
}

Allocation round_and_polish(const Scenario& s, const Allocation& a, double deadline_s,
                            const Weights& w, const PowerSolverOptions& opt) {
    const std::size_t N = s.n_devices(), K = s.n_subcarriers();
    Allocation out = a;

    // 1) round: each subcarrier to the argmax device at or above the threshold,
    //    ties broken by higher gain, then lower device index
    for (std::size_t k = 0; k < K; ++k) {
        std::size_t best = N;
        for (std::size_t n = 0; n < N; ++n) {
            const double x = a.assign(n, k);
            if (x < opt.assign_threshold) continue;
            if (best == N || x > a.assign(best, k) ||
                (x == a.assign(best, k) && s.gains(n, k) > s.gains(best, k))) {
                best = n;
            }
        }
        for (std::size_t n = 0; n < N; ++n) out.assign(n, k) = (n == best) ? 1.0 : 0.0;
    }

    const double c_tot = s.constants.semcom_bits_total();
    const double bits = s.constants.model_upload_bits + a.rho * c_tot;
    auto r_min = rate_floor(s, a.rho, deadline_s, a.freq_hz);

    auto owned_rate_cap = [&](std::size_t n) {
        double r = 0.0;
        for (std::size_t k = 0; k < K; ++k)
            if (out.assign(n, k) > 0.5)
                r += link_rate(s.constants.p_max_w, s.gains(n, k),
                               s.constants.subcarrier_bandwidth_hz(), s.constants.noise_psd_w_per_hz);
        return r;
    };

    // 2) greedy repair: grant starved devices the free or weakest-claim subcarrier
    if (bits > 0.0) {
        for (std::size_t n = 0; n < N; ++n) {
            int guard = 0;
            while (owned_rate_cap(n) < r_min[n] * (1.0 - 1e-9) && guard++ < static_cast<int>(K)) {
                std::size_t pick = K;
                double pick_score = -1.0;
                bool pick_free = false;
                for (std::size_t k = 0; k < K; ++k) {
                    if (out.assign(n, k) > 0.5) continue;
                    bool free = true;
                    double claim = 0.0;
                    for (std::size_t m = 0; m < N; ++m)
                        if (m != n && out.assign(m, k) > 0.5) {
                            free = false;
                            claim = a.assign(m, k);
                        }
                    const double score = s.gains(n, k) / (free ? 1.0 : (1.0 + 10.0 * claim));
                    if ((free && !pick_free) || ((free == pick_free) && score > pick_score)) {
                        pick = k;
                        pick_score = score;
                        pick_free = free;
                    }
                }
                if (pick == K) break;
                for (std::size_t m = 0; m < N; ++m) out.assign(m, pick) = 0.0;
                out.assign(n, pick) = 1.0;
            }
            if (owned_rate_cap(n) < r_min[n] * (1.0 - 1e-9))
                throw InfeasibleError("round_and_polish: cannot satisfy rate floor of device " +
                                      std::to_string(n));
        }
    }

    // 3) re-optimize power with the assignment frozen
    if (bits > 0.0 && w.kappa1 > 0.0) {
        Mat p0(N, K);
        for (std::size_t n = 0; n < N; ++n) {
            std::size_t owned = 0;
            for (std::size_t k = 0; k < K; ++k)
                if (out.assign(n, k) > 0.5) ++owned;
            if (owned == 0) continue;
            for (std::size_t k = 0; k < K; ++k)
                if (out.assign(n, k) > 0.5) p0(n, k) = s.constants.p_max_w / static_cast<double>(owned);
        }
        PowerSolverOptions popt = opt;
        PenaltySchedule psched;
        psched.initial = 1.0;
        PowerSolution ps =
            solve_power_stage(s, out.freq_hz, out.rho, deadline_s, p0, out.assign, w, psched, popt);
        // keep the frozen assignment; adopt the re-optimized power
        out.power_w = ps.power;
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t k = 0; k < K; ++k)
                if (out.assign(n, k) < 0.5) out.power_w(n, k) = 0.0;
    } else {
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t k = 0; k < K; ++k)
                if (out.assign(n, k) < 0.5) out.power_w(n, k) = 0.0;
    }
    return out;
}

}  // namespace fedalloc
