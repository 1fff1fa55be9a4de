#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fedalloc/freq_solver.hpp"

using namespace fedalloc;

namespace {

Scenario make_scenario(std::size_t n_dev, std::size_t n_sub, double gain) {
    SystemConstants c;
    c.n_devices = n_dev;
    c.n_subcarriers = n_sub;
    c.total_bandwidth_hz = 4e5 * static_cast<double>(n_sub);
    c.noise_psd_w_per_hz = 3.981e-21;
    Scenario s;
    s.constants = c;
    s.gains = Mat(n_dev, n_sub, gain);
    s.cycles_per_sample.assign(n_dev, 2e4);
    s.distances_m.assign(n_dev, 100.0);
    return s;
}

Allocation round_robin_alloc(const Scenario& s, double total_power) {
    Allocation a;
    const std::size_t n = s.n_devices(), k = s.n_subcarriers();
    a.freq_hz.assign(n, 1e9);
    a.assign = Mat(n, k);
    a.power_w = Mat(n, k);
    std::vector<std::size_t> owned(n, 0);
    for (std::size_t j = 0; j < k; ++j) {
        a.assign(j % n, j) = 1.0;
        ++owned[j % n];
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j)
            if (a.assign(i, j) > 0.5) a.power_w(i, j) = total_power / static_cast<double>(owned[i]);
    a.rho = 0.5;
    return a;
}

// Objective of the frequency/compression stage at fixed (power, assignment).
double stage_objective(const Scenario& s, const Allocation& base, const std::vector<double>& f,
                       double rho, const Weights& w) {
    Allocation a = base;
    a.freq_hz = f;
    a.rho = rho;
    CostBreakdown cb = evaluate(s, a, w);
    double e = 0.0;
    for (std::size_t n = 0; n < s.n_devices(); ++n) e += cb.e_fl_cmp_j[n] + cb.e_sc_j[n];
    return w.kappa1 * e + w.kappa2 * cb.t_fl_s - w.kappa3 * cb.accuracy_sum;
}

}  // namespace

TEST_CASE("rho upper bound combines deadline and unit cap") {
    Scenario s = make_scenario(1, 1, 1e-10);
    SUBCASE("huge rate caps at one") {
        CHECK(rho_upper_bound(s, {1e12}) == doctest::Approx(1.0));
    }
    SUBCASE("single device bound") {
        // min(1, 20 * 1e6 / 4.15e7) = 0.4819
        CHECK(rho_upper_bound(s, {1e6}) == doctest::Approx(0.4819).epsilon(1e-3));
    }
    SUBCASE("minimum over devices") {
        Scenario s2 = make_scenario(2, 2, 1e-10);
        const double r1 = 0.9 * s2.constants.semcom_bits_total() / s2.constants.t_semcom_max_s;
        const double r2 = 0.3 * s2.constants.semcom_bits_total() / s2.constants.t_semcom_max_s;
        CHECK(rho_upper_bound(s2, {r1, r2}) == doctest::Approx(0.3).epsilon(1e-12));
    }
    SUBCASE("zero rate is infeasible") {
        CHECK_THROWS_AS(rho_upper_bound(s, {0.0}), InfeasibleError);
    }
}

TEST_CASE("solve_rho limit cases") {
    Scenario s = make_scenario(2, 2, 1e-10);
    FreqSolverOptions opt;
    SUBCASE("no energy weight maximizes accuracy") {
        Weights w{0.0, 1.0, 1.0};
        CHECK(solve_rho(s, {0.1, 0.1}, {1e7, 1e7}, w, 0.8, opt) == doctest::Approx(0.8));
    }
    SUBCASE("no accuracy weight drops to the floor") {
        Weights w{1.0, 1.0, 0.0};
        CHECK(solve_rho(s, {0.1, 0.1}, {1e7, 1e7}, w, 0.8, opt) == doctest::Approx(opt.rho_floor));
    }
    SUBCASE("degenerate range") {
        Weights w{1.0, 1.0, 1.0};
        CHECK_THROWS_AS(solve_rho(s, {0.1, 0.1}, {1e7, 1e7}, w, 0.5 * opt.rho_floor, opt),
                        InfeasibleError);
    }
}

TEST_CASE("solve_rho interior root matches a dense grid scan") {
    Scenario s = make_scenario(1, 1, 1e-10);
    Weights w{1.0, 1.0, 1.0};
    FreqSolverOptions opt;
    // pick power/rate so the root is interior
    const std::vector<double> p{0.05}, r{5e6};
    const double rho_max = rho_upper_bound(s, r);
    const double rho_star = solve_rho(s, p, r, w, rho_max, opt);
    // grid oracle at 1e-6 steps on the stage objective restricted to rho
    const double c_tot = s.constants.semcom_bits_total();
    auto g = [&](double rho) {
        return w.kappa1 * p[0] * c_tot * rho / r[0] - w.kappa3 * accuracy(s, rho);
    };
    double best = 1e300, best_rho = 0.0;
    for (double rho = 1e-6; rho <= rho_max; rho += 1e-6) {
        const double v = g(rho);
        if (v < best) {
            best = v;
            best_rho = rho;
        }
    }
    CHECK(rho_star == doctest::Approx(best_rho).epsilon(1e-4));
    CHECK(rho_star > opt.rho_floor);
    CHECK(rho_star < rho_max);
}

TEST_CASE("solve_deadline matches the closed-form single-device inversion") {
    // 2 kappa1 xi (eta c d / T)^3 = kappa2 with eta c d = 1e8, xi = 1e-28
    Scenario s = make_scenario(1, 1, 1e-10);
    s.constants.model_upload_bits = 0.0;  // tau = 0
    s.constants.f_max_hz = 1e30;
    Weights w{1.0, 1.0, 1.0};
    const double t = solve_deadline(s, {0.0}, w);
    CHECK(t == doctest::Approx(1e8 * std::cbrt(2e-28)).epsilon(1e-6));
    CHECK(t == doctest::Approx(0.0584801).epsilon(1e-4));

    Weights w2{1.0, 2.0, 1.0};
    CHECK(solve_deadline(s, {0.0}, w2) < t);
}

TEST_CASE("deadline with binding caps lands where the grid says the sign flips") {
    Scenario s = make_scenario(3, 3, 1e-10);
    s.constants.f_max_hz = 5e8;  // low cap
    s.cycles_per_sample = {1.2e4, 2.1e4, 2.9e4};
    Weights w{1.0, 1e-3, 1.0};  // small kappa2 so the plateau matters
    const std::vector<double> taus{0.01, 0.02, 0.03};
    const double t_root = solve_deadline(s, taus, w);
    auto f_of = [&](std::size_t n, double t) {
        const double work = 10.0 * s.cycles_per_sample[n] * 500.0;
        const double gap = t - taus[n];
        return gap <= 0.0 ? s.constants.f_max_hz : std::min(work / gap, s.constants.f_max_hz);
    };
    auto F = [&](double t) {
        double sum = 0.0;
        for (std::size_t n = 0; n < 3; ++n) {
            const double f = f_of(n, t);
            sum += 2.0 * w.kappa1 * 1e-28 * f * f * f;
        }
        return sum - w.kappa2;
    };
    // grid scan for the sign change
    double flip = -1.0;
    for (double t = 0.0301; t < 100.0; t += 1e-4) {
        if (F(t) <= 0.0) {
            flip = t;
            break;
        }
    }
    REQUIRE(flip > 0.0);
    CHECK(t_root == doctest::Approx(flip).epsilon(1e-2));
}

TEST_CASE("full stage: symmetric devices get identical frequencies") {
    Scenario s = make_scenario(2, 2, 1e-10);
    Allocation a = round_robin_alloc(s, 0.1);
    Weights w;
    FreqSolution fs = solve_freq_stage(s, a, w);
    CHECK(fs.freq_hz[0] == doctest::Approx(fs.freq_hz[1]).epsilon(1e-9));
    CHECK(fs.stationarity_residual < 1e-6);
    CHECK(fs.slackness_residual < 1e-8);
}

TEST_CASE("full stage: tiny cap pins every device at f_max") {
    Scenario s = make_scenario(2, 2, 1e-10);
    s.constants.f_max_hz = 1e8;
    Allocation a = round_robin_alloc(s, 0.1);
    Weights w;
    FreqSolution fs = solve_freq_stage(s, a, w);
    const auto rates = device_rates(s, a);
    for (std::size_t n = 0; n < 2; ++n) {
        CHECK(fs.freq_hz[n] == doctest::Approx(1e8));
    }
    double expect = 0.0;
    for (std::size_t n = 0; n < 2; ++n)
        expect = std::max(expect, s.constants.model_upload_bits / rates[n] + 1e8 / 1e8);
    CHECK(fs.deadline_s == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("stationarity: sum of 2 kappa1 xi f^3 equals kappa2 when no cap binds") {
    Scenario s = make_scenario(3, 3, 1e-10);
    s.cycles_per_sample = {1.1e4, 1.9e4, 2.7e4};
    Allocation a = round_robin_alloc(s, 0.08);
    Weights w{2.0, 0.7, 1.0};
    FreqSolution fs = solve_freq_stage(s, a, w);
    double sum = 0.0;
    for (std::size_t n = 0; n < 3; ++n) {
        CHECK(fs.freq_hz[n] < s.constants.f_max_hz * (1 - 1e-9));
        sum += 2.0 * w.kappa1 * s.constants.switched_capacitance * std::pow(fs.freq_hz[n], 3);
    }
    CHECK(sum == doctest::Approx(w.kappa2).epsilon(1e-6));
    // complementary slackness: every device finishes exactly at the deadline
    const auto rates = device_rates(s, a);
    for (std::size_t n = 0; n < 3; ++n) {
        const double finish = s.constants.model_upload_bits / rates[n] +
                              10.0 * s.cycles_per_sample[n] * 500.0 / fs.freq_hz[n];
        CHECK(finish == doctest::Approx(fs.deadline_s).epsilon(1e-8));
    }
}

TEST_CASE("stage solution matches a dense grid within one step on every coordinate") {
    Scenario s = make_scenario(3, 3, 1e-10);
    s.gains(0, 0) = 3e-10;
    s.gains(1, 1) = 0.7e-10;
    s.cycles_per_sample = {1.3e4, 2.2e4, 2.8e4};
    Allocation a = round_robin_alloc(s, 0.09);
    Weights w;
    FreqSolution fs = solve_freq_stage(s, a, w);

    // deadline-sweep grid oracle: frequencies on a 1e6 Hz grid, exact over the
    // grid because the objective separates given the realized deadline
    const double f_step = 1e6;
    const auto rates = device_rates(s, a);
    std::vector<std::vector<std::pair<double, double>>> opts(3);  // (time, cost)
    for (std::size_t n = 0; n < 3; ++n) {
        const double tau = s.constants.model_upload_bits / rates[n];
        const double work = 10.0 * s.cycles_per_sample[n] * 500.0;
        for (double f = f_step; f <= s.constants.f_max_hz + 1.0; f += f_step)
            opts[n].push_back({tau + work / f, w.kappa1 * 1e-28 * work * f * f});
    }
    double best = 1e300;
    std::vector<double> best_f(3);
    std::vector<double> cand;
    for (auto& o : opts)
        for (auto& tc : o) cand.push_back(tc.first);
    std::sort(cand.begin(), cand.end());
    for (double t : cand) {
        double tot = w.kappa2 * t;
        std::vector<double> pick(3, 0.0);
        bool ok = true;
        for (std::size_t n = 0; n < 3 && ok; ++n) {
            double mc = 1e300;
            const double tau = s.constants.model_upload_bits / rates[n];
            const double work = 10.0 * s.cycles_per_sample[n] * 500.0;
            for (auto& tc : opts[n])
                if (tc.first <= t + 1e-15 && tc.second < mc) {
                    mc = tc.second;
                    pick[n] = work / (tc.first - tau);
                }
            if (mc > 1e299) ok = false;
            tot += mc;
        }
        if (ok && tot < best) {
            best = tot;
            best_f = pick;
        }
    }
    // a shared deadline amplifies per-device coordinate shifts; a few grid
    // steps of slack covers that while the objective check below stays sharp
    for (std::size_t n = 0; n < 3; ++n) CHECK(std::abs(fs.freq_hz[n] - best_f[n]) <= 5 * f_step);
    CHECK(stage_objective(s, a, fs.freq_hz, fs.rho, w) <=
          stage_objective(s, a, best_f, fs.rho, w) + 1e-9);
    // and the stage objective is no worse than the best grid point
    const double ours = stage_objective(s, a, fs.freq_hz, fs.rho, w);
    std::vector<double> fgrid = best_f;
    double best_rho = fs.rho;
    {
        double bb = 1e300;
        for (double rho = 1e-3; rho <= 1.0; rho += 1e-3) {
            Allocation tmp = a;
            tmp.rho = rho;
            if (max_constraint_violation(s, tmp) > 1e-9) continue;
            const double v = stage_objective(s, a, fgrid, rho, w);
            if (v < bb) {
                bb = v;
                best_rho = rho;
            }
        }
        CHECK(ours <= bb + 1e-6 * std::abs(bb));
    }
    CHECK(std::abs(fs.rho - best_rho) <= 2e-3);
}

TEST_CASE("kappa2 = 0 drops frequencies to the floor") {
    Scenario s = make_scenario(2, 2, 1e-10);
    Allocation a = round_robin_alloc(s, 0.1);
    Weights w{1.0, 0.0, 1.0};
    FreqSolverOptions opt;
    FreqSolution fs = solve_freq_stage(s, a, w, opt);
    for (double f : fs.freq_hz) CHECK(f == doctest::Approx(opt.f_floor_hz));
}

TEST_CASE("kappa1 = 0 pins frequencies at the cap") {
    Scenario s = make_scenario(2, 2, 1e-10);
    Allocation a = round_robin_alloc(s, 0.1);
    Weights w{0.0, 1.0, 1.0};
    FreqSolution fs = solve_freq_stage(s, a, w);
    for (double f : fs.freq_hz) CHECK(f == doctest::Approx(s.constants.f_max_hz));
}
