#include "fedalloc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fedalloc {

double link_rate(double p_w, double gain, double bbar_hz, double n0_w_per_hz) {
    if (p_w <= 0.0) return 0.0;
    return bbar_hz * std::log2(1.0 + p_w * gain / (n0_w_per_hz * bbar_hz));
}

double device_rate(const Scenario& s, const Allocation& a, std::size_t n) {
    const double bbar = s.constants.subcarrier_bandwidth_hz();
    const double n0 = s.constants.noise_psd_w_per_hz;
    double r = 0.0;
    for (std::size_t k = 0; k < s.n_subcarriers(); ++k) {
        const double x = a.assign(n, k);
        if (x > 0.0) r += x * link_rate(a.power_w(n, k), s.gains(n, k), bbar, n0);
    }
    return r;
}

std::vector<double> device_rates(const Scenario& s, const Allocation& a) {
    std::vector<double> r(s.n_devices());
    for (std::size_t n = 0; n < s.n_devices(); ++n) r[n] = device_rate(s, a, n);
    return r;
}

double accuracy(const Scenario& s, double rho) {
    if (rho <= 0.0) return 0.0;
    return s.constants.accuracy_coeff * std::pow(rho, s.constants.accuracy_exponent);
}

double accuracy_derivative(const Scenario& s, double rho) {
    if (rho <= 0.0) return std::numeric_limits<double>::infinity();
    const double a = s.constants.accuracy_coeff;
    const double b = s.constants.accuracy_exponent;
    return a * b * std::pow(rho, b - 1.0);
}

CostBreakdown evaluate(const Scenario& s, const Allocation& a, const Weights& w) {
    const std::size_t n_dev = s.n_devices();
    const auto& c = s.constants;
    CostBreakdown out;
    out.rate_bps = device_rates(s, a);
    out.tau_s.resize(n_dev);
    out.t_cmp_s.resize(n_dev);
    out.e_fl_tx_j.resize(n_dev);
    out.e_fl_cmp_j.resize(n_dev);
    out.t_sc_s.resize(n_dev);
    out.e_sc_j.resize(n_dev);

    const double c_total = c.semcom_bits_total();
    double energy = 0.0;
    for (std::size_t n = 0; n < n_dev; ++n) {
        const double r = out.rate_bps[n];
        const double p_total = a.power_w.row_sum(n);
        const double sc_bits = a.rho * c_total;
        if (r <= 0.0 && (c.model_upload_bits > 0.0 || sc_bits > 0.0))
            throw InfeasibleError("device " + std::to_string(n) + " has zero rate but pending traffic");

        out.tau_s[n] = c.model_upload_bits > 0.0 ? c.model_upload_bits / r : 0.0;
        out.e_fl_tx_j[n] = p_total * out.tau_s[n];

        const double f = a.freq_hz[n];
        if (!(f > 0.0)) throw InfeasibleError("device " + std::to_string(n) + " has non-positive frequency");
        const double work = c.local_iterations * s.cycles_per_sample[n] * c.samples_per_device;
        out.t_cmp_s[n] = work / f;
        out.e_fl_cmp_j[n] = c.switched_capacitance * work * f * f;

        out.t_sc_s[n] = sc_bits > 0.0 ? sc_bits / r : 0.0;
        out.e_sc_j[n] = p_total * out.t_sc_s[n];

        energy += out.e_fl_tx_j[n] + out.e_fl_cmp_j[n] + out.e_sc_j[n];
        out.t_fl_s = std::max(out.t_fl_s, out.tau_s[n] + out.t_cmp_s[n]);
        out.accuracy_sum += accuracy(s, a.rho);
    }
    out.objective = w.kappa1 * energy + w.kappa2 * out.t_fl_s - w.kappa3 * out.accuracy_sum;
    return out;
}

double max_constraint_violation(const Scenario& s, const Allocation& a) {
    const auto& c = s.constants;
    double v = 0.0;
    for (std::size_t n = 0; n < s.n_devices(); ++n) {
        double p_total = 0.0;
        for (std::size_t k = 0; k < s.n_subcarriers(); ++k) {
            const double p = a.power_w(n, k);
            const double x = a.assign(n, k);
            v = std::max(v, -p);
            v = std::max(v, (p - x * c.p_max_w) / c.p_max_w);  // (13a)
            v = std::max(v, -x);
            v = std::max(v, x - 1.0);
            p_total += p;
        }
        v = std::max(v, (p_total - c.p_max_w) / c.p_max_w);            // (13b)
        v = std::max(v, (a.freq_hz[n] - c.f_max_hz) / c.f_max_hz);     // (13c)
        v = std::max(v, -a.freq_hz[n] / c.f_max_hz);
    }
    for (std::size_t k = 0; k < s.n_subcarriers(); ++k)
        v = std::max(v, a.assign.col_sum(k) - 1.0);                    // (13d)
    const double c_total = c.semcom_bits_total();
    if (a.rho * c_total > 0.0) {
        for (std::size_t n = 0; n < s.n_devices(); ++n) {
            const double r = device_rate(s, a, n);
            if (r <= 0.0) return std::numeric_limits<double>::infinity();
            const double t_sc = a.rho * c_total / r;
            v = std::max(v, (t_sc - c.t_semcom_max_s) / c.t_semcom_max_s);  // (13f)
        }
    }
    v = std::max(v, a.rho - 1.0);  // (13g)
    v = std::max(v, -a.rho);
    return v;
}

}  // namespace fedalloc
