#pragma once

#include <cstdint>
#include <vector>

#include "fedalloc/types.hpp"

namespace fedalloc {

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);

// Static system parameters. Linear SI units internally (W, Hz, J, s, bits);
// dBm/dB appear only at the config boundary.
struct SystemConstants {
    std::size_t n_devices = 10;
    std::size_t n_subcarriers = 50;
    double total_bandwidth_hz = 20e6;
    double noise_psd_w_per_hz = 3.9810717055349565e-21;  // -174 dBm/Hz
    double cell_radius_m = 500.0;
    double shadow_std_db = 8.0;
    double model_upload_bits = 2.81e4;
    double samples_per_device = 500.0;
    double cycles_per_sample_lo = 1e4;
    double cycles_per_sample_hi = 3e4;
    double switched_capacitance = 1e-28;
    double local_iterations = 10.0;
    double f_max_hz = 2e9;
    double p_max_w = 0.1;  // 20 dBm
    double semcom_rounds = 10.0;
    double semcom_bits_per_round = 4.15e6;
    double t_semcom_max_s = 20.0;
    int taylor_power_q = 2;
    double accuracy_coeff = 0.6356;
    double accuracy_exponent = 0.4025;
    bool shadow_per_subcarrier = false;  // large-scale shadowing shared per device by default

    double subcarrier_bandwidth_hz() const {
        return total_bandwidth_hz / static_cast<double>(n_subcarriers);
    }
    double semcom_bits_total() const { return semcom_rounds * semcom_bits_per_round; }

    void validate() const;
};

// One reproducible problem instance. Immutable after generation; safe to share
// read-only across threads.
struct Scenario {
    SystemConstants constants;
    Mat gains;                          // N x K linear power gains
    std::vector<double> cycles_per_sample;  // c_n
    std::vector<double> distances_m;
    std::uint64_t rng_seed = 0;

    std::size_t n_devices() const { return constants.n_devices; }
    std::size_t n_subcarriers() const { return constants.n_subcarriers; }
};

// Deterministic in (constants, seed): devices placed area-uniformly in the
// disc, path loss 128.1 + 37.6*log10(d_km) plus log-normal shadowing, c_n
// uniform in [lo, hi]. RNG is std::mt19937_64 with explicit uniform/normal
// derivations so sequences are identical across platforms.
Scenario generate_scenario(const SystemConstants& constants, std::uint64_t seed);

}  // namespace fedalloc
