#include "fedalloc/scenario.hpp"

#include <cmath>
#include <random>

namespace fedalloc {

double dbm_to_watts(double dbm) {
    if (!std::isfinite(dbm)) throw ConfigError("dbm_to_watts: non-finite input");
    return std::pow(10.0, (dbm - 30.0) / 10.0);
}

double watts_to_dbm(double watts) {
    if (!std::isfinite(watts) || watts <= 0.0)
        throw ConfigError("watts_to_dbm: input must be positive and finite");
    return 10.0 * std::log10(watts) + 30.0;
}

void SystemConstants::validate() const {
    auto bad = [](const char* field) { throw ConfigError(std::string("invalid constants: ") + field); };
    if (n_devices < 1) bad("n_devices");
    if (n_subcarriers < 1) bad("n_subcarriers");
    if (!(total_bandwidth_hz > 0)) bad("total_bandwidth_hz");
    if (!(noise_psd_w_per_hz > 0)) bad("noise_psd_w_per_hz");
    if (!(cell_radius_m > 0)) bad("cell_radius_m");
    if (shadow_std_db < 0) bad("shadow_std_db");
    if (model_upload_bits < 0) bad("model_upload_bits");
    if (samples_per_device < 0) bad("samples_per_device");
    if (!(cycles_per_sample_lo > 0) || cycles_per_sample_hi < cycles_per_sample_lo)
        bad("cycles_per_sample range");
    if (!(switched_capacitance > 0)) bad("switched_capacitance");
    if (!(local_iterations > 0)) bad("local_iterations");
    if (!(f_max_hz > 0)) bad("f_max_hz");
    if (!(p_max_w > 0)) bad("p_max_w");
    if (semcom_rounds < 0) bad("semcom_rounds");
    if (semcom_bits_per_round < 0) bad("semcom_bits_per_round");
    if (!(t_semcom_max_s > 0)) bad("t_semcom_max_s");
    if (taylor_power_q < 1) bad("taylor_power_q");
    if (!(accuracy_coeff > 0)) bad("accuracy_coeff");
    if (!(accuracy_exponent > 0) || accuracy_exponent >= 1) bad("accuracy_exponent");
}

namespace {

// Portable draws on top of the standard mt19937_64 bit stream. The library
// distributions are implementation-defined, so we derive values explicitly.
double next_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
}

double next_normal(std::mt19937_64& rng) {
    // Box-Muller; u1 shifted away from 0.
    double u1 = next_uniform(rng);
    double u2 = next_uniform(rng);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

Scenario generate_scenario(const SystemConstants& constants, std::uint64_t seed) {
    constants.validate();
    const std::size_t n = constants.n_devices;
    const std::size_t k = constants.n_subcarriers;

    Scenario s;
    s.constants = constants;
    s.rng_seed = seed;
    s.gains = Mat(n, k);
    s.cycles_per_sample.resize(n);
    s.distances_m.resize(n);

    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        // area-uniform placement: radius = R*sqrt(u)
        const double u = next_uniform(rng);
        const double d_m = constants.cell_radius_m * std::sqrt(u);
        next_uniform(rng);  // angle draw kept for stream stability; gains depend on distance only
        s.distances_m[i] = d_m;

        const double d_km = std::max(d_m, 1.0) / 1000.0;  // clamp at 1 m to keep the model sane
        const double path_loss_db = 128.1 + 37.6 * std::log10(d_km);
        if (constants.shadow_per_subcarrier) {
            for (std::size_t j = 0; j < k; ++j) {
                const double chi = constants.shadow_std_db * next_normal(rng);
                s.gains(i, j) = std::pow(10.0, -(path_loss_db + chi) / 10.0);
            }
        } else {
            const double chi = constants.shadow_std_db * next_normal(rng);
            const double g = std::pow(10.0, -(path_loss_db + chi) / 10.0);
            for (std::size_t j = 0; j < k; ++j) s.gains(i, j) = g;
        }
        s.cycles_per_sample[i] =
            constants.cycles_per_sample_lo +
            (constants.cycles_per_sample_hi - constants.cycles_per_sample_lo) * next_uniform(rng);
    }
    return s;
}

}  // namespace fedalloc
