#include "fedalloc/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fedalloc {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, int line) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError("line " + std::to_string(line) + ": expected a number, got '" + v + "'");
    return x;
}

std::uint64_t parse_u64(const std::string& v, int line) {
    char* end = nullptr;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError("line " + std::to_string(line) + ": expected an integer, got '" + v + "'");
    return static_cast<std::uint64_t>(x);
}

std::vector<double> parse_list(const std::string& v, int line) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_double(item, line));
    }
    if (out.empty()) throw ConfigError("line " + std::to_string(line) + ": empty value list");
    return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::stringstream ss(text);
    std::string raw;
    int line = 0;
    while (std::getline(ss, raw)) {
        ++line;
        const auto hash = raw.find('#');
        std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'");
        const std::string key = trim(s.substr(0, eq));
        const std::string val = trim(s.substr(eq + 1));
        auto num = [&] { return parse_double(val, line); };

        auto& c = cfg.constants;
        if (key == "n_devices") c.n_devices = static_cast<std::size_t>(parse_u64(val, line));
        else if (key == "n_subcarriers") c.n_subcarriers = static_cast<std::size_t>(parse_u64(val, line));
        else if (key == "total_bandwidth_hz") c.total_bandwidth_hz = num();
        else if (key == "noise_psd_dbm_per_hz") c.noise_psd_w_per_hz = dbm_to_watts(num());
        else if (key == "cell_radius_m") c.cell_radius_m = num();
        else if (key == "shadow_std_db") c.shadow_std_db = num();
        else if (key == "shadow_per_subcarrier") c.shadow_per_subcarrier = num() != 0.0;
        else if (key == "model_upload_bits") c.model_upload_bits = num();
        else if (key == "samples_per_device") c.samples_per_device = num();
        else if (key == "cycles_per_sample_lo") c.cycles_per_sample_lo = num();
        else if (key == "cycles_per_sample_hi") c.cycles_per_sample_hi = num();
        else if (key == "switched_capacitance") c.switched_capacitance = num();
        else if (key == "local_iterations") c.local_iterations = num();
        else if (key == "f_max_hz") c.f_max_hz = num();
        else if (key == "p_max_dbm") c.p_max_w = dbm_to_watts(num());
        else if (key == "semcom_rounds") c.semcom_rounds = num();
        else if (key == "semcom_bits_per_round") c.semcom_bits_per_round = num();
        else if (key == "t_semcom_max_s") c.t_semcom_max_s = num();
        else if (key == "taylor_power_q") c.taylor_power_q = static_cast<int>(parse_u64(val, line));
        else if (key == "accuracy_coeff") c.accuracy_coeff = num();
        else if (key == "accuracy_exponent") c.accuracy_exponent = num();
        else if (key == "kappa1") cfg.weights.kappa1 = num();
        else if (key == "kappa2") cfg.weights.kappa2 = num();
        else if (key == "kappa3") cfg.weights.kappa3 = num();
        else if (key == "method") cfg.method = val;
        else if (key == "seed") cfg.seed = parse_u64(val, line);
        else if (key == "seeds") cfg.n_seeds = static_cast<int>(parse_u64(val, line));
        else if (key == "sweep_axis") cfg.sweep_axis = val;
        else if (key == "sweep_values") cfg.sweep_values = parse_list(val, line);
        else if (key == "out_path") cfg.out_path = val;
        else if (key == "threads") cfg.threads = static_cast<int>(parse_u64(val, line));
        else if (key == "max_outer_iters") cfg.solver.max_outer_iters = static_cast<int>(parse_u64(val, line));
        else if (key == "eps2_rel") cfg.solver.eps2_rel = num();
        else if (key == "max_inner_iters") cfg.solver.power.max_inner_iters = static_cast<int>(parse_u64(val, line));
        else if (key == "eps1_rel") cfg.solver.power.eps1_rel = num();
        else if (key == "rho_floor") cfg.solver.freq.rho_floor = num();
        else if (key == "f_floor_hz") cfg.solver.freq.f_floor_hz = num();
        else if (key == "penalty_initial") cfg.solver.penalty.initial = num();
        else if (key == "penalty_growth") cfg.solver.penalty.growth = num();
        else if (key == "penalty_cap") cfg.solver.penalty.cap = num();
        else if (key == "binary_tol") cfg.solver.penalty.binary_tol = num();
        else if (key == "grid_f_lo_hz") cfg.oracle_grid.f_lo_hz = num();
        else if (key == "grid_f_hi_hz") cfg.oracle_grid.f_hi_hz = num();
        else if (key == "grid_f_step_hz") cfg.oracle_grid.f_step_hz = num();
        else if (key == "grid_p_lo_dbm") cfg.oracle_grid.p_lo_dbm = num();
        else if (key == "grid_p_hi_dbm") cfg.oracle_grid.p_hi_dbm = num();
        else if (key == "grid_p_step_dbm") cfg.oracle_grid.p_step_dbm = num();
        else if (key == "grid_rho_lo") cfg.oracle_grid.rho_lo = num();
        else if (key == "grid_rho_hi") cfg.oracle_grid.rho_hi = num();
        else if (key == "grid_rho_step") cfg.oracle_grid.rho_step = num();
        else if (key == "grid_exact_joint_power") cfg.oracle_grid.exact_joint_power = num() != 0.0;
        else if (key == "grid_budget") cfg.oracle_grid.budget = num();
        else throw ConfigError("line " + std::to_string(line) + ": unknown key '" + key + "'");
    }
    cfg.constants.validate();
    cfg.weights.validate();
    if (cfg.n_seeds < 1) throw ConfigError("seeds must be >= 1");
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

}  // namespace fedalloc
