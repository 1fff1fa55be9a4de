#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedalloc/allocator.hpp"
#include "fedalloc/baselines.hpp"

namespace fedalloc {

// Experiment configuration. Unit-bearing quantities are accepted in dBm/dB at
// this boundary and converted to linear SI internally.
struct ExperimentConfig {
    SystemConstants constants;
    Weights weights;
    AllocatorConfig solver;
    GridSpec oracle_grid;

    std::string method = "proposed";  // proposed|equal|comm_only|comp_only|random|exhaustive
    std::uint64_t seed = 1;
    int n_seeds = 1;
    std::string sweep_axis;           // kappa1|kappa2|kappa3|p_max_dbm|n_devices|n_subcarriers|semcom_multiplier
    std::vector<double> sweep_values;
    std::string out_path = "-";
    int threads = 0;                  // 0: hardware concurrency
};

// Line-based "key = value" format with '#' comments; unknown keys rejected
// with line numbers; absent keys keep their defaults.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

}  // namespace fedalloc
