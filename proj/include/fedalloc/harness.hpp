#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fedalloc/config.hpp"

namespace fedalloc {

struct ResultRow {
    std::uint64_t seed = 0;
    std::size_t n_devices = 0;
    std::size_t n_subcarriers = 0;
    double kappa1 = 0, kappa2 = 0, kappa3 = 0;
    double p_max_dbm = 0;
    std::string method;
    double objective = 0;
    double total_energy_j = 0;
    double e_fl_tx_j = 0;
    double e_fl_cmp_j = 0;
    double e_sc_tx_j = 0;
    double t_fl_s = 0;
    double rho = 0;
    double accuracy_sum = 0;
    int outer_iters = 0;
    bool converged = false;
    double runtime_ms = 0;
    double axis_value = 0;  // sweep axis value (0 when not sweeping)
};

std::string csv_header();
std::string to_csv(const ResultRow& row);
std::vector<ResultRow> parse_result_csv(const std::string& text);

// One scenario/method execution.
ResultRow run_single(const ExperimentConfig& cfg, std::uint64_t seed);

// seed x method runs with the configured method; deterministic row order.
std::vector<ResultRow> run(const ExperimentConfig& cfg);

// Cross-product sweep, same seed list reused across axis values.
std::vector<ResultRow> sweep(const ExperimentConfig& cfg, const std::string& axis,
                             const std::vector<double>& values);

struct CompareRow {
    std::string method;
    double objective = 0;
    double runtime_s = 0;
};

// Proposed vs the four baselines vs the exhaustive oracle on a toy instance.
std::vector<CompareRow> compare(const ExperimentConfig& cfg);

void write_rows(std::ostream& os, const std::vector<ResultRow>& rows);
void write_rows_to(const std::string& out_path, const std::vector<ResultRow>& rows);

}  // namespace fedalloc
