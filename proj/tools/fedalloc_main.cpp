#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "fedalloc/harness.hpp"

namespace {

fedalloc::ExperimentConfig build_config(const std::string& config_path, std::uint64_t* seed,
                                        int* seeds, const std::string& method,
                                        const std::string& out) {
    fedalloc::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = fedalloc::load_config_file(config_path);
    if (seed) cfg.seed = *seed;
    if (seeds) cfg.n_seeds = *seeds;
    if (!method.empty()) cfg.method = method;
    if (!out.empty()) cfg.out_path = out;
    return cfg;
}

void print_summary(const std::vector<fedalloc::ResultRow>& rows) {
    double obj = 0, energy = 0, tfl = 0;
    int conv = 0;
    for (const auto& r : rows) {
        obj += r.objective;
        energy += r.total_energy_j;
        tfl += r.t_fl_s;
        conv += r.converged ? 1 : 0;
    }
    const double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
    std::fprintf(stderr,
                 "rows=%zu mean_objective=%.6g mean_energy_J=%.6g mean_T_FL_s=%.6g converged=%d/%zu\n",
                 rows.size(), obj / n, energy / n, tfl / n, conv, rows.size());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"OFDMA resource allocation solver and experiment harness"};
    app.require_subcommand(1);

    std::string config_path, method, out_path, axis, values_csv;
    std::uint64_t seed = 1;
    int seeds = 1;
    bool seed_set = false, seeds_set = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "configuration file path");
        sub->add_option("--seed", seed, "base RNG seed")->each([&](const std::string&) { seed_set = true; });
        sub->add_option("--seeds", seeds, "number of consecutive seeds")
            ->each([&](const std::string&) { seeds_set = true; });
        sub->add_option("--method", method, "proposed|equal|comm_only|comp_only|random|exhaustive");
        sub->add_option("--out", out_path, "CSV output path ('-' for stdout)");
    };

    CLI::App* cmd_run = app.add_subcommand("run", "run scenarios with one method");
    add_common(cmd_run);
    CLI::App* cmd_sweep = app.add_subcommand("sweep", "sweep one axis with paired seeds");
    add_common(cmd_sweep);
    cmd_sweep->add_option("--axis", axis, "sweep axis name")->required();
    cmd_sweep->add_option("--values", values_csv, "comma-separated axis values")->required();
    CLI::App* cmd_compare = app.add_subcommand("compare", "proposed vs baselines vs oracle (toy instance)");
    add_common(cmd_compare);

    CLI11_PARSE(app, argc, argv);

    try {
        fedalloc::ExperimentConfig cfg =
            build_config(config_path, seed_set ? &seed : nullptr, seeds_set ? &seeds : nullptr,
                         method, out_path);
        if (cmd_run->parsed()) {
            auto rows = fedalloc::run(cfg);
            fedalloc::write_rows_to(cfg.out_path, rows);
            print_summary(rows);
        } else if (cmd_sweep->parsed()) {
            std::vector<double> values;
            {
                std::stringstream ss(values_csv);
                std::string item;
                while (std::getline(ss, item, ',')) values.push_back(std::stod(item));
            }
            auto rows = fedalloc::sweep(cfg, axis, values);
            fedalloc::write_rows_to(cfg.out_path, rows);
            print_summary(rows);
        } else if (cmd_compare->parsed()) {
            auto rows = fedalloc::compare(cfg);
            std::printf("%-12s %16s %12s\n", "method", "objective", "runtime_s");
            for (const auto& r : rows)
                std::printf("%-12s %16.6g %12.4f\n", r.method.c_str(), r.objective, r.runtime_s);
        }
    } catch (const fedalloc::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const fedalloc::InfeasibleError& e) {
        std::fprintf(stderr, "infeasible: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
