#include "fedalloc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <mutex>
#include <thread>

namespace fedalloc {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

ExperimentConfig apply_axis(const ExperimentConfig& base, const std::string& axis, double value) {
    ExperimentConfig cfg = base;
    if (axis == "kappa1") cfg.weights.kappa1 = value;
    else if (axis == "kappa2") cfg.weights.kappa2 = value;
    else if (axis == "kappa3") cfg.weights.kappa3 = value;
    else if (axis == "p_max_dbm") cfg.constants.p_max_w = dbm_to_watts(value);
    else if (axis == "n_devices") cfg.constants.n_devices = static_cast<std::size_t>(value);
    else if (axis == "n_subcarriers") cfg.constants.n_subcarriers = static_cast<std::size_t>(value);
    else if (axis == "semcom_multiplier") cfg.constants.semcom_bits_per_round *= value;
    else throw ConfigError("unknown sweep axis '" + axis + "'");
    return cfg;
}

template <typename Fn>
void parallel_for(int n_jobs, int threads, Fn&& fn) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, n_jobs));
    if (threads == 1) {
        for (int i = 0; i < n_jobs; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex err_mu;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n_jobs) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(err_mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace

std::string csv_header() {
    return "seed,n_devices,n_subcarriers,kappa1,kappa2,kappa3,p_max_dbm,method,objective,"
           "total_energy_j,e_fl_tx_j,e_fl_cmp_j,e_sc_tx_j,t_fl_s,rho,accuracy_sum,outer_iters,"
           "converged,runtime_ms,axis_value";
}

std::string to_csv(const ResultRow& r) {
    std::ostringstream os;
    os << r.seed << ',' << r.n_devices << ',' << r.n_subcarriers << ',' << fmt(r.kappa1) << ','
       << fmt(r.kappa2) << ',' << fmt(r.kappa3) << ',' << fmt(r.p_max_dbm) << ',' << r.method << ','
       << fmt(r.objective) << ',' << fmt(r.total_energy_j) << ',' << fmt(r.e_fl_tx_j) << ','
       << fmt(r.e_fl_cmp_j) << ',' << fmt(r.e_sc_tx_j) << ',' << fmt(r.t_fl_s) << ',' << fmt(r.rho)
       << ',' << fmt(r.accuracy_sum) << ',' << r.outer_iters << ',' << (r.converged ? 1 : 0) << ','
       << fmt(r.runtime_ms) << ',' << fmt(r.axis_value);
    return os.str();
}

std::vector<ResultRow> parse_result_csv(const std::string& text) {
    std::vector<ResultRow> rows;
    std::stringstream ss(text);
    std::string line;
    bool first = true;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line == csv_header()) continue;
        }
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string item;
        while (std::getline(ls, item, ',')) f.push_back(item);
        if (f.size() != 20) throw ConfigError("csv row has " + std::to_string(f.size()) + " fields");
        ResultRow r;
        r.seed = std::stoull(f[0]);
        r.n_devices = std::stoull(f[1]);
        r.n_subcarriers = std::stoull(f[2]);
        r.kappa1 = std::stod(f[3]);
        r.kappa2 = std::stod(f[4]);
        r.kappa3 = std::stod(f[5]);
        r.p_max_dbm = std::stod(f[6]);
        r.method = f[7];
        r.objective = std::stod(f[8]);
        r.total_energy_j = std::stod(f[9]);
        r.e_fl_tx_j = std::stod(f[10]);
        r.e_fl_cmp_j = std::stod(f[11]);
        r.e_sc_tx_j = std::stod(f[12]);
        r.t_fl_s = std::stod(f[13]);
        r.rho = std::stod(f[14]);
        r.accuracy_sum = std::stod(f[15]);
        r.outer_iters = std::stoi(f[16]);
        r.converged = std::stoi(f[17]) != 0;
        r.runtime_ms = std::stod(f[18]);
        r.axis_value = std::stod(f[19]);
        rows.push_back(std::move(r));
    }
    return rows;
}

ResultRow run_single(const ExperimentConfig& cfg, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    Scenario sc = generate_scenario(cfg.constants, seed);

    Allocation alloc;
    int outer_iters = 0;
    bool converged = true;
    if (cfg.method == "proposed") {
        AllocateOutcome out = allocate(sc, cfg.weights, cfg.solver);
        alloc = out.allocation;
        outer_iters = static_cast<int>(out.report.outer_trace.size()) - 1;
        converged = out.report.converged;
    } else if (cfg.method == "equal") {
        alloc = equal_allocation(sc);
    } else if (cfg.method == "comm_only") {
        alloc = comm_only(sc, cfg.weights, seed, cfg.solver);
    } else if (cfg.method == "comp_only") {
        alloc = comp_only(sc, cfg.weights, cfg.solver);
    } else if (cfg.method == "random") {
        alloc = random_allocation(sc, seed);
    } else if (cfg.method == "exhaustive") {
        ExhaustiveResult er = exhaustive_search(sc, cfg.weights, cfg.oracle_grid);
        if (!er.feasible_point_found)
            throw InfeasibleError("exhaustive_search: no feasible grid point");
        alloc = er.best;
    } else {
        throw ConfigError("unknown method '" + cfg.method + "'");
    }
    const CostBreakdown costs = evaluate(sc, alloc, cfg.weights);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    ResultRow r;
    r.seed = seed;
    r.n_devices = cfg.constants.n_devices;
    r.n_subcarriers = cfg.constants.n_subcarriers;
    r.kappa1 = cfg.weights.kappa1;
    r.kappa2 = cfg.weights.kappa2;
    r.kappa3 = cfg.weights.kappa3;
    r.p_max_dbm = watts_to_dbm(cfg.constants.p_max_w);
    r.method = cfg.method;
    r.objective = costs.objective;
    r.total_energy_j = costs.total_energy_j();
    for (std::size_t n = 0; n < sc.n_devices(); ++n) {
        r.e_fl_tx_j += costs.e_fl_tx_j[n];
        r.e_fl_cmp_j += costs.e_fl_cmp_j[n];
        r.e_sc_tx_j += costs.e_sc_j[n];
    }
    r.t_fl_s = costs.t_fl_s;
    r.rho = alloc.rho;
    r.accuracy_sum = costs.accuracy_sum;
    r.outer_iters = outer_iters;
    r.converged = converged;
    r.runtime_ms = ms;
    return r;
}

std::vector<ResultRow> run(const ExperimentConfig& cfg) {
    std::vector<ResultRow> rows(static_cast<std::size_t>(cfg.n_seeds));
    parallel_for(cfg.n_seeds, cfg.threads,
                 [&](int i) { rows[static_cast<std::size_t>(i)] = run_single(cfg, cfg.seed + static_cast<std::uint64_t>(i)); });
    std::sort(rows.begin(), rows.end(),
              [](const ResultRow& a, const ResultRow& b) { return a.seed < b.seed; });
    return rows;
}

std::vector<ResultRow> sweep(const ExperimentConfig& cfg, const std::string& axis,
                             const std::vector<double>& values) {
    if (values.empty()) throw ConfigError("sweep requires at least one axis value");
    struct Job {
        double value;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (double v : values)
        for (int i = 0; i < cfg.n_seeds; ++i)
            jobs.push_back({v, cfg.seed + static_cast<std::uint64_t>(i)});
    std::vector<ResultRow> rows(jobs.size());
    parallel_for(static_cast<int>(jobs.size()), cfg.threads, [&](int i) {
        const Job& j = jobs[static_cast<std::size_t>(i)];
        ExperimentConfig c = apply_axis(cfg, axis, j.value);
        ResultRow r = run_single(c, j.seed);
        r.axis_value = j.value;
        rows[static_cast<std::size_t>(i)] = r;
    });
    std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        if (a.axis_value != b.axis_value) return a.axis_value < b.axis_value;
        return a.seed < b.seed;
    });
    return rows;
}

std::vector<CompareRow> compare(const ExperimentConfig& cfg) {
    ExperimentConfig toy = cfg;
    toy.constants.n_devices = 4;
    toy.constants.n_subcarriers = 5;
    std::vector<CompareRow> out;
    const char* methods[] = {"proposed", "equal", "comm_only", "comp_only", "random", "exhaustive"};
    for (const char* m : methods) {
        ExperimentConfig c = toy;
        c.method = m;
        const auto t0 = std::chrono::steady_clock::now();
        ResultRow r = run_single(c, toy.seed);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.push_back({m, r.objective, secs});
    }
    return out;
}

void write_rows(std::ostream& os, const std::vector<ResultRow>& rows) {
    os << csv_header() << '\n';
    for (const auto& r : rows) os << to_csv(r) << '\n';
}

void write_rows_to(const std::string& out_path, const std::vector<ResultRow>& rows) {
    if (out_path == "-" || out_path.empty()) {
        write_rows(std::cout, rows);
        return;
    }
    std::ofstream f(out_path);
    if (!f) throw ConfigError("cannot open output file: " + out_path);
    write_rows(f, rows);
}

}  // namespace fedalloc
