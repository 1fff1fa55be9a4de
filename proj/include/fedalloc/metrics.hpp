#pragma once

#include <vector>

#include "fedalloc/scenario.hpp"
#include "fedalloc/types.hpp"

namespace fedalloc {

// Decision variables. assign entries live in [0,1] while solving and are
// binary in final outputs.
struct Allocation {
    std::vector<double> freq_hz;  // f_n
    Mat power_w;                  // p_{n,k}
    Mat assign;                   // x_{n,k}
    double rho = 1.0;
};

struct CostBreakdown {
    std::vector<double> rate_bps;   // r_n
    std::vector<double> tau_s;      // FL upload time
    std::vector<double> t_cmp_s;    // local computation time
    std::vector<double> e_fl_tx_j;  // FL transmission energy
    std::vector<double> e_fl_cmp_j; // FL computation energy
    std::vector<double> t_sc_s;     // SemCom transmission time
    std::vector<double> e_sc_j;     // SemCom transmission energy
    double t_fl_s = 0.0;            // max_n (tau_n + t_cmp_n)
    double accuracy_sum = 0.0;
    double objective = 0.0;

    double total_energy_j() const {
        double e = 0.0;
        for (std::size_t i = 0; i < e_fl_tx_j.size(); ++i)
            e += e_fl_tx_j[i] + e_fl_cmp_j[i] + e_sc_j[i];
        return e;
    }
};

// Shannon rate of one subcarrier slice: bbar * log2(1 + p*g/(n0*bbar)).
double link_rate(double p_w, double gain, double bbar_hz, double n0_w_per_hz);

// r_n = sum_k x_{n,k} * link_rate(p_{n,k}, ...)
double device_rate(const Scenario& s, const Allocation& a, std::size_t n);
std::vector<double> device_rates(const Scenario& s, const Allocation& a);

double accuracy(const Scenario& s, double rho);
// a*b*rho^(b-1); +infinity at rho = 0 (bisection bracket sentinel).
double accuracy_derivative(const Scenario& s, double rho);

// Full cost evaluation of an allocation. Throws InfeasibleError when a device
// with traffic has zero rate.
CostBreakdown evaluate(const Scenario& s, const Allocation& a, const Weights& w);

// Constraint violation summary for the original problem (power caps, exclusive
// assignment, SemCom deadline, rho range). Zero when feasible.
double max_constraint_violation(const Scenario& s, const Allocation& a);

}  // namespace fedalloc
