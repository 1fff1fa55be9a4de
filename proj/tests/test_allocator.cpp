#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fedalloc/allocator.hpp"

using namespace fedalloc;

TEST_CASE("feasible init splits subcarriers round-robin") {
    SystemConstants c;
    SUBCASE("10 devices, 50 subcarriers -> 5 each") {
        Scenario s = generate_scenario(c, 1);
        Allocation a = feasible_init(s);
        for (std::size_t n = 0; n < 10; ++n) {
            std::size_t cnt = 0;
            for (std::size_t k = 0; k < 50; ++k)
                if (a.assign(n, k) > 0.5) ++cnt;
            CHECK(cnt == 5);
            CHECK(a.power_w.row_sum(n) == doctest::Approx(c.p_max_w).epsilon(1e-12));
            CHECK(a.freq_hz[n] == doctest::Approx(0.5 * c.f_max_hz));
        }
    }
    SUBCASE("3 devices, 5 subcarriers -> counts (2,2,1), lower index first") {
        c.n_devices = 3;
        c.n_subcarriers = 5;
        Scenario s = generate_scenario(c, 2);
        Allocation a = feasible_init(s);
        std::size_t cnt[3] = {0, 0, 0};
        for (std::size_t n = 0; n < 3; ++n)
            for (std::size_t k = 0; k < 5; ++k)
                if (a.assign(n, k) > 0.5) ++cnt[n];
        CHECK(cnt[0] == 2);
        CHECK(cnt[1] == 2);
        CHECK(cnt[2] == 1);
    }
}

TEST_CASE("feasible init satisfies every constraint across many seeds") {
    SystemConstants c;
    Weights w;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        Scenario s = generate_scenario(c, seed);
        Allocation a = feasible_init(s);
        CHECK(max_constraint_violation(s, a) <= 1e-9);
        CHECK_NOTHROW(evaluate(s, a, w));
    }
}

TEST_CASE("allocate on a default-sized scenario converges with a clean trace") {
    SystemConstants c;
    Weights w;
    Scenario s = generate_scenario(c, 11);
    AllocateOutcome out = allocate(s, w);
    CHECK(out.report.converged);
    const auto& tr = out.report.outer_trace;
    REQUIRE(tr.size() >= 2);
    for (std::size_t i = 1; i < tr.size(); ++i)
        CHECK(tr[i] <= tr[i - 1] + 1e-8 * std::max(1.0, std::abs(tr[i - 1])));
    // binary and feasible output
    double gap = 0.0;
    for (double v : out.allocation.assign.data()) gap += v * (1.0 - v);
    CHECK(gap == 0.0);
    CHECK(max_constraint_violation(s, out.allocation) <= 1e-9);
    // the report costs match a re-evaluation
    CHECK(out.costs.objective ==
          doctest::Approx(evaluate(s, out.allocation, w).objective).epsilon(1e-12));
}

TEST_CASE("degenerate single device, single subcarrier reaches a fixed point fast") {
    SystemConstants c;
    c.n_devices = 1;
    c.n_subcarriers = 1;
    Weights w;
    Scenario s = generate_scenario(c, 5);
    AllocateOutcome out = allocate(s, w);
    CHECK(out.report.converged);
    CHECK(out.report.outer_trace.size() <= 4);  // <= 3 outer steps
    CHECK(out.allocation.assign(0, 0) == 1.0);
}

TEST_CASE("fewer subcarriers than devices is rejected") {
    SystemConstants c;
    c.n_devices = 4;
    c.n_subcarriers = 2;
    Scenario s = generate_scenario(c, 1);
    CHECK_THROWS_AS(feasible_init(s), InfeasibleError);
}
