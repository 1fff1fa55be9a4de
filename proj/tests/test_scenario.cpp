#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fedalloc/scenario.hpp"

using namespace fedalloc;

TEST_CASE("dbm conversions match standard identities") {
    CHECK(dbm_to_watts(20.0) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(dbm_to_watts(0.0) == doctest::Approx(1e-3).epsilon(1e-12));
    CHECK(dbm_to_watts(-174.0) == doctest::Approx(3.981071705534969e-21).epsilon(1e-12));
    CHECK_THROWS_AS(watts_to_dbm(0.0), ConfigError);
    CHECK_THROWS_AS(watts_to_dbm(-1.0), ConfigError);
}

TEST_CASE("dbm round trip is exact to 1e-12 relative") {
    for (double dbm : {-174.0, -30.0, 0.0, 10.0, 20.0, 46.0}) {
        const double w = dbm_to_watts(dbm);
        CHECK(watts_to_dbm(w) == doctest::Approx(dbm).epsilon(1e-12));
    }
    for (double w : {1e-21, 1e-9, 0.001, 0.1, 3.0}) {
        CHECK(dbm_to_watts(watts_to_dbm(w)) == doctest::Approx(w).epsilon(1e-12));
    }
}

TEST_CASE("path loss at 0.1 km with zero shadowing") {
    // 128.1 - 37.6 = 90.5 dB -> 8.913e-10
    SystemConstants c;
    c.n_devices = 1;
    c.n_subcarriers = 2;
    c.shadow_std_db = 0.0;
    // find a seed whose draw lands close to 100 m, then check the formula
    bool found = false;
    for (std::uint64_t seed = 0; seed < 4000 && !found; ++seed) {
        Scenario s = generate_scenario(c, seed);
        if (std::abs(s.distances_m[0] - 100.0) < 0.05) {
            const double expect =
                std::pow(10.0, -(128.1 + 37.6 * std::log10(s.distances_m[0] / 1000.0)) / 10.0);
            CHECK(s.gains(0, 0) == doctest::Approx(expect).epsilon(1e-12));
            CHECK(s.gains(0, 0) == doctest::Approx(8.913e-10).epsilon(2e-2));
            found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("generation is deterministic in (constants, seed)") {
    SystemConstants c;
    Scenario a = generate_scenario(c, 42);
    Scenario b = generate_scenario(c, 42);
    CHECK(a.gains == b.gains);
    CHECK(a.cycles_per_sample == b.cycles_per_sample);
    CHECK(a.distances_m == b.distances_m);
    Scenario d = generate_scenario(c, 43);
    CHECK(a.gains.data() != d.gains.data());
}

TEST_CASE("table defaults give a positive 10x50 gain matrix") {
    SystemConstants c;
    Scenario s = generate_scenario(c, 1);
    CHECK(s.gains.rows() == 10);
    CHECK(s.gains.cols() == 50);
    for (double g : s.gains.data()) CHECK(g > 0.0);
    for (double cn : s.cycles_per_sample) {
        CHECK(cn >= c.cycles_per_sample_lo);
        CHECK(cn <= c.cycles_per_sample_hi);
    }
    for (double d : s.distances_m) CHECK(d <= c.cell_radius_m);
}

TEST_CASE("placement is area-uniform over many seeds") {
    SystemConstants c;
    c.n_devices = 10;
    c.n_subcarriers = 1;
    const double half_area_radius = c.cell_radius_m / std::sqrt(2.0);
    std::size_t inside = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 1500; ++seed) {
        Scenario s = generate_scenario(c, seed);
        for (double d : s.distances_m) {
            ++total;
            if (d <= half_area_radius) ++inside;
        }
    }
    const double frac = static_cast<double>(inside) / static_cast<double>(total);
    CHECK(frac > 0.48);
    CHECK(frac < 0.52);
}

TEST_CASE("larger distance means smaller gain when shadowing is off") {
    SystemConstants c;
    c.shadow_std_db = 0.0;
    Scenario s = generate_scenario(c, 9);
    for (std::size_t i = 0; i < s.n_devices(); ++i)
        for (std::size_t j = 0; j < s.n_devices(); ++j)
            if (s.distances_m[i] > s.distances_m[j]) CHECK(s.gains(i, 0) < s.gains(j, 0));
}

TEST_CASE("per-subcarrier shadowing switch varies gains within a row") {
    SystemConstants c;
    c.shadow_per_subcarrier = true;
    Scenario s = generate_scenario(c, 3);
    bool varied = false;
    for (std::size_t k = 1; k < s.n_subcarriers(); ++k)
        if (s.gains(0, k) != s.gains(0, 0)) varied = true;
    CHECK(varied);
}

TEST_CASE("invalid constants raise a configuration error naming the field") {
    SystemConstants c;
    c.total_bandwidth_hz = 0.0;
    CHECK_THROWS_WITH_AS(generate_scenario(c, 1), doctest::Contains("total_bandwidth_hz"),
                         ConfigError);
    SystemConstants c2;
    c2.accuracy_exponent = 1.5;  // must stay increasing and concave
    CHECK_THROWS_WITH_AS(generate_scenario(c2, 1), doctest::Contains("accuracy_exponent"),
                         ConfigError);
    SystemConstants c3;
    c3.taylor_power_q = 0;
    CHECK_THROWS_AS(generate_scenario(c3, 1), ConfigError);
}
