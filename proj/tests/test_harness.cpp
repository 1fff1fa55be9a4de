#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "fedalloc/harness.hpp"

using namespace fedalloc;

TEST_CASE("empty config text yields the documented defaults") {
    ExperimentConfig cfg = parse_config("");
    CHECK(cfg.constants.n_devices == 10);
    CHECK(cfg.constants.n_subcarriers == 50);
    CHECK(cfg.constants.total_bandwidth_hz == doctest::Approx(20e6));
    CHECK(cfg.constants.p_max_w == doctest::Approx(0.1));
    CHECK(cfg.constants.noise_psd_w_per_hz == doctest::Approx(3.981e-21).epsilon(1e-4));
    CHECK(cfg.constants.t_semcom_max_s == 20.0);
    CHECK(cfg.constants.taylor_power_q == 2);
    CHECK(cfg.constants.accuracy_coeff == doctest::Approx(0.6356));
    CHECK(cfg.constants.accuracy_exponent == doctest::Approx(0.4025));
    CHECK(cfg.weights.kappa1 == 1.0);
}

TEST_CASE("config parsing handles units, comments and errors") {
    SUBCASE("dbm keys convert at the boundary") {
        ExperimentConfig cfg = parse_config("p_max_dbm = 10\nnoise_psd_dbm_per_hz = -100\n");
        CHECK(cfg.constants.p_max_w == doctest::Approx(0.01));
        CHECK(cfg.constants.noise_psd_w_per_hz == doctest::Approx(1e-13));
    }
    SUBCASE("comments and blank lines are skipped") {
        ExperimentConfig cfg = parse_config("# comment\n\nkappa1 = 2.5 # trailing\n");
        CHECK(cfg.weights.kappa1 == 2.5);
    }
    SUBCASE("unknown key names the line") {
        CHECK_THROWS_WITH_AS(parse_config("\nbogus_key = 1\n"), doctest::Contains("line 2"),
                             ConfigError);
        CHECK_THROWS_WITH_AS(parse_config("bogus_key = 1"), doctest::Contains("bogus_key"),
                             ConfigError);
    }
    SUBCASE("bad number names the line") {
        CHECK_THROWS_AS(parse_config("kappa1 = abc"), ConfigError);
    }
    SUBCASE("missing file is an io error") {
        CHECK_THROWS_AS(load_config_file("/nonexistent/path.cfg"), ConfigError);
    }
}

TEST_CASE("csv rows round-trip to identical values") {
    ExperimentConfig cfg = parse_config("n_devices = 2\nn_subcarriers = 4\nseeds = 2\n");
    cfg.method = "equal";
    auto rows = run(cfg);
    REQUIRE(rows.size() == 2);
    std::ostringstream os;
    write_rows(os, rows);
    auto parsed = parse_result_csv(os.str());
    REQUIRE(parsed.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(parsed[i].seed == rows[i].seed);
        CHECK(parsed[i].objective == rows[i].objective);
        CHECK(parsed[i].total_energy_j == rows[i].total_energy_j);
        CHECK(parsed[i].rho == rows[i].rho);
        CHECK(parsed[i].method == rows[i].method);
        CHECK(parsed[i].converged == rows[i].converged);
    }
}

TEST_CASE("sweep reuses the same seeds across axis values") {
    ExperimentConfig cfg = parse_config("n_devices = 2\nn_subcarriers = 4\nseeds = 3\n");
    cfg.method = "equal";
    auto rows = sweep(cfg, "kappa1", {0.5, 2.0});
    REQUIRE(rows.size() == 6);
    for (int i = 0; i < 3; ++i) {
        CHECK(rows[i].axis_value == 0.5);
        CHECK(rows[i + 3].axis_value == 2.0);
        CHECK(rows[i].seed == rows[i + 3].seed);
    }
    SUBCASE("unknown axis is a config error") {
        CHECK_THROWS_AS(sweep(cfg, "bogus", {1.0}), ConfigError);
    }
}

TEST_CASE("run is deterministic per seed") {
    ExperimentConfig cfg = parse_config("n_devices = 2\nn_subcarriers = 4\n");
    cfg.method = "proposed";
    ResultRow a = run_single(cfg, 5);
    ResultRow b = run_single(cfg, 5);
    CHECK(a.objective == b.objective);
    CHECK(a.rho == b.rho);
    CHECK(a.total_energy_j == b.total_energy_j);
}
