#include "ehcr/errors.hpp"
#include "ehcr/params.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace ehcr;

TEST_CASE("defaults match the reference simulation table") {
    const SystemParams p;
    CHECK(p.M == 3);
    CHECK(p.N == 20);
    CHECK(p.BW == 10e3);
    CHECK(p.C == 2500);
    CHECK(p.lambda == 1.0);
    CHECK(p.P1 == 0.3);
    CHECK(p.P2 == 0.8);
    CHECK(p.p_p == 1.0);
    CHECK(p.p_max == 0.5);
    CHECK(p.E_max == 2.0);
    CHECK(p.B_max == 6);
    CHECK(p.eta == 0.9);
    CHECK(p.R0 == 0.3);
    CHECK(p.R1 == 0.3);
    CHECK(p.d_s_range.lo == 15);
    CHECK(p.d_s_range.hi == 60);
    CHECK(p.d_p_range.lo == 5);
    CHECK(p.d_p_range.hi == 20);
    CHECK(p.w1 == doctest::Approx(8.0 / 2500.0));
    CHECK(p.w2 == 10.0);
    CHECK(p.w3 == 4.0);
    // -150 dBm
    CHECK(p.noise_w == doctest::Approx(dbm_to_watt(-150)).epsilon(1e-12));
    CHECK_NOTHROW(p.validate());
}

TEST_CASE("dbm conversion") {
    CHECK(dbm_to_watt(30) == doctest::Approx(1.0));
    CHECK(dbm_to_watt(0) == doctest::Approx(1e-3));
}

TEST_CASE("validation rejects inconsistent parameters") {
    auto bad = [](auto mutate) {
        SystemParams p;
        mutate(p);
        CHECK_THROWS_AS(p.validate(), ConfigError);
    };
    bad([](SystemParams& p) { p.N = 0; });
    bad([](SystemParams& p) { p.P1 = 1.5; });
    bad([](SystemParams& p) { p.eta = 0; });
    bad([](SystemParams& p) { p.B_max = 0; });
    bad([](SystemParams& p) { p.lambda = -1; });
    bad([](SystemParams& p) { p.d_s_range = {10, 5}; });
    bad([](SystemParams& p) { p.d_s_range = {4, 60}; });
    bad([](SystemParams& p) { p.E0 = 3; });
}

TEST_CASE("config text: comments, whitespace, extra keys") {
    std::map<std::string, std::string> extra;
    const auto p = parse_config("# header\n N = 6 \nM=2 # trailing\n\nlambda=2.5\nepisodes = 60\n", &extra);
    CHECK(p.N == 6);
    CHECK(p.M == 2);
    CHECK(p.lambda == 2.5);
    REQUIRE(extra.count("episodes") == 1);
    CHECK(extra["episodes"] == "60");
    CHECK_THROWS_AS(parse_config("episodes=3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("N 6\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("N = six\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("N = 6.5\n"), ConfigError);
}

TEST_CASE("C sets the loss weight unless w1 is explicit") {
    CHECK(parse_config("C = 1000\n").w1 == doctest::Approx(8.0 / 1000));
    CHECK(parse_config("w1 = 0.5\nC = 1000\n").w1 == 0.5);
    CHECK(parse_config("noise_dbm = -120\n").noise_w == doctest::Approx(1e-15));
}

TEST_CASE("key-value view round-trips") {
    SystemParams p;
    p.N = 7;
    p.lambda = 1.75;
    p.seed = 99;
    SystemParams q;
    for (const auto& [k, v] : to_key_values(p)) apply_key_value(q, k, v);
    CHECK(q.N == 7);
    CHECK(q.lambda == 1.75);
    CHECK(q.seed == 99);
    CHECK(q.w1 == p.w1);
    CHECK_THROWS_AS(apply_key_value(q, "nope", "1"), ConfigError);
}

TEST_CASE("load_config from file and missing file") {
    const auto path = std::filesystem::temp_directory_path() / "ehcr_params_test.cfg";
    {
        std::ofstream f(path);
        f << "B_max = 9\n";
    }
    CHECK(load_config(path.string()).B_max == 9);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_config(path.string()), IoError);
}
