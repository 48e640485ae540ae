#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "udw/config.hpp"
#include "udw/runner.hpp"

using namespace udw;

namespace {
std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}
}  // namespace

TEST_CASE("minimal config parses with defaults applied") {
    const std::string text =
        "[worldline]\n"
        "family = inertial\n"
        "[detector]\n"
        "sigma = 2.0\n"
        "[task]\n"
        "type = spectrum\n"
        "[grid]\n"
        "e_min = 5\ne_max = 10\ne_count = 3\n";
    auto r = parse_config(text);
    REQUIRE(r.ok());
    CHECK(r.config.sigma == 2.0);
    CHECK(r.config.epsilon == 0.0);  // -> 1e-6 sigma downstream
    CHECK(make_detector(r.config).eps() == doctest::Approx(2e-6));
    CHECK(r.config.radius_factor == 6.0);
    CHECK(*r.config.task == Task::spectrum);
}

TEST_CASE("validation lists every violation with its line") {
    const std::string text =
        "[detector]\n"
        "sigma = -1\n"
        "bogus = 3\n"
        "[grid]\n"
        "e_count = nope\n";
    auto r = parse_config(text);
    REQUIRE_FALSE(r.ok());
    bool saw_sigma = false, saw_bogus = false, saw_number = false;
    for (const auto& e : r.errors) {
        if (e.key == "detector.sigma" && e.line == 2) saw_sigma = true;
        if (e.key == "detector.bogus" && e.line == 3) saw_bogus = true;
        if (e.key == "grid.e_count" && e.line == 5) saw_number = true;
    }
    CHECK(saw_sigma);
    CHECK(saw_bogus);
    CHECK(saw_number);
}

TEST_CASE("duplicate keys warn and the last value wins") {
    const std::string text =
        "[detector]\n"
        "sigma = 1\n"
        "sigma = 3\n";
    auto r = parse_config(text);
    REQUIRE(r.ok());
    CHECK(r.config.sigma == 3.0);
    REQUIRE(!r.warnings.empty());
    CHECK(r.warnings[0].find("duplicate") != std::string::npos);
}

TEST_CASE("render/parse round trip") {
    ExperimentConfig c;
    c.family = "rel_harmonic";
    c.v0 = 0.25;
    c.omega = 2.0;
    c.sigma = 123.5;
    c.task = Task::figure2;
    c.v0_list = {0.1, 0.9};
    c.e_min = 1.0;
    c.e_max = 9.0;
    c.e_count = 5;
    c.seed = 99;
    const std::string r1 = render_config(c);
    auto parsed = parse_config(r1);
    REQUIRE(parsed.ok());
    CHECK(render_config(parsed.config) == r1);
}

TEST_CASE("run: spectrum task emits a deterministic CSV") {
    ExperimentConfig c;
    c.family = "inertial";
    c.sigma = 1.0;
    c.task = Task::spectrum;
    c.e_min = 10.0;
    c.e_max = 30.0;
    c.e_count = 5;
    c.out = "test_out/spectrum_a";
    RunResult r = run(c);
    REQUIRE(r.exit_code == 0);
    const std::string first = slurp(r.files[0]);
    CHECK(first.find("E,P_over_alpha") != std::string::npos);
    CHECK(first.find("# udwrate") != std::string::npos);
    CHECK(first.find("# config-hash:") != std::string::npos);

    c.out = "test_out/spectrum_b";
    RunResult r2 = run(c);
    REQUIRE(r2.exit_code == 0);
    CHECK(slurp(r2.files[0]) == first);  // byte-identical
}

TEST_CASE("run: roots task lists the accelerated double zeros") {
    ExperimentConfig c;
    c.family = "uniform_acceleration";
    c.a = 1.0;
    c.sigma = 50.0;
    c.radius_factor = 1.0;
    c.task = Task::roots;
    c.out = "test_out/roots";
    RunResult r = run(c);
    REQUIRE(r.exit_code == 0);
    const std::string text = slurp(r.files[0]);
    int rows = 0;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line))
        if (!line.empty() && line[0] != '#' && line.find("w_re") == std::string::npos) ++rows;
    CHECK(rows == 7);  // w = 2 pi n, n = 1..7 inside R = 50
    CHECK(text.find(",2,") != std::string::npos);  // multiplicity column
}

TEST_CASE("run: sample task is seed-deterministic") {
    ExperimentConfig c;
    c.family = "uniform_acceleration";
    c.a = 1.0;
    c.sigma = 100.0;
    c.radius_factor = 0.6;
    c.task = Task::sample;
    c.band_e_min = 0.15;
    c.band_e_max = 0.6;
    c.band_count = 30;
    c.horizon = 500.0;
    c.seed = 11;
    c.out = "test_out/sample_a";
    RunResult r1 = run(c);
    REQUIRE(r1.exit_code == 0);
    c.out = "test_out/sample_b";
    RunResult r2 = run(c);
    CHECK(slurp(r1.files[0]) == slurp(r2.files[0]));
}

TEST_CASE("run: figure tasks emit the documented columns") {
    ExperimentConfig c;
    c.task = Task::figure1;
    c.x_list = {25.0, 50.0};
    c.e_min = 1.0;
    c.e_max = 4.0;
    c.e_count = 4;
    c.out = "test_out/fig1";
    RunResult r = run(c);
    REQUIRE(r.exit_code == 0);
    CHECK(slurp(r.files[0]).find("x,E_over_Ta,C") != std::string::npos);

    ExperimentConfig f2;
    f2.task = Task::figure2;
    f2.family = "rel_harmonic";
    f2.omega = 1.0;
    f2.sigma = 100.0;
    f2.radius_factor = 0.5;
    f2.v0_list = {0.1, 0.5};
    f2.e_min = 1.0;
    f2.e_max = 3.0;
    f2.e_count = 3;
    f2.threads = 2;
    f2.out = "test_out/fig2";
    RunResult r2 = run(f2);
    REQUIRE(r2.exit_code == 0);
    const std::string text = slurp(r2.files[0]);
    CHECK(text.find("v0,E_over_omega,log10_P_over_alpha") != std::string::npos);
}
