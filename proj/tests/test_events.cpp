#include <doctest.h>

#include <sstream>

#include "udw/events.hpp"

using namespace udw;

TEST_CASE("total_rate") {
    DetectorConfig cfg;
    cfg.sigma = 1.0;
    Worldline w = Worldline::inertial();
    // zero-width band
    CHECK(total_rate(w, 0.0, Band{10.0, 10.0, 1}, cfg) == 0.0);
    // inertial band [10, 20]/sigma: int e^{-E sigma}/(4 pi sigma) dE; trapezoid
    // error on this grid is (dE)^2/12 relative
    const double expect = (std::exp(-10.0) - std::exp(-20.0)) / (4.0 * pi);
    const double got = total_rate(w, 0.0, Band{10.0, 20.0, 2000}, cfg);
    CHECK(std::abs(got - expect) < 5e-6 * expect);

    // grid refinement stability on the accelerated family
    DetectorConfig cfg2;
    cfg2.sigma = 100.0;
    cfg2.radius_factor = 0.6;
    Worldline u = Worldline::uniform_acceleration(1.0);
    const double c1 = total_rate(u, 0.0, Band{0.1, 0.5, 1000}, cfg2);
    const double c2 = total_rate(u, 0.0, Band{0.1, 0.5, 2000}, cfg2);
    CHECK(std::abs(c1 - c2) < 1e-6 * std::abs(c2));
}

TEST_CASE("constant-rate Poisson statistics over seeded runs") {
    const double lam = 4.0, T = 2.0;  // lambda T = 8
    const int runs = 10000;
    double total = 0.0;
    for (int s = 0; s < runs; ++s) {
        auto clicks = sample_clicks_with_rate([&](double) { return lam; }, lam, T, 1000 + s);
        total += double(clicks.size());
    }
    const double mean = total / runs;
    const double se = std::sqrt(lam * T / runs);
    CHECK(std::abs(mean - lam * T) < 3.0 * se);
}

TEST_CASE("thinning reproduces a time-dependent intensity") {
    // lambda(t) = lam0 (1 + sin t); bin the empirical intensity mod 2 pi
    const double lam0 = 50.0, T = 16.0 * two_pi;
    auto rate = [&](double t) { return lam0 * (1.0 + std::sin(t)); };
    std::vector<double> all;
    int trains = 0;
    while (all.size() < 100000) {
        auto c = sample_clicks_with_rate(rate, 2.0 * lam0, T, 77 + trains);
        all.insert(all.end(), c.begin(), c.end());
        ++trains;
    }
    const int bins = 12;
    std::vector<double> count(bins, 0.0);
    for (double t : all) {
        const double phase = std::fmod(t, two_pi);
        count[std::min(bins - 1, int(phase / two_pi * bins))] += 1.0;
    }
    for (int b = 0; b < bins; ++b) {
        const double lo = two_pi * b / bins, hi = two_pi * (b + 1) / bins;
        // fraction of the periodic intensity falling in this phase bin
        const double frac = ((hi - lo) + (std::cos(lo) - std::cos(hi))) / two_pi;
        const double expect = double(all.size()) * frac;
        CHECK(std::abs(count[b] - expect) < 0.05 * expect);
    }
}

TEST_CASE("zero rate gives an empty train") {
    auto clicks = sample_clicks_with_rate([](double) { return 0.0; }, 0.0, 10.0, 5);
    CHECK(clicks.empty());
}

TEST_CASE("bit-exact reproducibility and Kolmogorov additivity") {
    DetectorConfig cfg;
    cfg.sigma = 100.0;
    cfg.radius_factor = 0.6;
    Worldline w = Worldline::uniform_acceleration(1.0);
    Band band{0.15, 0.6, 40};
    ClickTrain t1 = sample_clicks(w, band, 3000.0, 42, cfg);
    ClickTrain t2 = sample_clicks(w, band, 3000.0, 42, cfg);
    REQUIRE(t1.times.size() == t2.times.size());
    for (std::size_t i = 0; i < t1.times.size(); ++i) CHECK(t1.times[i] == t2.times[i]);
    CHECK(!t1.times.empty());

    // strictly increasing, all within the horizon
    for (std::size_t i = 1; i < t1.times.size(); ++i) CHECK(t1.times[i] > t1.times[i - 1]);
    CHECK(t1.times.back() <= 3000.0);

    // counts in [0, T1] plus (T1, T2] equal counts in [0, T2] per realization
    const double T1 = 1000.0, T2 = 2500.0;
    std::size_t c01 = 0, c12 = 0, c02 = 0;
    for (double t : t1.times) {
        if (t <= T1) ++c01;
        if (t > T1 && t <= T2) ++c12;
        if (t <= T2) ++c02;
    }
    CHECK(c01 + c12 == c02);

    // different seeds give different trains
    ClickTrain t3 = sample_clicks(w, band, 3000.0, 43, cfg);
    CHECK(t3.times != t1.times);
}

TEST_CASE("click train CSV carries its provenance") {
    ClickTrain t;
    t.times = {0.5, 1.25};
    t.horizon = 2.0;
    t.seed = 7;
    t.band = {0.1, 0.2, 8};
    t.worldline = "inertial";
    std::ostringstream os;
    write_click_csv(os, t);
    const std::string s = os.str();
    CHECK(s.find("# seed: 7") != std::string::npos);
    CHECK(s.find("tau\n0.5\n1.25\n") != std::string::npos);
}
