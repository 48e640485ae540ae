#include <doctest.h>

#include "udw/rate.hpp"

using namespace udw;

namespace {
double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }
}

TEST_CASE("inertial rate is exactly the false-alarm exponential") {
    Worldline w = Worldline::inertial();
    DetectorConfig cfg;
    cfg.sigma = 1.0;
    for (double Es : {10.0, 20.0, 40.0}) {
        const double expect = std::exp(-Es) / (4.0 * pi * cfg.sigma);
        RateResult r = rate_residue_full(w, 0.0, Es / cfg.sigma, cfg);
        CHECK(rel(r.value, expect) < 1e-10);
        CHECK(std::abs(r.imag) < 1e-10 * std::abs(r.value) + 1e-300);
    }
    // P sigma / alpha = e^{-10}/(4 pi) at E sigma = 10
    CHECK(rate_residue(w, 0.0, 10.0, cfg) * cfg.sigma ==
          doctest::Approx(3.6128e-6).epsilon(1e-3));
}

TEST_CASE("uniform acceleration: residue engine vs Lerch closed form (double roots)") {
    Worldline w = Worldline::uniform_acceleration(1.0);
    DetectorConfig cfg;
    cfg.sigma = 100.0;         // sigma a = 100
    cfg.radius_factor = 0.8;   // R = 80: dropped poles contribute < e^{-2 beta 13}
    const SigmaFn sf = w.sigma_fn(0.0);
    const PoleSet ps = find_poles(sf, cfg);
    for (double beta : {2.0, 5.0, 10.0}) {
        const double E = beta / two_pi;  // T_a = 1/2 pi
        RateResult r = rate_from_poles(sf, ps, E, cfg);
        CHECK(rel(r.value, rate_closed_uniform(1.0, E, 100.0)) < 1e-8);
        CHECK(r.value > -1e-10);
        CHECK(std::abs(r.imag) < 1e-10 * std::abs(r.value));
    }
}

TEST_CASE("uniform acceleration: pole suppression and truncation stability") {
    Worldline w = Worldline::uniform_acceleration(1.0);
    DetectorConfig cfg;
    cfg.sigma = 100.0;
    cfg.radius_factor = 0.6;
    const double E = 5.0 / two_pi;
    const SigmaFn sf = w.sigma_fn(0.0);
    const PoleSet ps = find_poles(sf, cfg);

    // successive residue contributions shrink
    auto h = [&](cdouble y) {
        const double s = cfg.sigma;
        return s * s / (y * y + s * s) * std::exp(cdouble(0.0, -E) * y) / sf.eval(y);
    };
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < std::min<std::size_t>(ps.poles.size(), 6); ++n) {
        const cdouble y0 = cdouble(0.0, -1.0) * ps.poles[n].w;
        const double term = std::abs(residue_at(h, y0, 1e-3 * two_pi));
        CHECK(term < prev);
        prev = term;
    }

    // enlarging the radius beyond 6 sigma-equivalent changes nothing at 1e-6
    DetectorConfig cfg2 = cfg;
    cfg2.radius_factor = 1.2;
    const double p1 = rate_from_poles(sf, ps, E, cfg).value;
    const double p2 = rate_residue(w, 0.0, E, cfg2);
    CHECK(rel(p1, p2) < 1e-6);
}

TEST_CASE("quadrature oracle agrees with closed forms") {
    DetectorConfig cfg;
    cfg.sigma = 1.0;
    // inertial at E sigma = 10
    CHECK(rel(rate_quadrature_oracle(Worldline::inertial(), 0.0, 10.0, cfg),
              std::exp(-10.0) / (4.0 * pi)) < 1e-6);

    // uniform acceleration at sigma a = 100, E = 5 a / 2 pi
    DetectorConfig cfg2;
    cfg2.sigma = 100.0;
    const double E = 5.0 / two_pi;
    const double oracle = rate_quadrature_oracle(Worldline::uniform_acceleration(1.0), 0.0, E, cfg2);
    CHECK(rel(oracle, rate_closed_uniform(1.0, E, 100.0)) < 1e-6);
}

TEST_CASE("oracle is epsilon-invariant") {
    Worldline w = Worldline::uniform_acceleration(1.0);
    DetectorConfig a;
    a.sigma = 100.0;
    a.epsilon = 1e-6 * a.sigma;
    DetectorConfig b = a;
    b.epsilon = 1e-4 * b.sigma;
    const double E = 5.0 / two_pi;
    const double va = rate_quadrature_oracle(w, 0.0, E, a);
    const double vb = rate_quadrature_oracle(w, 0.0, E, b);
    CHECK(rel(va, vb) < 1e-8);

    Worldline c = Worldline::circular(1.0, 2.0);
    DetectorConfig ca;
    ca.sigma = 10.0 / std::sqrt(3.0);
    ca.epsilon = 1e-6 * ca.sigma;
    DetectorConfig cb = ca;
    cb.epsilon = 1e-4 * cb.sigma;
    const double Ec = 2.0 * std::sqrt(3.0);  // E sigma = 20
    CHECK(rel(rate_quadrature_oracle(c, 0.0, Ec, ca), rate_quadrature_oracle(c, 0.0, Ec, cb)) <
          1e-8);
}

TEST_CASE("cusped path: engine, closed form and oracle") {
    Worldline w = Worldline::cusped(1.0);
    DetectorConfig cfg;
    cfg.sigma = 100.0;
    cfg.radius_factor = 0.5;
    for (double E : {1.0, 2.0}) {
        const double engine = rate_residue(w, 0.0, E, cfg);
        CHECK(rel(engine, rate_cusped(1.0, E, 100.0)) < 1e-10);
    }
    CHECK(rel(rate_quadrature_oracle(w, 0.0, 1.0, cfg), rate_cusped(1.0, 1.0, 100.0)) < 1e-6);
}

TEST_CASE("circular path: residue engine vs oracle") {
    const double a = 1.0, T = 2.0, om = std::sqrt(3.0);
    Worldline w = Worldline::circular(a, T);
    DetectorConfig cfg;
    cfg.sigma = 10.0 / om;            // E sigma in [10, 50] keeps E/omega in [1, 5]
    cfg.radius_factor = 130.0;        // deep search; capped by the overflow bound
    const SigmaFn sf = w.sigma_fn(0.0);
    const PoleSet ps = find_poles(sf, cfg);
    REQUIRE(!ps.poles.empty());
    for (double Es : {10.0, 30.0, 50.0}) {
        const double E = Es / cfg.sigma;
        const double engine = rate_from_poles(sf, ps, E, cfg).value;
        const double oracle = rate_quadrature_oracle_full(sf, E, cfg).value;
        CHECK(rel(engine, oracle) < 1e-6);
        CHECK(engine > -1e-10);
    }
}

TEST_CASE("adiabatic consistency for a slowly drifting rapidity") {
    // b(tau) = a tau + q tau^2, adot = 2q at tau = 0
    const double a = 1.0, adot = 1e-3;
    Worldline w = Worldline::rapidity_poly({0.0, a, 0.5 * adot});
    DetectorConfig cfg;
    cfg.sigma = 50.0;
    cfg.radius_factor = 0.8;  // R = 40
    const double E = 1.0;     // E sigma = 50
    const double engine = rate_residue(w, 0.0, E, cfg);
    const double model = rate_adiabatic_corrected(a, adot, E);
    const double budget = 3.0 * std::max(1.0 / (cfg.sigma * a * cfg.sigma * a),
                                         adot * cfg.sigma / a);
    CHECK(rel(engine, model) < budget);
}

TEST_CASE("spectrum sweep") {
    Worldline w = Worldline::inertial();
    DetectorConfig cfg;
    cfg.sigma = 1.0;
    cfg.energy_grid = {30.0, 10.0, 20.0};  // unsorted on purpose
    Spectrum sp = spectrum(w, 0.0, cfg, true);
    REQUIRE(sp.rows.size() == 3);
    CHECK(sp.rows[0].E == 10.0);  // sorted by E
    CHECK(sp.rows[2].E == 30.0);
    for (const auto& row : sp.rows) {
        CHECK(rel(row.p_over_alpha, std::exp(-row.E) / (4.0 * pi)) < 1e-10);
        CHECK_FALSE(row.esigma_warning);
        if (row.oracle_residual) CHECK(*row.oracle_residual < 1e-6);
    }
    // E sigma < 10 flags the row
    cfg.energy_grid = {5.0};
    Spectrum sp2 = spectrum(w, 0.0, cfg);
    CHECK(sp2.rows[0].esigma_warning);
    // empty grid -> empty spectrum, no error
    cfg.energy_grid = {};
    CHECK(spectrum(w, 0.0, cfg).rows.empty());
}

TEST_CASE("convolve_time") {
    const double sigma = 2.0;
    // constant
    CHECK(convolve_time([](double) { return 3.5; }, sigma, 1.2) ==
          doctest::Approx(3.5).epsilon(1e-12));
    // linear: Gaussian symmetry returns the center value
    CHECK(convolve_time([](double s) { return s; }, sigma, 0.7) ==
          doctest::Approx(0.7).epsilon(1e-10));
    // indicator of width sigma/10: peak ~ width/(sqrt(2 pi) sigma)
    const double width = sigma / 10.0;
    auto ind = [width](double s) { return std::abs(s) < 0.5 * width ? 1.0 : 0.0; };
    const double peak = convolve_time(ind, sigma, 0.0);
    const double expect = std::erf(width / (2.0 * std::sqrt(2.0) * sigma));
    CHECK(std::abs(peak - expect) < 0.05 * expect);
    CHECK(expect == doctest::Approx(width / (std::sqrt(two_pi) * sigma)).epsilon(1e-3));
}
