#include <doctest.h>

#include <random>

#include "udw/quadrature.hpp"
#include "udw/specfun.hpp"

using namespace udw;
using namespace udw::specfun;

namespace {
double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }
}

TEST_CASE("lerch_phi basics") {
    // z = 0: single term x^{-s}
    CHECK(lerch_phi(0.0, 2.0, 2.0).value == doctest::Approx(0.25).epsilon(1e-14));
    // sum z^n/(n+1) = -ln(1-z)/z at z = 1/2 -> 2 ln 2
    CHECK(rel(lerch_phi(0.5, 1.0, 1.0, 1e-15).value, 2.0 * std::log(2.0)) < 1e-13);
    CHECK_THROWS_AS(lerch_phi(1.0, 1.0, 1.0), domain_error);
    CHECK_THROWS_AS(lerch_phi(0.5, 1.0, 0.0), domain_error);
    // the reported truncation bound really bounds the dropped tail
    auto r = lerch_phi(0.9, 1.5, 3.0, 1e-6);
    auto tight = lerch_phi(0.9, 1.5, 3.0, 1e-15);
    CHECK(std::abs(r.value - tight.value) <= r.truncation_bound * (1.0 + 1e-12));
}

TEST_CASE("lerch_phi decreasing in x") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uz(0.0, 0.95), ux(0.5, 40.0), us(0.5, 3.0);
    for (int i = 0; i < 200; ++i) {
        const double z = uz(rng), s = us(rng);
        double x1 = ux(rng), x2 = ux(rng);
        if (x1 > x2) std::swap(x1, x2);
        if (x2 - x1 < 1e-3) continue;
        CHECK(lerch_phi(z, s, x1).value > lerch_phi(z, s, x2).value);
    }
}

TEST_CASE("l_poly recursion") {
    CHECK(l_poly(0, 0.5) == doctest::Approx(2.0));
    CHECK(l_poly(1, 0.5) == doctest::Approx(2.0));   // z/(1-z)^2
    CHECK(l_poly(1, 0.0) == doctest::Approx(0.0));
    CHECK(l_poly(2, 0.5) == doctest::Approx(6.0));   // z(1+z)/(1-z)^3
    // against the defining sum L_n(z) = sum n^j z^n
    for (int n : {3, 5, 8}) {
        const double z = 0.3;
        double brute = 0.0;
        for (int m = 1; m < 400; ++m) brute += std::pow(double(m), n) * std::pow(z, m);
        CHECK(rel(l_poly(n, z), brute) < 1e-12);
    }
}

TEST_CASE("lerch asymptotic expansion vs series") {
    CHECK(lerch_phi_asym(0.0, 1, 50.0) == doctest::Approx(1.0 / 50.0).epsilon(1e-14));
    // an asymptotic series cannot beat its optimal-truncation floor
    // ~ e^{-x(1-z)}, so the strict 1e-8 agreement holds where x(1-z) >~ 25;
    // elsewhere the expansion must still be as good as its own smallest term
    for (double x : {25.0, 50.0, 100.0, 200.0})
        for (double z : {0.0, 0.25, 0.5, 0.75, 0.9})
            for (int s : {1, 2}) {
                const double exact = lerch_phi(z, double(s), x, 1e-16).value;
                const double got = lerch_phi_asym(z, s, x);
                if (x * (1.0 - z) >= 25.0) {
                    CHECK(rel(got, exact) < 1e-8);
                } else {
                    // optimal-truncation floor ~ q e^{-q}; the relative error
                    // carries an extra 1/(1-z) from the value itself
                    const double q = x * (1.0 - z);
                    const double floor = 4.0 * (q + 1.0) * std::exp(-q);
                    CHECK(rel(got, exact) < floor);
                }
            }
    // the spec-pinned pair at x = 50
    CHECK(rel(lerch_phi_asym(0.5, 1, 50.0), lerch_phi(0.5, 1.0, 50.0, 1e-16).value) < 1e-10);
    CHECK(rel(lerch_phi_asym(0.5, 2, 50.0), lerch_phi(0.5, 2.0, 50.0, 1e-16).value) < 1e-10);
    // cross-method consistency quoted for z = e^{-5}, x = 15.9
    CHECK(rel(lerch_phi_asym(std::exp(-5.0), 1, 15.9),
              lerch_phi(std::exp(-5.0), 1.0, 15.9, 1e-16).value) < 1e-8);
}

TEST_CASE("erf_complex against a quadrature oracle") {
    // (2/sqrt(pi)) int_0^x e^{-t^2} dt by high-order Gauss-Legendre
    auto erf_oracle = [](double x) {
        auto f = [](cdouble t) { return std::exp(-t * t); };
        return (2.0 / sqrt_pi) * integrate_segment(f, cdouble(0.0), cdouble(x), 96).real();
    };
    CHECK(std::abs(erf_complex(cdouble(0.0)).real()) < 1e-15);
    CHECK(rel(erf_complex(cdouble(1.0)).real(), erf_oracle(1.0)) < 1e-13);
    CHECK(erf_complex(cdouble(1.0)).real() == doctest::Approx(0.842700792949715).epsilon(1e-12));
    for (double x : {0.3, 2.0, 3.7, 4.5, 6.0})
        CHECK(rel(erf_complex(cdouble(x)).real(), erf_oracle(x)) < 1e-12);
    // erfi(i) = -i erf(-1) = i erf(1)
    const cdouble v = erfi_complex(cdouble(0.0, 1.0));
    CHECK(std::abs(v - cdouble(0.0, 1.0) * erf_complex(cdouble(1.0))) < 1e-13);
}

TEST_CASE("erf oddness and conjugation") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3.5, 3.5);
    for (int i = 0; i < 100; ++i) {
        const cdouble z(u(rng), u(rng));
        const cdouble a = erf_complex(z);
        CHECK(std::abs(erf_complex(-z) + a) < 1e-12 * (1.0 + std::abs(a)));
        CHECK(std::abs(erf_complex(std::conj(z)) - std::conj(a)) < 1e-12 * (1.0 + std::abs(a)));
    }
    // overflow is signalled, not silently wrong
    CHECK_THROWS_AS(erf_complex(cdouble(0.0, 28.0)), overflow_signal);
}

TEST_CASE("g1 closed form") {
    CHECK(g1(1.0) == doctest::Approx(0.45867514538708189).epsilon(1e-14));
    CHECK(std::abs(g1(20.0) - 2.0611536224385578e-9) < 1e-15);
    CHECK_THROWS_AS(g1(0.0), domain_error);
    // partial sums: 1000 terms at x = 0.5 agree to 1e-12; 1e4 terms for x >= 0.1
    for (double x : {0.1, 0.5, 2.0}) {
        double s = 0.0;
        const int N = 20000;
        for (int n = 1; n <= N; ++n) s += std::exp(-n * x) / n;
        const double tail = std::exp(-(N + 1) * x) / ((N + 1) * (1.0 - std::exp(-x)));
        CHECK(std::abs(g1(x) - s) <= tail + 1e-12);
    }
}

TEST_CASE("harmonic coefficients") {
    // v0 -> 0: c_0 -> 2, c_k -> 0
    auto c0 = harmonic_coeffs(1e-8, 6);
    CHECK(c0[0] == doctest::Approx(2.0).epsilon(1e-12));
    for (int k = 1; k <= 6; ++k) CHECK(std::abs(c0[k]) < 1e-10);

    // mean at v0 = 0.5 (complete elliptic type value, about 1.0598)
    auto c = harmonic_coeffs(0.5, 20);
    auto mean_oracle = integrate_segment([](cdouble t) {
        return std::sqrt(1.0 + 0.25 * std::cos(t) * std::cos(t));
    }, cdouble(0.0), cdouble(two_pi), 128).real() / two_pi;
    CHECK(rel(0.5 * c[0], mean_oracle) < 1e-12);
    CHECK(0.5 * c[0] == doctest::Approx(1.0598).epsilon(2e-3));

    // Parseval: c0^2/4 + sum c_k^2/2 = 1 + v0^2/2
    for (double v0 : {0.1, 0.5, 0.99}) {
        auto ck = harmonic_coeffs(v0, 40);
        double sum = 0.25 * ck[0] * ck[0];
        for (std::size_t k = 1; k < ck.size(); ++k) sum += 0.5 * ck[k] * ck[k];
        CHECK(std::abs(sum - (1.0 + 0.5 * v0 * v0)) < 1e-10);
    }

    // geometric decay of |c_k|
    auto cd = harmonic_coeffs(0.7, 16);
    for (int k = 2; k <= 14; ++k)
        if (std::abs(cd[k]) > 1e-14) CHECK(std::abs(cd[k + 1]) < 0.9 * std::abs(cd[k]));

    // independent binomial-expansion series agrees with the Fourier integral
    for (double v0 : {0.2, 0.5}) {
        auto ci = harmonic_coeffs(v0, 8);
        for (int k = 0; k <= 6; ++k)
            CHECK(std::abs(harmonic_coeff_series(v0, k) - ci[k]) < 1e-12);
    }
}
