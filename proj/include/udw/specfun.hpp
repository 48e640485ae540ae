#pragma once

#include <cstdint>
#include <vector>

#include "udw/core.hpp"
#include "udw/quadrature.hpp"

namespace udw::specfun {

struct LerchResult {
    double value = 0.0;
    int terms_used = 0;
    double truncation_bound = 0.0;  // rigorous bound on the dropped geometric tail
};

/// Lerch-Hurwitz transcendent Phi_s(z, x) = sum_{n>=0} z^n / (n+x)^s by direct
/// summation, for 0 <= z < 1, x > 0.  The tail after N terms is bounded by
/// z^N / ((N+x)^s (1-z)).
inline LerchResult lerch_phi(double z, double s, double x, double tol = 1e-14) {
    if (z < 0.0 || z >= 1.0) throw domain_error("lerch_phi: need 0 <= z < 1");
    if (x <= 0.0) throw domain_error("lerch_phi: need x > 0");
    LerchResult r;
    double zn = 1.0;
    const int n_max = 20000000;
    for (int n = 0; n < n_max; ++n) {
        r.value += zn / std::pow(n + x, s);
        zn *= z;
        r.terms_used = n + 1;
        r.truncation_bound = zn / (std::pow(n + 1 + x, s) * (1.0 - z));
        if (r.truncation_bound <= tol) return r;
        if (zn == 0.0) return r;
    }
    throw numerical_error("lerch_phi: no convergence");
}

/// Analytic continuation sum_{n>=0} z^n/(n-x)^s used by the closed-form
/// uniform-acceleration spectrum; the caller must handle the n = round(x) term.
inline double lerch_phi_neg(double z, double s, double x, int skip_n, double tol = 1e-15) {
    double acc = 0.0, zn = 1.0;
    for (int n = 0; n < 20000000; ++n) {
        if (n != skip_n) acc += zn / std::pow(n - x, s);
        zn *= z;
        if (n > x && zn / (std::pow(n + 1 - x, s) * (1.0 - z)) <= tol) break;
    }
    return acc;
}

/// L_n(z) from the recursion L_0 = 1/(1-z), L_n = z d/dz L_{n-1}, carried as
/// exact integer coefficients of powers of u = 1/(1-z).  n <= 20.
inline double l_poly(int n, double z) {
    if (n < 0 || n > 20) throw domain_error("l_poly: need 0 <= n <= 20");
    std::vector<std::int64_t> c(n + 2, 0);
    c[1] = 1;  // L_0 = u
    for (int k = 0; k < n; ++k) {
        std::vector<std::int64_t> d(n + 2, 0);
        // z d/dz u^j = j u^{j+1} - j u^j
        for (int j = 1; j <= k + 1; ++j) {
            if (c[j] == 0) continue;
            d[j + 1] += j * c[j];
            d[j] -= j * c[j];
        }
        c.swap(d);
    }
    const double u = 1.0 / (1.0 - z);
    double acc = 0.0;
    for (int j = n + 1; j >= 1; --j) acc = acc * u + double(c[j]);
    return acc * u;
}

/// Asymptotic expansion of Phi_s(z, x) for large x, s = 1 or 2:
///   Phi_1 = 1/((1-z)x)  + sum_n (-1)^n L_n(z)/x^{n+1}
///   Phi_2 = 1/((1-z)x^2) + sum_n (-1)^n (n+1) L_n(z)/x^{n+2}
/// truncated at k_max or at the smallest term, whichever comes first.
inline double lerch_phi_asym(double z, int s, double x, int k_max = 20) {
    if (s != 1 && s != 2) throw domain_error("lerch_phi_asym: s must be 1 or 2");
    if (x < 10.0) throw domain_error("lerch_phi_asym: need x >= 10");
    if (k_max > 20) k_max = 20;
    double acc = (s == 1) ? 1.0 / ((1.0 - z) * x) : 1.0 / ((1.0 - z) * x * x);
    double prev_mag = std::numeric_limits<double>::infinity();
    double xp = (s == 1) ? x : x * x;
    for (int n = 1; n <= k_max; ++n) {
        xp *= x;
        double term = l_poly(n, z) / xp;
        if (s == 2) term *= (n + 1);
        if (n & 1) term = -term;
        if (std::abs(term) >= prev_mag) break;  // optimal truncation
        acc += term;
        prev_mag = std::abs(term);
    }
    return acc;
}

namespace detail {

inline cdouble erf_taylor(cdouble u) {
    // erf(u) = (2/sqrt(pi)) sum_k (-1)^k u^{2k+1} / (k! (2k+1))
    const cdouble u2 = u * u;
    cdouble term = u, acc = u;
    for (int k = 1; k < 120; ++k) {
        term *= -u2 / double(k);
        cdouble add = term / double(2 * k + 1);
        acc += add;
        if (std::abs(add) < 1e-18 * std::abs(acc) + 1e-300) break;
    }
    return acc * (2.0 / sqrt_pi);
}

inline cdouble erf_asymptotic(cdouble u) {
    // erf(u) = 1 - e^{-u^2}/(sqrt(pi) u) [1 - 1/(2u^2) + 3/(4u^4) - ...], Re u >= 0
    const cdouble u2 = u * u;
    if (-u2.real() > 700.0) throw overflow_signal("erf_complex: e^{u^2} overflows");
    cdouble s = 1.0, term = 1.0;
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 30; ++k) {
        term *= -(2.0 * k - 1.0) / (2.0 * u2);
        if (std::abs(term) >= prev) break;
        s += term;
        prev = std::abs(term);
    }
    return 1.0 - std::exp(-u2) / (sqrt_pi * u) * s;
}

}  // namespace detail

/// Complex error function; Taylor for |u| <= 4, asymptotic beyond.  Throws
/// overflow_signal when e^{u^2} is not representable (|Im u| too large).
inline cdouble erf_complex(cdouble u) {
    if (std::abs(u) <= 4.0) return detail::erf_taylor(u);
    if (u.real() < 0.0) return -erf_complex(-u);
    return detail::erf_asymptotic(u);
}

/// erfi(u) = -i erf(iu).
inline cdouble erfi_complex(cdouble u) {
    return cdouble(0.0, -1.0) * erf_complex(cdouble(0.0, 1.0) * u);
}

/// g1(x) = sum_{n>=1} e^{-nx}/n = -log(1 - e^{-x}),  x > 0.
inline double g1(double x) {
    if (x <= 0.0) throw domain_error("g1: need x > 0");
    return -std::log1p(-std::exp(-x));
}

/// Cosine-Fourier coefficients of sqrt(1 + v0^2 cos^2 t) over a period:
///   sqrt(1 + v0^2 cos^2 t) = c_0/2 + sum_{k>=1} c_k cos(2kt).
/// Periodic trapezoid rule; spectrally accurate for v0 < 1.
inline std::vector<double> harmonic_coeffs(double v0, int k_max, int n_nodes = 512) {
    if (!(v0 >= 0.0 && v0 < 1.0)) throw domain_error("harmonic_coeffs: need 0 <= v0 < 1");
    std::vector<double> c(k_max + 1, 0.0);
    for (int j = 0; j < n_nodes; ++j) {
        const double t = two_pi * j / n_nodes;
        const double h = std::sqrt(1.0 + v0 * v0 * std::cos(t) * std::cos(t));
        for (int k = 0; k <= k_max; ++k) c[k] += h * std::cos(2.0 * k * t);
    }
    for (double& ck : c) ck *= 2.0 / n_nodes;
    return c;
}

/// Independent cross-check for harmonic_coeffs: binomial expansion of the
/// square root folded with the cos^{2n} -> cos(2kt) reduction,
///   c_k = [k=0: 2] + sum_{n >= max(k,1)} (-1)^{n-1} (2n-3)!!(2n-1)!!
///                                         / (2^{2n-1} (n-k)! (n+k)!) v0^{2n}.
/// Converges for v0 < 1.
inline double harmonic_coeff_series(double v0, int k, int n_max = 400) {
    const double v2 = v0 * v0;
    const int n0 = std::max(k, 1);
    auto dfact = [](int m) {  // m!! with (-1)!! = 1
        double r = 1.0;
        for (int v = m; v >= 2; v -= 2) r *= v;
        return r;
    };
    auto fact = [](int m) {
        double r = 1.0;
        for (int v = 2; v <= m; ++v) r *= v;
        return r;
    };
    double term = dfact(2 * n0 - 3) * dfact(2 * n0 - 1) * std::pow(v2, n0) /
                  (std::pow(2.0, 2 * n0 - 1) * fact(n0 - k) * fact(n0 + k));
    double sign = (n0 % 2 == 1) ? 1.0 : -1.0;
    double acc = (k == 0) ? 2.0 : 0.0;
    for (int n = n0; n <= n_max; ++n) {
        const double add = sign * term;
        acc += add;
        if (std::abs(add) < 1e-18 * std::max(std::abs(acc), 1e-30)) break;
        term *= (2.0 * n - 1.0) * (2.0 * n + 1.0) * v2 / (4.0 * (n + 1.0 - k) * (n + 1.0 + k));
        sign = -sign;
    }
    return acc;
}

}  // namespace udw::specfun
