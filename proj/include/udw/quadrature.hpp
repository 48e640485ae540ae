#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <vector>

#include "udw/core.hpp"

namespace udw {

struct GaussRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

namespace detail {

// Newton iteration on the Legendre recurrence; standard Golub-free construction.
inline GaussRule make_gauss_legendre(int n) {
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
        rule.weights[n - 1 - i] = rule.weights[i];
    }
    return rule;
}

}  // namespace detail

/// Cached Gauss-Legendre rule of order n (thread-safe).
inline const GaussRule& gauss_legendre(int n) {
    static std::mutex mtx;
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, detail::make_gauss_legendre(n)).first;
    return it->second;
}

/// Fixed-order Gauss-Legendre along the straight complex segment [z0, z1].
/// `mass`, when given, receives the integral of |f| (the roundoff scale).
template <class F>
cdouble integrate_segment(F&& f, cdouble z0, cdouble z1, int order, double* mass = nullptr) {
    const GaussRule& g = gauss_legendre(order);
    const cdouble mid = 0.5 * (z0 + z1);
    const cdouble half = 0.5 * (z1 - z0);
    cdouble acc = 0.0;
    double m = 0.0;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const cdouble v = f(mid + half * g.nodes[i]);
        acc += g.weights[i] * v;
        m += g.weights[i] * std::abs(v);
    }
    if (mass) *mass = m * std::abs(half);
    return acc * half;
}

struct SegmentResult {
    cdouble value{};
    double err_est = 0.0;   // |last doubling change|
    double mass = 0.0;      // integral of |f|
    int order = 0;
    bool converged = false;
};

/// Order-doubling Gauss-Legendre on a straight complex segment: 16, 32, ... up
/// to max_order.  Converges when successive estimates agree to rel_tol of the
/// value or reach the cancellation floor set by the integrand mass (the value
/// itself may legitimately be ~0, e.g. near a zero of the integral).
template <class F>
SegmentResult integrate_segment_adaptive(F&& f, cdouble z0, cdouble z1, double rel_tol = 1e-12,
                                         int max_order = 512) {
    SegmentResult r;
    cdouble prev = integrate_segment(f, z0, z1, 16);
    for (int order = 32; order <= max_order; order *= 2) {
        double mass = 0.0;
        cdouble cur = integrate_segment(f, z0, z1, order, &mass);
        double change = std::abs(cur - prev);
        r.value = cur;
        r.err_est = change;
        r.mass = mass;
        r.order = order;
        if (change <= rel_tol * std::abs(cur) + 1e-15 * mass + 1e-300) {
            r.converged = true;
            return r;
        }
        prev = cur;
    }
    return r;
}

/// Mean of a periodic function over one period by the N-point trapezoid rule
/// (spectrally accurate for analytic integrands).
template <class F>
auto periodic_mean(F&& f, double period, int n) -> decltype(f(0.0)) {
    decltype(f(0.0)) acc{};
    for (int j = 0; j < n; ++j) acc += f(period * j / n);
    return acc * (1.0 / n);
}

}  // namespace udw
