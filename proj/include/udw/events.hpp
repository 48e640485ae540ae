#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <vector>

#include "udw/rate.hpp"

namespace udw {

struct Band {
    double e_min = 0.0;
    double e_max = 0.0;
    int count = 64;
};

/// Trapezoid integral of P(E, tau)/alpha over the band grid (alpha = 1).
inline double total_rate(const Worldline& w, double tau, const Band& band,
                         const DetectorConfig& cfg) {
    if (band.count < 1 || band.e_max <= band.e_min) return 0.0;
    if (band.count == 1) return 0.0;  // zero-width grid carries no measure
    const SigmaFn sf = w.sigma_fn(tau);
    const PoleSet ps = find_poles(sf, cfg);
    const double de = (band.e_max - band.e_min) / (band.count - 1);
    double acc = 0.0;
    for (int i = 0; i < band.count; ++i) {
        const double E = band.e_min + i * de;
        const double p = rate_from_poles(sf, ps, E, cfg).value;
        acc += (i == 0 || i == band.count - 1) ? 0.5 * p : p;
    }
    return acc * de;
}

struct ClickTrain {
    std::vector<double> times;   // strictly increasing proper times <= horizon
    double horizon = 0.0;
    std::uint64_t seed = 0;
    Band band;
    std::string worldline;
    double lambda_max = 0.0;
};

namespace detail {

// deterministic uniform in (0, 1): top 53 bits of the generator output,
// offset by half an ulp so 0 is never produced
inline double canonical_u(std::mt19937_64& rng) {
    return (double(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace detail

/// Inhomogeneous Poisson sampling by thinning against the constant majorant
/// lambda_max; deterministic for fixed seed.
inline std::vector<double> sample_clicks_with_rate(const std::function<double(double)>& rate,
                                                   double lambda_max, double horizon,
                                                   std::uint64_t seed) {
    if (!(lambda_max >= 0.0) || !std::isfinite(lambda_max))
        throw numerical_error("sample_clicks: majorant rate is not finite");
    std::vector<double> times;
    if (lambda_max == 0.0) return times;
    std::mt19937_64 rng(seed);
    double t = 0.0;
    while (true) {
        t += -std::log(detail::canonical_u(rng)) / lambda_max;
        if (t > horizon) break;
        const double lam = rate(t);
        if (lam > lambda_max * (1.0 + 1e-12))
            throw numerical_error("sample_clicks: rate exceeded the thinning majorant");
        if (detail::canonical_u(rng) * lambda_max <= lam) times.push_back(t);
    }
    return times;
}

/// Click train for a worldline: the band-integrated rate drives a thinned
/// Poisson process.  Stationary (and period-averaged) paths use the exact
/// constant rate; otherwise the intensity is the linear interpolant of a
/// 512-point scan, which also furnishes the majorant.
inline ClickTrain sample_clicks(const Worldline& w, const Band& band, double horizon,
                                std::uint64_t seed, const DetectorConfig& cfg) {
    ClickTrain train;
    train.horizon = horizon;
    train.seed = seed;
    train.band = band;
    train.worldline = w.descriptor();
    if (w.is_stationary()) {
        const double lam = total_rate(w, 0.0, band, cfg);
        train.lambda_max = lam;
        train.times = sample_clicks_with_rate([lam](double) { return lam; }, lam, horizon, seed);
        return train;
    }
    const int n = 512;
    std::vector<double> grid(n + 1);
    double lam_max = 0.0;
    for (int i = 0; i <= n; ++i) {
        grid[i] = total_rate(w, horizon * i / n, band, cfg);
        if (!std::isfinite(grid[i]))
            throw numerical_error("sample_clicks: rate scan found a non-finite rate");
        lam_max = std::max(lam_max, grid[i]);
    }
    auto lam = [grid, horizon, n](double t) {
        const double u = t / horizon * n;
        const int i = std::min<int>(n - 1, std::max(0, int(u)));
        const double f = u - i;
        return grid[i] * (1.0 - f) + grid[i + 1] * f;
    };
    train.lambda_max = lam_max;
    train.times = sample_clicks_with_rate(lam, lam_max * 1.0000001 + 1e-300, horizon, seed);
    return train;
}

/// CSV serialization: '#' metadata lines, then one proper time per row.
inline void write_click_csv(std::ostream& os, const ClickTrain& t) {
    os << "# udw click train\n";
    os << "# worldline: " << t.worldline << "\n";
    os << "# seed: " << t.seed << "\n";
    os << "# horizon: " << t.horizon << "\n";
    os << "# band: [" << t.band.e_min << ", " << t.band.e_max << "] n=" << t.band.count << "\n";
    os << "tau\n";
    char buf[40];
    for (double v : t.times) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf << "\n";
    }
}

}  // namespace udw
