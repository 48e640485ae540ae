#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "udw/core.hpp"
#include "udw/quadrature.hpp"
#include "udw/rootfind.hpp"
#include "udw/specfun.hpp"
#include "udw/worldline.hpp"

namespace udw {

struct DetectorConfig {
    double sigma = 1.0;
    double epsilon = 0.0;                 // 0 -> 1e-6 sigma
    double radius_factor = 6.0;           // root-search radius R = radius_factor * sigma
    double residue_circle_factor = 1e-3;  // circle radius = factor * distance to nearest other pole
    double tol = 1e-10;
    std::vector<double> energy_grid;
    double pole_resolve = 0.0;            // 0 -> auto from the Sigma scale

    double eps() const { return epsilon > 0.0 ? epsilon : 1e-6 * sigma; }

    std::vector<std::string> validate() const {
        std::vector<std::string> errs;
        if (!(sigma > 0.0)) errs.push_back("sigma must be > 0");
        if (epsilon < 0.0) errs.push_back("epsilon must be >= 0");
        if (epsilon > 1e-3 * sigma) errs.push_back("epsilon must be <= 1e-3 * sigma");
        if (!(radius_factor > 0.0)) errs.push_back("radius_factor must be > 0");
        if (!(tol > 0.0)) errs.push_back("tol must be > 0");
        for (double e : energy_grid)
            if (!(e > 0.0)) errs.push_back("energy grid entries must be > 0");
        return errs;
    }
};

struct Pole {
    cdouble w;          // Sigma(tau, -i w) = 0, Re w > 0
    int multiplicity = 1;
    double residual = 0.0;
};

struct PoleSet {
    std::vector<Pole> poles;
    double search_radius = 0.0;
    int winding_total = 0;
    std::vector<std::string> warnings;
};

/// All zeros w of Sigma(tau, -i w) with Re w > 0 inside the search rectangle
/// [0, R] x [-R, R].  The universal double zero at w = 0 is deflated by
/// searching G(w) = Sigma(-i w)/w^2, which also keeps the Re w = 0 edge
/// uniformly nonzero (timelike chord).
inline PoleSet find_poles(const SigmaFn& sf, const DetectorConfig& cfg) {
    PoleSet ps;
    // y = -i w maps Re w -> -Im y (search depth) and Im w -> Re y, so the
    // rectangle depth is capped by y_safe_im and its half-height by y_safe_re
    double R = cfg.radius_factor * cfg.sigma;
    if (R > 0.95 * sf.y_safe_im) {
        R = 0.95 * sf.y_safe_im;
        ps.warnings.push_back("search radius capped at " + std::to_string(R) +
                              " by the Sigma evaluation bound");
    }
    const double H = std::min(R, 0.95 * sf.y_safe_re);
    ps.search_radius = R;

    auto G = [&](cdouble w) -> cdouble {
        const cdouble y = cdouble(0.0, -1.0) * w;
        return sf.eval(y) / (w * w);
    };

    ZeroSearchOptions opt;
    opt.resolve = cfg.pole_resolve > 0.0
                      ? cfg.pole_resolve
                      : std::max(1e-3 * sf.scale, 1e-9 * R);
    opt.phase_rate = sf.phase_rate;
    const double re_lo = 1e-9 * R;
    auto zres = find_zeros_rectangle(G, re_lo, R, -H, H, opt);
    ps.winding_total = zres.winding_total;
    for (const auto& warn : zres.warnings) ps.warnings.push_back(warn);
    if (!zres.ok)
        throw numerical_error("find_poles: " + (zres.warnings.empty()
                                                    ? std::string("zero search failed")
                                                    : zres.warnings.back()));
    for (const auto& z : zres.zeros) {
        Pole p;
        p.w = z.w;
        p.multiplicity = z.multiplicity;
        p.residual = z.residual;
        ps.poles.push_back(p);
    }
    std::sort(ps.poles.begin(), ps.poles.end(),
              [](const Pole& a, const Pole& b) { return std::abs(a.w) < std::abs(b.w); });
    return ps;
}

inline PoleSet find_poles(const Worldline& w, double tau, const DetectorConfig& cfg) {
    return find_poles(w.sigma_fn(tau), cfg);
}

struct RateResult {
    double value = 0.0;   // P(E, tau)/alpha(E)
    double imag = 0.0;    // imaginary residual of the residue sum (diagnostic)
    int n_poles_used = 0;
    bool boundary_warning = false;   // largest-|w| pole contributes > tol * total
    bool esigma_warning = false;     // E sigma < 10 (coarse-graining validity, Eq. fund)
};

namespace detail {

// singular points of g(y) e^{-iEy}/Sigma(y) relevant to circle sizing: the
// found zeros at -i w_j and their mirrors +i w_j (Sigma is even), the kernel
// poles at -+ i sigma, and the deflated double zero at y = 0
inline std::vector<cdouble> singular_points(const PoleSet& ps, double sigma) {
    std::vector<cdouble> pts;
    pts.emplace_back(0.0, 0.0);
    pts.emplace_back(0.0, sigma);
    pts.emplace_back(0.0, -sigma);
    for (const auto& p : ps.poles) {
        const cdouble y = cdouble(0.0, -1.0) * p.w;
        pts.push_back(y);
        pts.push_back(-y);
    }
    return pts;
}

inline double nearest_other(const std::vector<cdouble>& pts, cdouble y, double skip_tol) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : pts) {
        const double d = std::abs(q - y);
        if (d > skip_tol) best = std::min(best, d);
    }
    return best;
}

}  // namespace detail

/// Residue sum for P(E, tau)/alpha(E): close the Eq.-of-motion contour in the
/// lower half plane; P = (i/2 pi) * sum of residues of g(y) e^{-iEy}/Sigma(y)
/// over all Sigma-zeros with Re w > 0 plus the Lorentzian kernel pole at
/// y = -i sigma.  Residues are computed by circle quadrature, so multiplicity
/// (and kernel/zero collisions) need no case analysis.
inline RateResult rate_from_poles(const SigmaFn& sf, const PoleSet& ps, double E,
                                  const DetectorConfig& cfg) {
    if (!(E > 0.0)) throw domain_error("rate: need E > 0");
    const double sigma = cfg.sigma;

    auto h = [&](cdouble y) -> cdouble {
        const cdouble s = sf.eval(y);
        const cdouble g = sigma * sigma / (y * y + sigma * sigma);
        const cdouble ph = std::exp(cdouble(0.0, -E) * y);
        if (!finite(s)) return 0.0;  // |Sigma| overflowed: 1/Sigma -> 0
        return g * ph / s;
    };

    const auto pts = detail::singular_points(ps, sigma);

    struct Circle {
        cdouble center;
        double radius;
        double wmod;  // |w| of the pole, for the boundary diagnostic
    };
    std::vector<Circle> circles;

    // kernel pole, unless it coincides with a Sigma zero (then one circle
    // around the zero encloses both)
    double kernel_merge_dist = std::numeric_limits<double>::infinity();
    for (const auto& p : ps.poles)
        kernel_merge_dist = std::min(kernel_merge_dist, std::abs(p.w - cdouble(sigma, 0.0)));

    for (const auto& p : ps.poles) {
        const cdouble y0 = cdouble(0.0, -1.0) * p.w;
        double d = detail::nearest_other(pts, y0, 1e-12 * std::max(1.0, std::abs(p.w)));
        // treat an adjacent kernel pole as part of the cluster when essentially coincident
        const double dk = std::abs(p.w - cdouble(sigma, 0.0));
        bool absorb_kernel = dk < 1e-6 * sigma;
        if (absorb_kernel) d = detail::nearest_other(pts, y0, 2.0 * dk + 1e-12 * sigma);
        double r = cfg.residue_circle_factor * d;
        r = std::max(r, 1e-6 * std::max(std::abs(p.w), sf.scale));
        if (absorb_kernel) r = std::max(r, 3.0 * dk);
        r = std::min(r, 0.45 * d);
        if (!(r > 0.0)) r = 1e-6 * std::max(std::abs(p.w), sf.scale);
        circles.push_back({y0, r, std::abs(p.w)});
    }
    if (kernel_merge_dist >= 1e-6 * sigma) {
        const cdouble y0(0.0, -sigma);
        double d = detail::nearest_other(pts, y0, 1e-12 * sigma);
        double r = std::max(cfg.residue_circle_factor * d, 1e-6 * sigma);
        r = std::min(r, 0.45 * d);
        circles.push_back({y0, r, sigma});
    }

    cdouble total = 0.0;
    double max_w = 0.0;
    cdouble contrib_at_max = 0.0;
    RateResult out;
    for (const auto& c : circles) {
        cdouble res;
        // poles so deep that e^{-E Re w} underflows contribute exactly 0
        if (E * (-c.center.imag() - c.radius) > 800.0) {
            res = 0.0;
        } else {
            res = residue_at(h, c.center, c.radius, 32, std::max(cfg.tol * 1e-2, 1e-14));
        }
        total += res;
        ++out.n_poles_used;
        if (c.wmod > max_w) {
            max_w = c.wmod;
            contrib_at_max = res;
        }
    }
    const cdouble P = cdouble(0.0, 1.0) / two_pi * total;
    out.value = P.real();
    out.imag = P.imag();
    out.boundary_warning = std::abs(contrib_at_max) > cfg.tol * std::abs(total) &&
                           max_w > 0.98 * ps.search_radius;
    out.esigma_warning = E * sigma < 10.0;
    return out;
}

inline RateResult rate_residue_full(const Worldline& w, double tau, double E,
                                    const DetectorConfig& cfg) {
    const SigmaFn sf = w.sigma_fn(tau);
    return rate_from_poles(sf, find_poles(sf, cfg), E, cfg);
}

inline double rate_residue(const Worldline& w, double tau, double E, const DetectorConfig& cfg) {
    return rate_residue_full(w, tau, E, cfg).value;
}

// ---------------------------------------------------------------------------
// direct contour quadrature (cross-validation oracle)

struct OracleResult {
    double value = 0.0;
    double tail_bound = 0.0;
    double y_max = 0.0;
};

/// Direct evaluation of -(1/4 pi^2) int g e^{-iEy}/Sigma dy along Im y = -eps
/// by panel-wise Gauss-Legendre.  The universal double zero of Sigma at y = 0
/// sits a distance eps above the contour and would cost ~1/eps in unsigned
/// mass, and 1/Sigma has a slowly decaying quadratic tail for bounded-velocity
/// paths, so the rational template
///   W(y) = 1/y^2 - K [ 1/(y^2+y_c^2) + y_c^2/(y^2+y_c^2)^2 ],  K = 1 - 1/C_inf
/// is subtracted -- it matches 1/Sigma's double pole at the origin and its
/// 1/(C_inf y^2) tail through O(1/y^4) -- and its contour integral is restored
/// in closed form from
///   I0    = int g e^{-iEy}/y^2           = -pi e^{-E sigma}/sigma
///   I2(q) = int g e^{-iEy}/(y^2+q^2)     = pi [sigma e^{-E s} - (s^2/q) e^{-Eq}]/(q^2 - s^2)
///   I3(q) = int g e^{-iEy}/(y^2+q^2)^2   = pi s e^{-Es}/D^2
///           + pi s^2 e^{-Eq} [E/(2q^2 D) - 1/(q D^2) + 1/(2q^3 D)],  D = s^2 - q^2.
/// h(-t) = conj h(t) halves the work and makes the result real.
inline OracleResult rate_quadrature_oracle_full(const SigmaFn& sf, double E,
                                                const DetectorConfig& cfg) {
    if (!(E > 0.0)) throw domain_error("oracle: need E > 0");
    const double sigma = cfg.sigma, eps = cfg.eps();
    const double K = std::isinf(sf.c_inf) ? 1.0 : 1.0 - 1.0 / sf.c_inf;
    double y_c = std::min(0.5 * sigma, 0.5 * sf.scale);
    if (std::abs(y_c - sigma) < 0.01 * sigma) y_c = 0.45 * sigma;

    const double t_min_stop = std::max({3.0 * sigma, 10.0 / E, 4.0 * sf.scale});

    auto h_reg = [&](double t) -> cdouble {
        const cdouble y(t, -eps);
        const cdouble y2 = y * y;
        const cdouble g = sigma * sigma / (y2 + sigma * sigma);
        const cdouble ph = std::exp(cdouble(0.0, -E) * y);
        cdouble inv_diff;
        bool have = false;
        if (sf.eval_reg) {
            // 1/Sigma - 1/y^2 = -R/(1 + R y^2) with R = (Sigma - y^2)/y^4:
            // cancellation-free through the origin
            const cdouble R = sf.eval_reg(y);
            if (finite(R) && std::abs(R) * std::abs(y2) < 1e290) {
                inv_diff = -R / (1.0 + R * y2);
                have = true;
            }
        }
        if (!have) {
            cdouble s;
            bool exploded = false;
            try {
                s = sf.eval(y);
                if (!finite(s)) exploded = true;
            } catch (const std::exception&) {
                // far-field quadrature failure of an exponentially growing Sigma
                if (t > 0.5 * t_min_stop) exploded = true;
                else throw;
            }
            if (exploded) {
                inv_diff = -1.0 / y2;
            } else if (std::abs(s) > 4.0 * std::abs(y2)) {
                // no cancellation here, and s*y2 could overflow while s is finite
                inv_diff = 1.0 / s - 1.0 / y2;
            } else {
                inv_diff = (y2 - s) / (s * y2);
            }
        }
        if (K != 0.0) {
            const cdouble d = y2 + y_c * y_c;
            inv_diff += K * (1.0 / d + y_c * y_c / (d * d));
        }
        return g * ph * inv_diff;
    };

    const double width = std::min({pi / E, sigma / 4.0, 0.5 * sf.scale});
    const double t_cap = 2e5 * std::max(sigma, sf.scale);

    // the y^2 - Sigma cancellation near the origin leaves irreducible noise
    // ~ eps_mach/|y|^2 in h_reg; its integral over a panel bounds what the
    // split refinement can resolve
    auto noise_floor = [&](double a, double b) {
        return 4e-16 * (std::atan(b / eps) - std::atan(a / eps)) / eps;
    };

    // adaptive panel: GL-16 vs GL-32
    std::function<cdouble(double, double, int, double&)> panel =
        [&](double a, double b, int depth, double& mass) -> cdouble {
        auto fc = [&](cdouble t) { return h_reg(t.real()); };
        cdouble v1 = integrate_segment(fc, cdouble(a), cdouble(b), 16);
        double m2 = 0.0;
        cdouble v2 = integrate_segment(fc, cdouble(a), cdouble(b), 32, &m2);
        if (std::abs(v1 - v2) <=
                1e-13 * (std::abs(v2) + 1e-60) + 1e-16 * m2 + noise_floor(a, b) ||
            depth >= 28) {
            mass += m2;
            return v2;
        }
        const double m = 0.5 * (a + b);
        return panel(a, m, depth + 1, mass) + panel(m, b, depth + 1, mass);
    };

    // closed-form template integrals
    const double I0 = -pi * std::exp(-E * sigma) / sigma;
    double comp = I0;
    if (K != 0.0) {
        const double q = y_c, D = sigma * sigma - q * q;
        const double I2 = -pi *
                          (sigma * std::exp(-E * sigma) - (sigma * sigma / q) * std::exp(-E * q)) /
                          D;
        const double I3 =
            pi * sigma * std::exp(-E * sigma) / (D * D) +
            pi * sigma * sigma * std::exp(-E * q) *
                (E / (2.0 * q * q * D) - 1.0 / (q * D * D) + 1.0 / (2.0 * q * q * q * D));
        comp -= K * (I2 + q * q * I3);
    }

    cdouble acc = 0.0;
    double t = 0.0, total_mass = 0.0;
    int small_run = 0;
    double mag4 = 0.0;  // decaying max of recent |panel| values
    OracleResult out;
    while (true) {
        double mass = 0.0;
        const cdouble dv = panel(t, t + width, 0, mass);
        acc += dv;
        total_mass += mass;
        t += width;
        mag4 = std::max(0.5 * mag4, std::abs(dv));
        const double result_scale =
            std::abs(2.0 * acc.real() + comp) + std::abs(comp) * 1e-6 + 1e-280;
        if (t > t_min_stop) {
            // extrapolated algebraic tail (|panel| ~ C/t^k, k >= 5), floored at
            // the accumulated roundoff: a smaller tail target is unreachable
            const double tail_est = mag4 * (t / width) / 2.0;
            const double target =
                std::max(0.5 * cfg.tol * result_scale, 2e-16 * total_mass) + 1e-280;
            if (tail_est < target)
                ++small_run;
            else
                small_run = 0;
            if (small_run >= 3) {
                out.tail_bound = tail_est;
                break;
            }
        }
        if (t > t_cap)
            throw numerical_error("rate_quadrature_oracle: truncation bound not met by |Re y| = " +
                                  std::to_string(t));
    }
    out.y_max = t;
    out.value = -(1.0 / (4.0 * pi * pi)) * (2.0 * acc.real() + comp);
    return out;
}

inline double rate_quadrature_oracle(const Worldline& w, double tau, double E,
                                     const DetectorConfig& cfg) {
    return rate_quadrature_oracle_full(w.sigma_fn(tau), E, cfg).value;
}

// ---------------------------------------------------------------------------
// closed-form spectra

/// Planck response E/(2 pi (e^{2 pi E/a} - 1)) at acceleration temperature a/2 pi.
inline double rate_planck(double a_tau, double E) {
    if (!(a_tau > 0.0) || !(E > 0.0)) throw domain_error("rate_planck: need a, E > 0");
    return E / (two_pi * std::expm1(two_pi * E / a_tau));
}

namespace detail {

// series coefficients of (pi d / sin(pi d))^2 = sum beta_k (pi d)^{2k}
inline const std::vector<double>& sin_ratio_sq_coeffs() {
    static const std::vector<double> beta = [] {
        const int K = 32;
        std::vector<double> alpha(K + 1), b(K + 1);
        // (sin u/u)^2 = sum_k (-1)^k 2^{2k+1} u^{2k} / (2k+2)!
        for (int k = 0; k <= K; ++k) {
            double fact = 1.0;
            for (int v = 2; v <= 2 * k + 2; ++v) fact *= v;
            alpha[k] = ((k % 2) ? -1.0 : 1.0) * std::pow(2.0, 2 * k + 1) / fact;
        }
        b[0] = 1.0;
        for (int m = 1; m <= K; ++m) {
            double s = 0.0;
            for (int k = 1; k <= m; ++k) s += alpha[k] * b[m - k];
            b[m] = -s;
        }
        return b;
    }();
    return beta;
}

/// bracket(d, L) = [ (pi d/sin(pi d))^2 e^{dL} - 1 - dL ] / d^2 — the analytic
/// combination of the three singular pieces of the closed-form uniform-
/// acceleration spectrum near integer x (see rate_closed_uniform); evaluated
/// by series when the direct form would cancel.
inline double uniform_kernel_bracket(double d, double L) {
    const double cut = std::min(0.25, 2.5 / std::max(std::abs(L), 1.0));
    if (std::abs(d) >= cut) {
        const double u = pi * d;
        const double G = (u / std::sin(u)) * (u / std::sin(u));
        return (G * std::exp(d * L) - 1.0 - d * L) / (d * d);
    }
    const auto& beta = sin_ratio_sq_coeffs();
    // c_m = sum_{2k + j = m} beta_k pi^{2k} L^j / j!, m >= 2; bracket = sum c_m d^{m-2}
    double acc = 0.0, dp = 1.0;
    for (int m = 2; m <= 64; ++m) {
        double cm = 0.0;
        double Lj = 1.0;  // L^j / j!
        for (int j = 0; 2 * (m - j) >= 0 && j <= m; ++j) {
            if ((m - j) % 2 == 0) {
                const int k = (m - j) / 2;
                if (k < (int)beta.size()) cm += beta[k] * std::pow(pi, 2 * k) * Lj;
            }
            Lj *= L / (j + 1.0);
        }
        acc += cm * dp;
        if (std::abs(cm * dp) < 1e-18 * std::max(std::abs(acc), 1e-30) && m > 6) break;
        dp *= d;
    }
    return acc;
}

}  // namespace detail

/// Closed-form uniform-acceleration spectrum (Lerch form), P/alpha as a
/// function of (a, E, sigma).  Evaluated as the residue series
///   P/alpha = (x/4 pi) sum_{n>=1} z^n [E(1/(n+x) - 1/(n-x)) - T_a(1/(n-x)^2 - 1/(n+x)^2)]
///             + (pi T_a x/4) z^x / sin^2(pi x)
/// with the n0 = round(x) term and the sin^-2 kernel term folded into one
/// analytic bracket, so the removable singularity at integer x cancels exactly.
inline double rate_closed_uniform(double a, double E, double sigma) {
    if (!(a > 0.0 && E > 0.0 && sigma > 0.0))
        throw domain_error("rate_closed_uniform: need a, E, sigma > 0");
    const double Ta = a / two_pi;
    const double x = Ta * sigma;
    const double beta = E / Ta;
    const double z = std::exp(-beta);
    const double L = -beta;
    const long n0 = std::lround(x);

    double acc = 0.0;
    double zn = 1.0;
    int small_run = 0;
    for (long n = 1; n <= 50000000; ++n) {
        zn *= z;
        if (n == n0) continue;
        const double dp = double(n) + x, dm = double(n) - x;
        const double term = zn * (E * (1.0 / dp - 1.0 / dm) - Ta * (1.0 / (dm * dm) - 1.0 / (dp * dp)));
        acc += term;
        if (double(n) > x + 2.0 && std::abs(term) < 1e-17 * std::abs(acc) + 1e-320) {
            if (++small_run >= 3) break;
        } else {
            small_run = 0;
        }
    }
    if (n0 >= 1) {
        const double zn0 = std::pow(z, double(n0));
        const double d = x - double(n0);
        const double dp = double(n0) + x;
        acc += zn0 * (E / dp + Ta / (dp * dp));
        acc += zn0 * Ta * detail::uniform_kernel_bracket(d, L);
        return (x / (4.0 * pi)) * acc;
    }
    // x < 0.5: kernel term stands alone
    const double s = std::sin(pi * x);
    const double kernel = (pi * Ta * x / 4.0) * std::pow(z, x) / (s * s);
    return (x / (4.0 * pi)) * acc + kernel;
}

/// Large-x asymptotic spectrum: Planck term plus sum_k
/// [ (E/T_a) L_{2k}(z) - 2k L_{2k-1}(z) ] / x^{2k}  (optimal truncation).
inline double rate_uniform_asymptotic(double a, double E, double sigma, int k_max = 10) {
    const double Ta = a / two_pi;
    const double x = Ta * sigma;
    const double beta = E / Ta;
    const double z = std::exp(-beta);
    double acc = beta * z / (1.0 - z);  // Planck, in T_a/2 pi units
    double prev = std::numeric_limits<double>::infinity();
    double xp = 1.0;
    for (int k = 1; k <= std::min(k_max, 10); ++k) {
        xp *= x * x;
        const double term =
            (beta * specfun::l_poly(2 * k, z) - 2.0 * k * specfun::l_poly(2 * k - 1, z)) / xp;
        if (std::abs(term) >= prev) break;
        acc += term;
        prev = std::abs(term);
    }
    return (Ta / two_pi) * acc;
}

/// Relative size of the correction sum in the asymptotic spectrum (the
/// quantity plotted against E/T_a for different x).
inline double uniform_correction_rel(double beta, double x, int k_max = 10) {
    const double z = std::exp(-beta);
    const double planck = beta * z / (1.0 - z);
    double corr = 0.0;
    double prev = std::numeric_limits<double>::infinity();
    double xp = 1.0;
    for (int k = 1; k <= std::min(k_max, 10); ++k) {
        xp *= x * x;
        const double term =
            (beta * specfun::l_poly(2 * k, z) - 2.0 * k * specfun::l_poly(2 * k - 1, z)) / xp;
        if (std::abs(term) >= prev) break;
        corr += term;
        prev = std::abs(term);
    }
    return std::abs(corr) / planck;
}

/// Leading relative correction to the Planck spectrum in its printed form,
/// (2 - T_a/E + e^{-E/T_a}(1 + T_a/E)) / ((1 - e^{-E/T_a})^2 x^2); used as the
/// acceptance bound for Planck recovery.
inline double uniform_correction_printed(double beta, double x) {
    const double z = std::exp(-beta);
    return (2.0 - 1.0 / beta + z * (1.0 + 1.0 / beta)) / ((1.0 - z) * (1.0 - z) * x * x);
}

/// Planck spectrum with the leading slow-acceleration-drift correction:
/// bracket 1 + (2 pi^2 adot^2 E^2 / 3 a^6) (1 + e^{-2 pi E/a})/(1 - e^{-2 pi E/a})^2.
inline double rate_adiabatic_corrected(double a_tau, double adot_tau, double E) {
    const double planck = rate_planck(a_tau, E);
    if (adot_tau == 0.0) return planck;
    const double z = std::exp(-two_pi * E / a_tau);
    const double corr = (2.0 * pi * pi * adot_tau * adot_tau * E * E / (3.0 * std::pow(a_tau, 6))) *
                        (1.0 + z) / ((1.0 - z) * (1.0 - z));
    return planck * (1.0 + corr);
}

/// Intermediate pole-sum form of the drift-corrected rate,
/// (a/8 pi^2 delta) [ g1((2 pi E/a)(1-delta)) - g1((2 pi E/a)(1+delta)) ],
/// delta = adot/a^2; reduces to Planck as delta -> 0.
inline double rate_adiabatic_g1sum(double a_tau, double adot_tau, double E) {
    const double delta = adot_tau / (a_tau * a_tau);
    if (delta == 0.0) return rate_planck(a_tau, E);
    const double Q = two_pi * E / a_tau;
    return (a_tau / (8.0 * pi * pi * delta)) *
           (specfun::g1(Q * (1.0 - delta)) - specfun::g1(Q * (1.0 + delta)));
}

/// Second-order proper-distance model for slowly drifting acceleration:
/// the erf/erfi product form when representable, else the sinh-cosh product
/// (the two agree for |adot y / a| << 1).
inline cdouble sigma_adiabatic_order2(double a_tau, double adot_tau, cdouble y) {
    if (adot_tau == 0.0) {
        const cdouble s = std::sinh(0.5 * a_tau * y);
        return 4.0 * s * s / (a_tau * a_tau);
    }
    const cdouble root = std::sqrt(cdouble(0.5 * adot_tau, 0.0));
    const cdouble up = root * (a_tau / adot_tau + 0.5 * y);
    const cdouble um = root * (a_tau / adot_tau - 0.5 * y);
    try {
        const cdouble dif_i = specfun::erfi_complex(up) - specfun::erfi_complex(um);
        const cdouble dif_r = specfun::erf_complex(up) - specfun::erf_complex(um);
        const cdouble val = (pi / (2.0 * adot_tau)) * dif_i * dif_r;
        if (finite(val)) return val;
    } catch (const overflow_signal&) {
        // fall through to the product form
    }
    const cdouble s = std::sinh(0.5 * a_tau * y);
    const cdouble c = std::cosh(0.5 * a_tau * y);
    const cdouble q = (adot_tau * y / (2.0 * a_tau)) * c;
    return (4.0 / (a_tau * a_tau)) * (s - q) * (s + q);
}

/// Cusped-path spectrum, exact.
inline double rate_cusped(double a, double E, double sigma) {
    const double sa = sigma * a;
    const double pref = a / (8.0 * std::sqrt(3.0) * pi * (1.0 - 12.0 / (sa * sa)));
    return pref * (std::exp(-2.0 * std::sqrt(3.0) * E / a) -
                   (24.0 * std::sqrt(3.0) / (sa * sa * sa)) * std::exp(-sigma * E));
}

/// Planck spectrum with the rapid-modulation correction bracket,
/// 1 + (4 pi^2 a1^2 E^2 / 3 a0^2 w^2)(1 + e^{-2 pi E/a0})/(1 - e^{-2 pi E/a0})^2.
inline double rate_modulated_correction(double a0, double a1, double omega, double E) {
    const double planck = rate_planck(a0, E);
    if (a1 == 0.0) return planck;
    const double z = std::exp(-two_pi * E / a0);
    const double corr = (4.0 * pi * pi * a1 * a1 * E * E / (3.0 * a0 * a0 * omega * omega)) *
                        (1.0 + z) / ((1.0 - z) * (1.0 - z));
    return planck * (1.0 + corr);
}

/// Period-averaged proper distance (delegates to the worldline family forms).
inline cdouble averaged_sigma(const Worldline& w, cdouble y) { return w.averaged_sigma(y); }

/// Time-independent rate of a fast periodic path.  The averaged Fourier series
/// converges absolutely on the real axis but only in a strip
/// |Im y| < 2 asinh(1/v0)/omega of the lower half plane; the zeros of its
/// truncated continuation beyond the strip are truncation artifacts
/// (phase-rotating pickets whose residue sum is sign-indefinite noise), so the
/// rate is computed by the direct contour quadrature along Im y = -eps, which
/// only ever samples convergent real-axis values.  For the relativistic
/// oscillator the average is taken of the inverse proper distance (the exact
/// period mean of the rate); the other periodic families use their averaged
/// Sigma forms.
inline RateResult rate_averaged_full(const Worldline& w, double E, const DetectorConfig& cfg) {
    SigmaFn sf;
    if (std::holds_alternative<wl::RelHarmonic1D>(w.family()))
        sf = w.inverse_averaged_sigma_fn();
    else
        sf = w.averaged_sigma_fn();
    RateResult out;
    OracleResult o = rate_quadrature_oracle_full(sf, E, cfg);
    out.value = o.value;
    out.imag = 0.0;
    out.esigma_warning = E * cfg.sigma < 10.0;
    return out;
}

inline double rate_averaged(const Worldline& w, double E, const DetectorConfig& cfg) {
    return rate_averaged_full(w, E, cfg).value;
}

// ---------------------------------------------------------------------------
// spectrum sweep + time smearing

struct Spectrum {
    struct Row {
        double E = 0.0;
        double p_over_alpha = 0.0;
        int n_poles_used = 0;
        std::optional<double> oracle_residual;   // |residue - oracle| / |residue|
        bool esigma_warning = false;
    };
    std::vector<Row> rows;
    double tau = 0.0;
    double sigma = 0.0;
    std::string worldline;
    std::vector<std::string> warnings;
};

inline Spectrum spectrum(const Worldline& w, double tau, const DetectorConfig& cfg,
                         bool validate = false) {
    Spectrum sp;
    sp.tau = tau;
    sp.sigma = cfg.sigma;
    sp.worldline = w.descriptor();
    if (cfg.energy_grid.empty()) return sp;
    std::vector<double> grid = cfg.energy_grid;
    std::sort(grid.begin(), grid.end());
    const SigmaFn sf = w.sigma_fn(tau);
    const PoleSet ps = find_poles(sf, cfg);
    for (const auto& warn : ps.warnings) sp.warnings.push_back(warn);
    std::vector<std::size_t> validate_idx;
    if (validate) {
        const std::size_t n = grid.size();
        for (int k = 0; k < 5 && std::size_t(k) < n; ++k)
            validate_idx.push_back(n == 1 ? 0 : (k * (n - 1)) / std::min<std::size_t>(4, n - 1));
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        Spectrum::Row row;
        row.E = grid[i];
        try {
            RateResult r = rate_from_poles(sf, ps, grid[i], cfg);
            row.p_over_alpha = r.value;
            row.n_poles_used = r.n_poles_used;
            row.esigma_warning = r.esigma_warning;
            if (validate &&
                std::find(validate_idx.begin(), validate_idx.end(), i) != validate_idx.end()) {
                const double o = rate_quadrature_oracle_full(sf, grid[i], cfg).value;
                row.oracle_residual =
                    std::abs(r.value - o) / std::max(std::abs(r.value), 1e-300);
            }
        } catch (const std::exception& ex) {
            sp.warnings.push_back("E = " + std::to_string(grid[i]) + ": " + ex.what());
            row.p_over_alpha = std::numeric_limits<double>::quiet_NaN();
        }
        sp.rows.push_back(row);
    }
    return sp;
}

/// Gaussian time smearing int f_sigma(tau - s) p(s) ds with the Gaussian
/// window f_sigma(u) = exp(-u^2/2 sigma^2)/sqrt(2 pi sigma^2); composite
/// Gauss-Legendre over +-10 sigma.
inline double convolve_time(const std::function<double(double)>& p, double sigma, double tau,
                            int panels = 320) {
    if (!(sigma > 0.0)) throw domain_error("convolve_time: need sigma > 0");
    const double lo = tau - 10.0 * sigma, hi = tau + 10.0 * sigma;
    const double norm = 1.0 / (std::sqrt(two_pi) * sigma);
    const double dw = (hi - lo) / panels;
    double acc = 0.0;
    for (int i = 0; i < panels; ++i) {
        auto f = [&](cdouble s) -> cdouble {
            const double u = tau - s.real();
            return norm * std::exp(-0.5 * u * u / (sigma * sigma)) * p(s.real());
        };
        acc += integrate_segment(f, cdouble(lo + i * dw), cdouble(lo + (i + 1) * dw), 16).real();
    }
    return acc;
}

}  // namespace udw
