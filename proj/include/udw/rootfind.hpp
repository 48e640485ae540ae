#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "udw/core.hpp"

namespace udw {

struct ZeroCluster {
    cdouble w;
    int multiplicity = 1;
    double residual = 0.0;   // |G| at the polished point
    bool polished = true;
};

struct ZeroSearchOptions {
    double resolve = 1e-4;      // cell size at which a winding-m cluster is accepted
    int max_cell_depth = 48;
    int max_edge_depth = 44;    // per-edge phase-refinement depth
    long max_evals = 40000000;
    // exponential type of G: guarantees boundary samples are closer than a
    // phase turn apart, which midpoint refinement alone cannot ensure for
    // sustained uniform rotation
    double phase_rate = 0.0;
};

struct ZeroSearchResult {
    std::vector<ZeroCluster> zeros;
    int winding_total = 0;
    std::vector<std::string> warnings;
    bool ok = true;
};

namespace detail {

struct WindingWalker {
    const std::function<cdouble(cdouble)>& G;
    long evals = 0;
    long max_evals;
    int max_depth;
    bool failed = false;

    // the magnitude scale of the current top-level boundary segment; samples
    // collapsing ~13 orders below it sit in the numerical noise pit of a zero
    // that is effectively on the boundary, where the phase is meaningless
    double seg_scale = 0.0;

    cdouble eval(cdouble z) {
        ++evals;
        if (evals > max_evals) {
            failed = true;
            return cdouble(1.0, 0.0);
        }
        cdouble v = G(z);
        if (!finite(v) || std::abs(v) < 1e-13 * seg_scale) failed = true;
        return v;
    }

    // accumulate the phase change of G along [z0, z1], refining until
    // consecutive samples differ by less than pi/2
    double edge(cdouble z0, cdouble z1, cdouble f0, cdouble f1, int depth) {
        if (failed) return 0.0;
        double d = std::arg(f1) - std::arg(f0);
        if (d > pi) d -= two_pi;
        if (d < -pi) d += two_pi;
        if (std::abs(d) <= 0.5 * pi && depth > 0) {
            // one midpoint confirmation against phase aliasing
            cdouble zm = 0.5 * (z0 + z1);
            cdouble fm = eval(zm);
            if (failed) return 0.0;
            double d0 = std::arg(fm) - std::arg(f0);
            if (d0 > pi) d0 -= two_pi;
            if (d0 < -pi) d0 += two_pi;
            double d1 = std::arg(f1) - std::arg(fm);
            if (d1 > pi) d1 -= two_pi;
            if (d1 < -pi) d1 += two_pi;
            if (std::abs(d0) <= 0.5 * pi && std::abs(d1) <= 0.5 * pi) return d0 + d1;
            return edge(z0, zm, f0, fm, depth - 1) + edge(zm, z1, fm, f1, depth - 1);
        }
        if (depth <= 0) {
            failed = true;
            return 0.0;
        }
        cdouble zm = 0.5 * (z0 + z1);
        cdouble fm = eval(zm);
        if (failed) return 0.0;
        return edge(z0, zm, f0, fm, depth - 1) + edge(zm, z1, fm, f1, depth - 1);
    }
};

}  // namespace detail

/// Winding number of G around the rectangle [re_lo, re_hi] x [im_lo, im_hi]
/// by adaptive boundary phase tracking.  nullopt when a zero (or non-finite
/// value) sits too close to the boundary for the phase to be resolved.
inline std::optional<int> winding_rectangle(const std::function<cdouble(cdouble)>& G, double re_lo,
                                            double re_hi, double im_lo, double im_hi,
                                            const ZeroSearchOptions& opt, long* eval_count = nullptr) {
    const cdouble c0(re_lo, im_lo), c1(re_hi, im_lo), c2(re_hi, im_hi), c3(re_lo, im_hi);
    const cdouble corners[5] = {c0, c1, c2, c3, c0};

    // first pass: fixed boundary samples, to set the noise floor below which a
    // boundary phase cannot be trusted (a zero effectively on the boundary)
    std::vector<cdouble> pts, vals;
    for (int e = 0; e < 4; ++e) {
        const double len = std::abs(corners[e + 1] - corners[e]);
        const long n0 = std::clamp<long>(long(std::ceil(len * opt.phase_rate / 1.5)), 8, 40000);
        for (long j = (e == 0 ? 0 : 1); j <= n0; ++j) {
            cdouble z = corners[e] + (corners[e + 1] - corners[e]) * (double(j) / double(n0));
            cdouble v = G(z);
            if (eval_count) ++*eval_count;
            if (!finite(v)) return std::nullopt;
            pts.push_back(z);
            vals.push_back(v);
        }
    }
    // a first-pass sample dropped deep below both neighbours sits in the
    // noise pit of a zero on the boundary
    for (std::size_t i = 0; i + 2 < vals.size(); ++i) {
        const double m = std::abs(vals[i + 1]);
        if (m * m < 1e-24 * std::abs(vals[i]) * std::abs(vals[i + 2])) return std::nullopt;
    }

    detail::WindingWalker walker{G, 0, opt.max_evals, opt.max_edge_depth, false};
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size() && !walker.failed; ++i)
        total += walker.edge(pts[i], pts[i + 1], vals[i], vals[i + 1], opt.max_edge_depth);
    if (!walker.failed)
        total += walker.edge(pts.back(), pts.front(), vals.back(), vals.front(),
                             opt.max_edge_depth);
    if (eval_count) *eval_count += walker.evals;
    if (walker.failed) return std::nullopt;
    double wind = total / two_pi;
    long n = std::lround(wind);
    if (std::abs(wind - double(n)) > 0.25) return std::nullopt;
    return int(n);
}

namespace detail {

/// Newton polish toward an m-fold zero: w -= m G/G'.
inline ZeroCluster newton_polish(const std::function<cdouble(cdouble)>& G, cdouble w0, int m,
                                 double scale, double cell_size) {
    ZeroCluster zc;
    zc.multiplicity = m;
    cdouble w = w0;
    const double hstep = 3e-7;
    for (int it = 0; it < 80; ++it) {
        cdouble g = G(w);
        if (!finite(g)) break;
        double h = hstep * std::max(std::abs(w), 0.01 * scale);
        cdouble gp = (G(w + h) - G(w - h)) / (2.0 * h);
        if (std::abs(gp) == 0.0 || !finite(gp)) break;
        cdouble step = double(m) * g / gp;
        w -= step;
        if (std::abs(w - w0) > std::max(8.0 * cell_size, 1e-3 * scale)) {  // ran away
            w = w0;
            zc.polished = false;
            break;
        }
        if (std::abs(step) < 1e-13 * std::max(std::abs(w), 1e-3 * scale)) break;
    }
    zc.w = w;
    zc.residual = std::abs(G(w));
    return zc;
}

}  // namespace detail

/// All zeros of G (with multiplicities) inside the rectangle, by recursive
/// subdivision with argument-principle winding counts and Newton polish.
inline ZeroSearchResult find_zeros_rectangle(const std::function<cdouble(cdouble)>& G, double re_lo,
                                             double re_hi, double im_lo, double im_hi,
                                             const ZeroSearchOptions& opt) {
    ZeroSearchResult res;
    const double scale = std::max(re_hi - re_lo, im_hi - im_lo);

    struct Cell {
        double re_lo, re_hi, im_lo, im_hi;
        int winding, depth;
    };

    auto outer = winding_rectangle(G, re_lo, re_hi, im_lo, im_hi, opt);
    if (!outer) {
        // nudge the outer boundary a little and retry
        for (double fac : {1.0 + 3e-7, 1.0 - 3e-7, 1.0 + 1.1e-6}) {
            outer = winding_rectangle(G, re_lo, re_hi * fac, im_lo * fac, im_hi * fac, opt);
            if (outer) {
                re_hi *= fac;
                im_lo *= fac;
                im_hi *= fac;
                res.warnings.push_back("outer boundary nudged to avoid a zero");
                break;
            }
        }
    }
    if (!outer) {
        res.ok = false;
        res.warnings.push_back("winding failed on the outer rectangle");
        return res;
    }
    res.winding_total = *outer;
    if (*outer == 0) return res;

    std::vector<Cell> stack{{re_lo, re_hi, im_lo, im_hi, *outer, 0}};
    static const double fractions[] = {0.5, 0.46875, 0.53125, 0.421875, 0.578125, 0.390625, 0.609375};

    while (!stack.empty()) {
        Cell c = stack.back();
        stack.pop_back();
        const double w_ = c.re_hi - c.re_lo, h_ = c.im_hi - c.im_lo;
        const double size = std::max(w_, h_);
        if (size < opt.resolve || c.depth >= opt.max_cell_depth) {
            cdouble center(0.5 * (c.re_lo + c.re_hi), 0.5 * (c.im_lo + c.im_hi));
            auto zc = detail::newton_polish(G, center, c.winding, scale, size);
            if (c.depth >= opt.max_cell_depth && size >= opt.resolve) {
                res.ok = false;
                res.warnings.push_back("subdivision depth exhausted; unresolved cell near Re w = " +
                                       std::to_string(center.real()) +
                                       ", Im w = " + std::to_string(center.imag()));
            }
            res.zeros.push_back(zc);
            continue;
        }
        bool split_done = false;
        for (double fx : fractions) {
            for (double fy : fractions) {
                const double rm = c.re_lo + fx * w_, im = c.im_lo + fy * h_;
                Cell kids[4] = {{c.re_lo, rm, c.im_lo, im, 0, c.depth + 1},
                                {rm, c.re_hi, c.im_lo, im, 0, c.depth + 1},
                                {c.re_lo, rm, im, c.im_hi, 0, c.depth + 1},
                                {rm, c.re_hi, im, c.im_hi, 0, c.depth + 1}};
                int sum = 0;
                bool all_ok = true;
                for (auto& k : kids) {
                    auto wk = winding_rectangle(G, k.re_lo, k.re_hi, k.im_lo, k.im_hi, opt);
                    if (!wk) {
                        all_ok = false;
                        break;
                    }
                    k.winding = *wk;
                    sum += *wk;
                }
                if (all_ok && sum == c.winding) {
                    for (auto& k : kids)
                        if (k.winding != 0) stack.push_back(k);
                    split_done = true;
                    break;
                }
                if (split_done) break;
            }
            if (split_done) break;
        }
        if (!split_done) {
            res.ok = false;
            res.warnings.push_back("could not split a winding-" + std::to_string(c.winding) +
                                   " cell consistently near Re w = " +
                                   std::to_string(0.5 * (c.re_lo + c.re_hi)));
        }
    }

    // merge polished duplicates (a cluster straddling a split line)
    std::vector<ZeroCluster> merged;
    for (const auto& z : res.zeros) {
        bool absorbed = false;
        for (auto& m : merged) {
            if (std::abs(m.w - z.w) < 1e-7 * std::max(scale, std::abs(m.w))) {
                m.multiplicity += z.multiplicity;
                m.residual = std::max(m.residual, z.residual);
                absorbed = true;
                break;
            }
        }
        if (!absorbed) merged.push_back(z);
    }
    res.zeros = std::move(merged);
    return res;
}

/// (1/2 pi i) contour integral of f over the circle |y - y0| = r by the
/// N-node trapezoid rule, doubling N until stable (spectrally accurate for
/// integrands analytic in an annulus around the circle).
inline cdouble residue_at(const std::function<cdouble(cdouble)>& f, cdouble y0, double r,
                          int n_nodes = 32, double tol = 1e-12, int n_max = 4096) {
    auto ring = [&](int n, double& mag) {
        cdouble acc = 0.0;
        mag = 0.0;
        for (int k = 0; k < n; ++k) {
            const double th = two_pi * k / n;
            const cdouble e(std::cos(th), std::sin(th));
            const cdouble v = f(y0 + r * e) * e;
            acc += v;
            mag += std::abs(v);
        }
        return acc * (r / double(n));
    };
    double mag = 0.0;
    cdouble prev = ring(n_nodes, mag);
    for (int n = 2 * n_nodes; n <= n_max; n *= 2) {
        cdouble cur = ring(n, mag);
        const double change = std::abs(cur - prev);
        const double roundoff = 1e-15 * mag * r / double(n);  // ~ eps * (r/n) sum |f|
        if (change <= tol * std::abs(cur) + roundoff + 1e-300) return cur;
        prev = cur;
    }
    throw numerical_error("residue_at: trapezoid rule did not converge");
}

}  // namespace udw
