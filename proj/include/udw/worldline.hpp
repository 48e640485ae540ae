#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "udw/core.hpp"
#include "udw/quadrature.hpp"
#include "udw/specfun.hpp"

namespace udw {

struct KinematicInvariants {
    double a = 0.0;            // proper acceleration
    double torsion = 0.0;      // T
    double hypertorsion = 0.0; // upsilon
};

/// A sigma evaluator handed to the pole/rate machinery: the proper-distance
/// function y -> Sigma(tau, y) for a fixed tau (or the period-averaged one),
/// together with evaluation bounds and a characteristic w-scale used to size
/// root-resolution cells.  The bounds are directional because the closed
/// forms explode along different axes (sinh along Re y, sin along Im y):
/// |Re y| <= y_safe_re keeps the contour direction finite, |Im y| <= y_safe_im
/// the pole-search depth.
struct SigmaFn {
    std::function<cdouble(cdouble)> eval;
    double y_safe_re = 1e150;
    double y_safe_im = 1e150;
    double scale = 1.0;
    // exponential type: |d arg Sigma / d|y|| bound away from zeros; drives the
    // boundary sampling density of the argument-principle winding counts
    double phase_rate = 0.0;
    // lim Sigma/y^2 along real y (inf for exponentially growing Sigma); used by
    // the oracle to subtract a template with the right tail
    double c_inf = 1.0;
    // optional cancellation-free (Sigma - y^2)/y^4; lets the oracle evaluate
    // 1/Sigma - 1/y^2 near the origin without losing digits to the unit
    // short-distance limit
    std::function<cdouble(cdouble)> eval_reg;
};

namespace detail {
// sinh^2 u - u^2 = sum_{k>=2} 2^{2k-1} u^{2k}/(2k)!  (stable for small u)
inline cdouble sinh_sq_minus_sq(cdouble u) {
    if (std::abs(u) > 1.0) {
        const cdouble s = std::sinh(u);
        return s * s - u * u;
    }
    const cdouble u2 = u * u;
    cdouble term = u2 * u2 / 3.0;  // k = 2
    cdouble acc = term;
    for (int k = 3; k < 24; ++k) {
        term *= 4.0 * u2 / ((2.0 * k) * (2.0 * k - 1.0));
        acc += term;
        if (std::abs(term) < 1e-20 * std::abs(acc)) break;
    }
    return acc;
}

// sin(u)/u - 1, stable for small u
inline cdouble sinc_m1(cdouble u) {
    if (std::abs(u) > 0.5) return std::sin(u) / u - 1.0;
    const cdouble u2 = u * u;
    cdouble term = -u2 / 6.0;
    cdouble acc = term;
    for (int k = 2; k < 16; ++k) {
        term *= -u2 / ((2.0 * k) * (2.0 * k + 1.0));
        acc += term;
        if (std::abs(term) < 1e-20 * std::abs(acc)) break;
    }
    return acc;
}

// u^2 - sin^2 u = sum_{k>=2} (-1)^k 2^{2k-1} u^{2k}/(2k)!
inline cdouble sq_minus_sin_sq(cdouble u) {
    if (std::abs(u) > 1.0) {
        const cdouble s = std::sin(u);
        return u * u - s * s;
    }
    const cdouble u2 = u * u;
    cdouble term = u2 * u2 / 3.0;  // k = 2
    cdouble acc = term;
    for (int k = 3; k < 24; ++k) {
        term *= -4.0 * u2 / ((2.0 * k) * (2.0 * k - 1.0));
        acc += term;
        if (std::abs(term) < 1e-20 * std::abs(acc)) break;
    }
    return acc;
}
}  // namespace detail

namespace wl {

struct Inertial {};

struct UniformAcceleration {
    double a;
};

struct Rapidity1D {
    std::function<cdouble(cdouble)> b;
    std::function<cdouble(cdouble)> bdot;  // may be empty; invariants then use finite differences
    double strip;                          // analyticity half-width, may be +inf
    std::vector<double> poly;              // set when built from polynomial coefficients
};

struct RelHarmonic1D {
    double v0;
    double omega;
    std::vector<double> ck;  // Fourier coefficients of sqrt(1 + v0^2 cos^2), trimmed
};

struct ModulatedAcceleration {
    double a0, a1, omega;
};

struct Circular {
    double a, torsion;
    double omega() const { return std::sqrt(torsion * torsion - a * a); }
};

struct Cusped {
    double a;
};

struct NonRelPeriodic {
    double omega0;
    std::array<std::vector<double>, 3> amp;    // per spatial axis, mode n = 1..N
    std::array<std::vector<double>, 3> phase;
    double strip;
};

struct Generic {
    std::function<FourVecC(cdouble)> pos;
    double strip;
};

}  // namespace wl

class Worldline {
public:
    using Family = std::variant<wl::Inertial, wl::UniformAcceleration, wl::Rapidity1D,
                                wl::RelHarmonic1D, wl::ModulatedAcceleration, wl::Circular,
                                wl::Cusped, wl::NonRelPeriodic, wl::Generic>;

    static Worldline inertial() { return Worldline(wl::Inertial{}); }

    static Worldline uniform_acceleration(double a) {
        if (a <= 0.0) throw domain_error("uniform_acceleration: need a > 0");
        return Worldline(wl::UniformAcceleration{a});
    }

    static Worldline rapidity(std::function<cdouble(cdouble)> b,
                              std::function<cdouble(cdouble)> bdot = nullptr,
                              double strip = std::numeric_limits<double>::infinity()) {
        return Worldline(wl::Rapidity1D{std::move(b), std::move(bdot), strip, {}});
    }

    /// b(tau) = sum_k coeffs[k] tau^k (entire).
    static Worldline rapidity_poly(std::vector<double> coeffs) {
        auto b = [coeffs](cdouble t) {
            cdouble acc = 0.0;
            for (std::size_t k = coeffs.size(); k-- > 0;) acc = acc * t + coeffs[k];
            return acc;
        };
        auto bdot = [coeffs](cdouble t) {
            cdouble acc = 0.0;
            for (std::size_t k = coeffs.size(); k-- > 1;) acc = acc * t + double(k) * coeffs[k];
            return acc;
        };
        wl::Rapidity1D fam{std::move(b), std::move(bdot),
                           std::numeric_limits<double>::infinity(), std::move(coeffs)};
        return Worldline(std::move(fam));
    }

    static Worldline rel_harmonic(double v0, double omega) {
        if (!(v0 > 0.0 && v0 < 1.0)) throw domain_error("rel_harmonic: need 0 < v0 < 1");
        if (omega <= 0.0) throw domain_error("rel_harmonic: need omega > 0");
        // keep Fourier coefficients only down to the quadrature noise floor:
        // noise-level c_k would be amplified by sinh^2(k w y) into spurious
        // deep zeros of the truncated average
        std::vector<double> c = specfun::harmonic_coeffs(v0, 40);
        std::size_t keep = 1;
        for (std::size_t k = 1; k < c.size(); ++k) {
            if (std::abs(c[k]) < 1e-13 * c[0]) break;
            if (k >= 2 && std::abs(c[k]) >= std::abs(c[k - 1])) break;  // decay lost: noise
            keep = k + 1;
        }
        c.resize(keep);
        // enforce Parseval exactly on the kept set, so short-distance
        // cancellations in the averaged forms hold to machine precision
        double tail = 1.0 + 0.5 * v0 * v0;
        for (std::size_t k = 1; k < c.size(); ++k) tail -= 0.5 * c[k] * c[k];
        if (tail > 0.0) c[0] = 2.0 * std::sqrt(tail);
        return Worldline(wl::RelHarmonic1D{v0, omega, std::move(c)});
    }

    static Worldline modulated(double a0, double a1, double omega) {
        if (a0 <= 0.0 || omega <= 0.0 || a1 < 0.0)
            throw domain_error("modulated: need a0 > 0, a1 >= 0, omega > 0");
        return Worldline(wl::ModulatedAcceleration{a0, a1, omega});
    }

    static Worldline circular(double a, double torsion) {
        if (!(std::abs(a) < std::abs(torsion)))
            throw domain_error("circular: need |a| < |torsion|");
        return Worldline(wl::Circular{a, torsion});
    }

    static Worldline cusped(double a) {
        if (a <= 0.0) throw domain_error("cusped: need a > 0");
        return Worldline(wl::Cusped{a});
    }

    static Worldline nonrel_periodic(double omega0, std::array<std::vector<double>, 3> amp,
                                     std::array<std::vector<double>, 3> phase = {}) {
        if (omega0 <= 0.0) throw domain_error("nonrel_periodic: need omega0 > 0");
        for (int i = 0; i < 3; ++i)
            if (phase[i].size() < amp[i].size()) phase[i].resize(amp[i].size(), 0.0);
        // peak speed bound on the real axis must stay firmly non-relativistic
        double v_bound = 0.0;
        for (int i = 0; i < 3; ++i)
            for (std::size_t n = 0; n < amp[i].size(); ++n)
                v_bound += (n + 1) * omega0 * std::abs(amp[i][n]);
        if (v_bound >= 0.8)
            throw domain_error("nonrel_periodic: mode amplitudes are not non-relativistic");
        // strip half-width R: sum_n n w0 |c_n| cosh(n w0 R) <= 0.9 keeps 1+v^2 off the cut
        double lo = 0.0, hi = 1.0 / omega0;
        auto bound = [&](double R) {
            double s = 0.0;
            for (int i = 0; i < 3; ++i)
                for (std::size_t n = 0; n < amp[i].size(); ++n)
                    s += (n + 1) * omega0 * std::abs(amp[i][n]) * std::cosh((n + 1) * omega0 * R);
            return s;
        };
        while (bound(hi) < 0.9) hi *= 2.0;
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            (bound(mid) < 0.9 ? lo : hi) = mid;
        }
        return Worldline(wl::NonRelPeriodic{omega0, std::move(amp), std::move(phase), lo});
    }

    static Worldline generic(std::function<FourVecC(cdouble)> pos,
                             double strip = std::numeric_limits<double>::infinity()) {
        return Worldline(wl::Generic{std::move(pos), strip});
    }

    const Family& family() const { return fam_; }

    double strip() const {
        return std::visit(
            [](const auto& f) -> double {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, wl::Rapidity1D>) return f.strip;
                else if constexpr (std::is_same_v<T, wl::RelHarmonic1D>)
                    return std::asinh(1.0 / f.v0) / f.omega;
                else if constexpr (std::is_same_v<T, wl::NonRelPeriodic>) return f.strip;
                else if constexpr (std::is_same_v<T, wl::Generic>) return f.strip;
                else return std::numeric_limits<double>::infinity();
            },
            fam_);
    }

    bool is_stationary() const {
        return std::holds_alternative<wl::Inertial>(fam_) ||
               std::holds_alternative<wl::UniformAcceleration>(fam_) ||
               std::holds_alternative<wl::Circular>(fam_) ||
               std::holds_alternative<wl::Cusped>(fam_);
    }

    std::optional<double> period() const {
        if (auto* f = std::get_if<wl::RelHarmonic1D>(&fam_)) return two_pi / f->omega;
        if (auto* f = std::get_if<wl::ModulatedAcceleration>(&fam_)) return two_pi / f->omega;
        if (auto* f = std::get_if<wl::NonRelPeriodic>(&fam_)) return two_pi / f->omega0;
        return std::nullopt;
    }

    bool has_average() const {
        return std::holds_alternative<wl::RelHarmonic1D>(fam_) ||
               std::holds_alternative<wl::ModulatedAcceleration>(fam_) ||
               std::holds_alternative<wl::NonRelPeriodic>(fam_);
    }

    std::string descriptor() const;

    FourVecC position(cdouble tau) const;
    FourVecR velocity(double tau) const;
    cdouble sigma(double tau, cdouble y) const;
    /// Direct Eq.-of-definition route <DX,DX>; used as the cross-check oracle
    /// for families with an analytic closed form.
    cdouble sigma_direct(double tau, cdouble y) const;
    KinematicInvariants invariants(double tau) const;

    cdouble averaged_sigma(cdouble y) const;

    SigmaFn sigma_fn(double tau) const;
    SigmaFn averaged_sigma_fn() const;
    /// Exact period average of the inverse proper distance for the
    /// relativistic oscillator, packaged as an effective Sigma
    /// (1/<1/Sigma(tau,y)>), built from closed Fourier forms of the segment
    /// integrals of e^{+-b}.
    SigmaFn inverse_averaged_sigma_fn() const;

private:
    explicit Worldline(Family f) : fam_(std::move(f)) {}

    void check_strip(cdouble tau) const {
        double R = strip();
        if (std::abs(tau.imag()) > R * (1.0 + 1e-12))
            throw domain_error("worldline: |Im tau| exceeds the analyticity strip");
    }

    // e^{+b(t)} and e^{-b(t)} for the 1-D rapidity families
    cdouble exp_b(cdouble t, int sign) const;
    cdouble rapidity_value(cdouble t) const;   // b(t)
    bool is_rapidity_family() const {
        return std::holds_alternative<wl::Rapidity1D>(fam_) ||
               std::holds_alternative<wl::RelHarmonic1D>(fam_) ||
               std::holds_alternative<wl::ModulatedAcceleration>(fam_);
    }

    Family fam_;
};

// ---------------------------------------------------------------------------
// rapidity plumbing

inline cdouble Worldline::rapidity_value(cdouble t) const {
    if (auto* f = std::get_if<wl::Rapidity1D>(&fam_)) return f->b(t);
    if (auto* f = std::get_if<wl::RelHarmonic1D>(&fam_)) {
        // sinh b = v0 cos(w t)  (so that X^1 = x0 sin(w t))
        cdouble s = f->v0 * std::cos(f->omega * t);
        return std::log(s + std::sqrt(1.0 + s * s));
    }
    if (auto* f = std::get_if<wl::ModulatedAcceleration>(&fam_))
        return f->a0 * t + (f->a1 / f->omega) * std::sin(f->omega * t);
    throw domain_error("rapidity_value: not a 1-D rapidity family");
}

inline cdouble Worldline::exp_b(cdouble t, int sign) const {
    if (auto* f = std::get_if<wl::RelHarmonic1D>(&fam_)) {
        cdouble s = f->v0 * std::cos(f->omega * t);
        return double(sign) * s + std::sqrt(1.0 + s * s);
    }
    return std::exp(double(sign) * rapidity_value(t));
}

// ---------------------------------------------------------------------------
// position / velocity

inline FourVecC Worldline::position(cdouble tau) const {
    check_strip(tau);
    return std::visit(
        [&](const auto& f) -> FourVecC {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, wl::Inertial>) {
                return {tau, 0.0, 0.0, 0.0};
            } else if constexpr (std::is_same_v<T, wl::UniformAcceleration>) {
                const double a = f.a;
                return {std::sinh(a * tau) / a, (std::cosh(a * tau) - 1.0) / a, 0.0, 0.0};
            } else if constexpr (std::is_same_v<T, wl::Circular>) {
                const double w = f.omega(), a = f.a, T0 = f.torsion;
                return {(T0 / w) * tau, (a / (w * w)) * std::cos(w * tau),
                        (a / (w * w)) * std::sin(w * tau), 0.0};
            } else if constexpr (std::is_same_v<T, wl::Cusped>) {
                const double a = f.a;
                return {tau + a * a * tau * tau * tau / 6.0, a * tau * tau / 2.0,
                        a * a * tau * tau * tau / 6.0, 0.0};
            } else if constexpr (std::is_same_v<T, wl::NonRelPeriodic>) {
                FourVecC X{0.0, 0.0, 0.0, 0.0};
                for (int i = 0; i < 3; ++i) {
                    cdouble xi = 0.0;
                    for (std::size_t n = 0; n < f.amp[i].size(); ++n)
                        xi += f.amp[i][n] * std::cos((n + 1.0) * f.omega0 * tau + f.phase[i][n]);
                    X[i + 1] = xi;
                }
                auto vel0 = [&](cdouble s) {
                    cdouble v2 = 0.0;
                    for (int i = 0; i < 3; ++i) {
                        cdouble vi = 0.0;
                        for (std::size_t n = 0; n < f.amp[i].size(); ++n)
                            vi -= f.amp[i][n] * (n + 1.0) * f.omega0 *
                                  std::sin((n + 1.0) * f.omega0 * s + f.phase[i][n]);
                        v2 += vi * vi;
                    }
                    return std::sqrt(1.0 + v2);
                };
                auto r = integrate_segment_adaptive(vel0, cdouble(0.0), tau);
                X.t = r.value;
                return X;
            } else if constexpr (std::is_same_v<T, wl::Generic>) {
                return f.pos(tau);
            } else {
                // 1-D rapidity families: X^0 = int cosh b, X^1 = int sinh b
                auto ch = [&](cdouble s) { return 0.5 * (exp_b(s, +1) + exp_b(s, -1)); };
                auto sh = [&](cdouble s) { return 0.5 * (exp_b(s, +1) - exp_b(s, -1)); };
                auto r0 = integrate_segment_adaptive(ch, cdouble(0.0), tau);
                auto r1 = integrate_segment_adaptive(sh, cdouble(0.0), tau);
                return {r0.value, r1.value, 0.0, 0.0};
            }
        },
        fam_);
}

inline FourVecR Worldline::velocity(double tau) const {
    return std::visit(
        [&](const auto& f) -> FourVecR {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, wl::Inertial>) {
                return {1.0, 0.0, 0.0, 0.0};
            } else if constexpr (std::is_same_v<T, wl::UniformAcceleration>) {
                return {std::cosh(f.a * tau), std::sinh(f.a * tau), 0.0, 0.0};
            } else if constexpr (std::is_same_v<T, wl::Circular>) {
                const double w = f.omega();
                return {f.torsion / w, -(f.a / w) * std::sin(w * tau), (f.a / w) * std::cos(w * tau),
                        0.0};
            } else if constexpr (std::is_same_v<T, wl::Cusped>) {
                const double a = f.a;
                return {1.0 + a * a * tau * tau / 2.0, a * tau, a * a * tau * tau / 2.0, 0.0};
            } else if constexpr (std::is_same_v<T, wl::NonRelPeriodic>) {
                FourVecR v{0.0, 0.0, 0.0, 0.0};
                double v2 = 0.0;
                for (int i = 0; i < 3; ++i) {
                    double vi = 0.0;
                    for (std::size_t n = 0; n < f.amp[i].size(); ++n)
                        vi -= f.amp[i][n] * (n + 1.0) * f.omega0 *
                              std::sin((n + 1.0) * f.omega0 * tau + f.phase[i][n]);
                    v[i + 1] = vi;
                    v2 += vi * vi;
                }
                v.t = std::sqrt(1.0 + v2);
                return v;
            } else if constexpr (std::is_same_v<T, wl::Generic>) {
                // central difference of the user position
                const double h = 1e-6 * std::max(1.0, std::abs(tau));
                FourVecC d = (f.pos(tau + h) - f.pos(tau - h)) * (1.0 / (2.0 * h));
                return real_part(d);
            } else {
                double b = rapidity_value(tau).real();
                return {std::cosh(b), std::sinh(b), 0.0, 0.0};
            }
        },
        fam_);
}

// ---------------------------------------------------------------------------
// Sigma

inline cdouble Worldline::sigma_direct(double tau, cdouble y) const {
    if (auto* f = std::get_if<wl::NonRelPeriodic>(&fam_)) {
        // DX^0 as a single segment integral avoids cancellation at small |y|
        auto vel0 = [&](cdouble s) {
            cdouble v2 = 0.0;
            for (int i = 0; i < 3; ++i) {
                cdouble vi = 0.0;
                for (std::size_t n = 0; n < f->amp[i].size(); ++n)
                    vi -= f->amp[i][n] * (n + 1.0) * f->omega0 *
                          std::sin((n + 1.0) * f->omega0 * s + f->phase[i][n]);
                v2 += vi * vi;
            }
            return std::sqrt(1.0 + v2);
        };
        cdouble dx0 = integrate_segment_adaptive(vel0, tau - 0.5 * y, tau + 0.5 * y).value;
        cdouble acc = dx0 * dx0;
        for (int i = 0; i < 3; ++i) {
            cdouble dxi = 0.0;
            for (std::size_t n = 0; n < f->amp[i].size(); ++n) {
                const double wn = (n + 1.0) * f->omega0;
                dxi += f->amp[i][n] * (std::cos(wn * (tau + 0.5 * y) + f->phase[i][n]) -
                                       std::cos(wn * (tau - 0.5 * y) + f->phase[i][n]));
            }
            acc -= dxi * dxi;
        }
        return acc;
    }
    if (is_rapidity_family()) {
        // DX^0, DX^1 as single segment integrals of cosh b, sinh b
        auto ch = [&](cdouble s) { return 0.5 * (exp_b(s, +1) + exp_b(s, -1)); };
        auto sh = [&](cdouble s) { return 0.5 * (exp_b(s, +1) - exp_b(s, -1)); };
        cdouble d0 = integrate_segment_adaptive(ch, tau - 0.5 * y, tau + 0.5 * y).value;
        cdouble d1 = integrate_segment_adaptive(sh, tau - 0.5 * y, tau + 0.5 * y).value;
        return d0 * d0 - d1 * d1;
    }
    FourVecC d = position(tau + 0.5 * y) - position(tau - 0.5 * y);
    return minkowski_dot(d, d);
}

inline cdouble Worldline::sigma(double tau, cdouble y) const {
    check_strip(tau + 0.5 * y);
    check_strip(tau - 0.5 * y);
    return std::visit(
        [&](const auto& f) -> cdouble {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, wl::Inertial>) {
                return y * y;
            } else if constexpr (std::is_same_v<T, wl::UniformAcceleration>) {
                cdouble s = std::sinh(0.5 * f.a * y);
                return 4.0 * s * s / (f.a * f.a);
            } else if constexpr (std::is_same_v<T, wl::Circular>) {
                const double w = f.omega(), a = f.a, T0 = f.torsion;
                cdouble s = std::sin(0.5 * w * y);
                return (T0 * T0 / (w * w)) * y * y - (4.0 * a * a / (w * w * w * w)) * s * s;
            } else if constexpr (std::is_same_v<T, wl::Cusped>) {
                return y * y * (1.0 + f.a * f.a * y * y / 12.0);
            } else if constexpr (std::is_same_v<T, wl::Generic> ||
                                 std::is_same_v<T, wl::NonRelPeriodic>) {
                return sigma_direct(tau, y);
            } else {
                // 1-D rapidity families: Sigma = (int e^{b}) (int e^{-b})
                auto ep = [&](cdouble s) { return exp_b(s, +1); };
                auto em = [&](cdouble s) { return exp_b(s, -1); };
                auto rp = integrate_segment_adaptive(ep, tau - 0.5 * y, tau + 0.5 * y);
                auto rm = integrate_segment_adaptive(em, tau - 0.5 * y, tau + 0.5 * y);
                if (!rp.converged || !rm.converged)
                    throw numerical_error("sigma: rapidity quadrature did not converge, err ~ " +
                                          std::to_string(std::max(rp.err_est, rm.err_est)));
                return rp.value * rm.value;
            }
        },
        fam_);
}

// ---------------------------------------------------------------------------
// invariants

namespace detail {

/// Central finite-difference derivatives of the position at real tau,
/// h = eps^{1/5} max(1, |tau|) (5-point stencils through 4th order).
struct PathDerivs {
    FourVecR v, acc, jerk, snap;
};

template <class PosFn>
PathDerivs path_derivs(PosFn&& pos, double tau) {
    const double h = std::pow(std::numeric_limits<double>::epsilon(), 0.2) *
                     std::max(1.0, std::abs(tau));
    std::array<FourVecR, 5> X;
    for (int k = -2; k <= 2; ++k) X[k + 2] = real_part(pos(cdouble(tau + k * h)));
    PathDerivs d;
    for (int i = 0; i < 4; ++i) {
        const double m2 = X[0][i], m1 = X[1][i], c0 = X[2][i], p1 = X[3][i], p2 = X[4][i];
        d.v[i] = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
        d.acc[i] = (16.0 * (p1 + m1) - (p2 + m2) - 30.0 * c0) / (12.0 * h * h);
        d.jerk[i] = (p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * h * h * h);
        d.snap[i] = (p2 - 4.0 * p1 + 6.0 * c0 - 4.0 * m1 + m2) / (h * h * h * h);
    }
    return d;
}

inline double det4(const FourVecR& A, const FourVecR& B, const FourVecR& C, const FourVecR& D) {
    double m[4][4];
    for (int j = 0; j < 4; ++j) {
        m[0][j] = A[j];
        m[1][j] = B[j];
        m[2][j] = C[j];
        m[3][j] = D[j];
    }
    // cofactor expansion over the first row with 3x3 minors
    auto minor3 = [&](int c0, int c1, int c2) {
        return m[1][c0] * (m[2][c1] * m[3][c2] - m[2][c2] * m[3][c1]) -
               m[1][c1] * (m[2][c0] * m[3][c2] - m[2][c2] * m[3][c0]) +
               m[1][c2] * (m[2][c0] * m[3][c1] - m[2][c1] * m[3][c0]);
    };
    return m[0][0] * minor3(1, 2, 3) - m[0][1] * minor3(0, 2, 3) + m[0][2] * minor3(0, 1, 3) -
           m[0][3] * minor3(0, 1, 2);
}

inline KinematicInvariants invariants_from_derivs(const PathDerivs& d) {
    KinematicInvariants k;
    const double a2 = -minkowski_dot(d.acc, d.acc);
    k.a = a2 > 0.0 ? std::sqrt(a2) : 0.0;
    if (k.a < 1e-10) return k;  // straight-line degeneracy: T, upsilon reported 0
    const double adot_scalar = -minkowski_dot(d.acc, d.jerk) / k.a;
    const double t2 = (std::pow(k.a, 4) - adot_scalar * adot_scalar -
                       minkowski_dot(d.jerk, d.jerk)) /
                      (k.a * k.a);
    k.torsion = t2 > 0.0 ? std::sqrt(t2) : 0.0;
    if (k.torsion < 1e-7 * std::max(1.0, k.a)) {
        k.torsion = std::max(k.torsion, 0.0);
        return k;  // planar degeneracy: upsilon reported 0
    }
    k.hypertorsion = det4(d.v, d.acc, d.jerk, d.snap) /
                     (std::pow(k.a, 3) * k.torsion * k.torsion);
    return k;
}

}  // namespace detail

inline KinematicInvariants Worldline::invariants(double tau) const {
    return std::visit(
        [&](const auto& f) -> KinematicInvariants {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, wl::Inertial>) {
                return {0.0, 0.0, 0.0};
            } else if constexpr (std::is_same_v<T, wl::UniformAcceleration>) {
                return {f.a, 0.0, 0.0};
            } else if constexpr (std::is_same_v<T, wl::Circular>) {
                return {std::abs(f.a), std::abs(f.torsion), 0.0};
            } else if constexpr (std::is_same_v<T, wl::Cusped>) {
                return {f.a, f.a, 0.0};
            } else if constexpr (std::is_same_v<T, wl::RelHarmonic1D>) {
                const double c = std::cos(f.omega * tau), s = std::sin(f.omega * tau);
                const double bdot =
                    -f.v0 * f.omega * s / std::sqrt(1.0 + f.v0 * f.v0 * c * c);
                return {std::abs(bdot), 0.0, 0.0};
            } else if constexpr (std::is_same_v<T, wl::ModulatedAcceleration>) {
                return {std::abs(f.a0 + f.a1 * std::cos(f.omega * tau)), 0.0, 0.0};
            } else if constexpr (std::is_same_v<T, wl::Rapidity1D>) {
                if (f.bdot) return {std::abs(f.bdot(cdouble(tau)).real()), 0.0, 0.0};
                const double h = std::pow(std::numeric_limits<double>::epsilon(), 1.0 / 3.0) *
                                 std::max(1.0, std::abs(tau));
                return {std::abs((f.b(tau + h) - f.b(tau - h)).real() / (2.0 * h)), 0.0, 0.0};
            } else {
                auto pos = [&](cdouble t) { return position(t); };
                return detail::invariants_from_derivs(detail::path_derivs(pos, tau));
            }
        },
        fam_);
}

// ---------------------------------------------------------------------------
// period-averaged Sigma

inline cdouble Worldline::averaged_sigma(cdouble y) const {
    if (auto* f = std::get_if<wl::RelHarmonic1D>(&fam_)) {
        const double w = f->omega, v0 = f->v0;
        const auto& c = f->ck;
        cdouble shalf = std::sin(0.5 * w * y);
        cdouble acc = 0.25 * c[0] * c[0] * y * y - (2.0 * v0 * v0 / (w * w)) * shalf * shalf;
        for (std::size_t k = 1; k < c.size(); ++k) {
            cdouble sk = std::sin(double(k) * w * y);
            acc += (c[k] * c[k] / (2.0 * k * k * w * w)) * sk * sk;
        }
        return acc;
    }
    if (auto* f = std::get_if<wl::NonRelPeriodic>(&fam_)) {
        cdouble acc = y * y;
        for (std::size_t n = 0;; ++n) {
            double cn2 = 0.0;
            bool any = false;
            for (int i = 0; i < 3; ++i)
                if (n < f->amp[i].size()) {
                    cn2 += f->amp[i][n] * f->amp[i][n];
                    any = true;
                }
            if (!any) break;
            cdouble s = std::sin(0.5 * (n + 1.0) * f->omega0 * y);
            acc -= cn2 * s * s;
        }
        return acc;
    }
    if (auto* f = std::get_if<wl::ModulatedAcceleration>(&fam_)) {
        // second-order average in a1/omega; S(q) = 2(cosh(q y) - 1)/q^2
        const double a0 = f->a0, a1 = f->a1, w = f->omega;
        auto S = [&](cdouble q) { return 2.0 * (std::cosh(q * y) - 1.0) / (q * q); };
        const double eta = a1 * a1 / (2.0 * w * w);
        cdouble sh = std::sinh(0.5 * a0 * y);
        cdouble base = 4.0 * sh * sh / (a0 * a0);
        return base * (1.0 + eta) -
               (a1 * a1 / (4.0 * w * w)) * (S(cdouble(a0, w)) + S(cdouble(a0, -w)));
    }
    throw domain_error("averaged_sigma: family has no period average");
}

// ---------------------------------------------------------------------------
// SigmaFn providers

inline SigmaFn Worldline::sigma_fn(double tau) const {
    SigmaFn s;
    Worldline self = *this;
    s.eval = [self, tau](cdouble y) { return self.sigma(tau, y); };
    std::visit(
        [&](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, wl::Inertial>) {
                s.scale = 1.0;
                s.c_inf = 1.0;
                s.eval_reg = [](cdouble) { return cdouble(0.0); };
            } else if constexpr (std::is_same_v<T, wl::UniformAcceleration>) {
                s.y_safe_re = 690.0 / f.a;  // sinh^2(a y/2) explodes along Re y
                s.scale = two_pi / f.a;
                s.phase_rate = f.a;
                s.c_inf = std::numeric_limits<double>::infinity();
                const double a = f.a;
                s.eval_reg = [a](cdouble y) {
                    // (4 sinh^2(a y/2)/a^2 - y^2)/y^4
                    const cdouble y2 = y * y;
                    return 4.0 * detail::sinh_sq_minus_sq(0.5 * a * y) / (a * a * y2 * y2);
                };
            } else if constexpr (std::is_same_v<T, wl::Circular>) {
                s.y_safe_im = 690.0 / f.omega();  // sin^2(w y/2) explodes along Im y
                s.scale = two_pi / f.omega();
                s.phase_rate = f.omega();
                s.c_inf = f.torsion * f.torsion / (f.omega() * f.omega());
                const double a = f.a, om = f.omega();
                s.eval_reg = [a, om](cdouble y) {
                    // Sigma - y^2 = (4 a^2/om^4) [ (om y/2)^2 - sin^2(om y/2) ]
                    const cdouble y2 = y * y;
                    return 4.0 * a * a * detail::sq_minus_sin_sq(0.5 * om * y) /
                           (om * om * om * om * y2 * y2);
                };
            } else if constexpr (std::is_same_v<T, wl::Cusped>) {
                s.y_safe_re = 1e60;
                s.y_safe_im = 1e60;
                s.scale = 1.0 / f.a;
                s.c_inf = std::numeric_limits<double>::infinity();
                const double a = f.a;
                s.eval_reg = [a](cdouble) { return cdouble(a * a / 12.0); };
            } else if constexpr (std::is_same_v<T, wl::RelHarmonic1D>) {
                s.y_safe_im = 1.86 * std::asinh(1.0 / f.v0) / f.omega;  // strip-limited
                s.scale = 1.0 / f.omega;
                s.phase_rate = 3.0 * f.omega;
                s.c_inf = 0.25 * f.ck[0] * f.ck[0];
            } else if constexpr (std::is_same_v<T, wl::ModulatedAcceleration>) {
                // exp budget on a disk: a0(|tau| + r) + (a1/w) cosh(w r) <= 320
                double lo = 0.0, hi = 1.0;
                auto bound = [&](double r) {
                    return f.a0 * (std::abs(tau) + r) + (f.a1 / f.omega) * std::cosh(f.omega * r);
                };
                while (bound(hi) < 320.0 && hi < 1e9) hi *= 2.0;
                for (int it = 0; it < 200; ++it) {
                    double mid = 0.5 * (lo + hi);
                    (bound(mid) < 320.0 ? lo : hi) = mid;
                }
                s.y_safe_re = 2.0 * lo;
                s.y_safe_im = 2.0 * lo;
                s.scale = two_pi / f.a0;
                s.phase_rate = f.a0 + f.a1 * std::cosh(std::min(f.omega * lo, 350.0));
                s.c_inf = std::numeric_limits<double>::infinity();
            } else if constexpr (std::is_same_v<T, wl::Rapidity1D>) {
                double cap = std::numeric_limits<double>::infinity();
                if (!f.poly.empty()) {
                    double lo = 0.0, hi = 1.0;
                    auto bound = [&](double r) {
                        double acc = 0.0, p = 1.0;
                        for (std::size_t k = 0; k < f.poly.size(); ++k) {
                            acc += std::abs(f.poly[k]) * p;
                            p *= (std::abs(tau) + r);
                        }
                        return acc;
                    };
                    while (bound(hi) < 320.0 && hi < 1e9) hi *= 2.0;
                    for (int it = 0; it < 200; ++it) {
                        double mid = 0.5 * (lo + hi);
                        (bound(mid) < 320.0 ? lo : hi) = mid;
                    }
                    cap = 2.0 * lo;
                }
                s.y_safe_re = cap;
                s.y_safe_im = std::min(cap, 1.9 * f.strip);
                s.scale = 1.0;
                double rate = 0.0, p = 1.0;
                const double r = std::min(s.y_safe_im, 1e6);
                for (std::size_t k = 1; k < f.poly.size(); ++k) {
                    rate += double(k) * std::abs(f.poly[k]) * p;
                    p *= (std::abs(tau) + r);
                }
                s.phase_rate = f.poly.empty() ? 4.0 : rate;
                s.c_inf = std::numeric_limits<double>::infinity();
            } else if constexpr (std::is_same_v<T, wl::NonRelPeriodic>) {
                s.y_safe_im = 1.9 * f.strip;
                s.scale = 1.0 / f.omega0;
                std::size_t nmax = 1;
                for (int i = 0; i < 3; ++i) nmax = std::max(nmax, f.amp[i].size());
                s.phase_rate = 2.0 * double(nmax) * f.omega0;
                // mean Lorentz factor over a period sets the quadratic tail
                const double gbar =
                    periodic_mean([&](double t) { return cdouble(velocity(t).t); },
                                  two_pi / f.omega0, 64)
                        .real();
                s.c_inf = gbar * gbar;
            } else {
                s.y_safe_im = 1.9 * f.strip;
                s.scale = 1.0;
            }
        },
        fam_);
    return s;
}

inline SigmaFn Worldline::averaged_sigma_fn() const {
    SigmaFn s;
    Worldline self = *this;
    s.eval = [self](cdouble y) { return self.averaged_sigma(y); };
    if (auto* f = std::get_if<wl::RelHarmonic1D>(&fam_)) {
        const double kmax = double(std::max<std::size_t>(f->ck.size() - 1, 1));
        s.y_safe_im = 345.0 / (kmax * f->omega);  // sin^2(k w y)
        s.scale = 1.0 / f->omega;
        s.phase_rate = 2.0 * kmax * f->omega;
        s.c_inf = 0.25 * f->ck[0] * f->ck[0];
        // (Sigma_avg - y^2)/y^4 assembled from u^2 - sin^2 u brackets, which
        // makes the short-distance cancellation exact (Parseval in bracket form)
        const double om = f->omega, v0 = f->v0;
        const std::vector<double> ck = f->ck;
        s.eval_reg = [om, v0, ck](cdouble y) {
            const cdouble y2 = y * y;
            const cdouble y4 = y2 * y2;
            cdouble acc = (2.0 * v0 * v0 / (om * om)) * detail::sq_minus_sin_sq(0.5 * om * y) / y4;
            for (std::size_t k = 1; k < ck.size(); ++k)
                acc -= (ck[k] * ck[k] / (2.0 * k * k * om * om)) *
                       detail::sq_minus_sin_sq(double(k) * om * y) / y4;
            return acc;
        };
    } else if (auto* f = std::get_if<wl::ModulatedAcceleration>(&fam_)) {
        s.y_safe_re = 345.0 / f->a0;   // cosh((a0 +- i w) y)
        s.y_safe_im = 345.0 / f->omega;
        s.scale = two_pi / f->a0;
        s.phase_rate = std::hypot(f->a0, f->omega);
        s.c_inf = std::numeric_limits<double>::infinity();
        const double a0 = f->a0, a1 = f->a1, om = f->omega;
        s.eval_reg = [a0, a1, om](cdouble y) {
            const cdouble y2 = y * y;
            const cdouble y4 = y2 * y2;
            const double eta = a1 * a1 / (2.0 * om * om);
            const cdouble qp(a0, om), qm(a0, -om);
            cdouble acc = (1.0 + eta) * 4.0 * detail::sinh_sq_minus_sq(0.5 * a0 * y) /
                          (a0 * a0 * y4);
            acc -= (a1 * a1 / (om * om)) *
                   (detail::sinh_sq_minus_sq(0.5 * qp * y) / (qp * qp) +
                    detail::sinh_sq_minus_sq(0.5 * qm * y) / (qm * qm)) /
                   y4;
            return acc;
        };
    } else if (auto* f = std::get_if<wl::NonRelPeriodic>(&fam_)) {
        std::size_t nmax = 1;
        for (int i = 0; i < 3; ++i) nmax = std::max(nmax, f->amp[i].size());
        s.y_safe_im = 690.0 / (double(nmax) * f->omega0);  // sin^2(n w0 y/2)
        s.scale = 1.0 / f->omega0;
        s.phase_rate = double(nmax) * f->omega0;
        s.c_inf = 1.0;
        const auto amp = f->amp;
        const double om0 = f->omega0;
        s.eval_reg = [amp, om0](cdouble y) {
            // this family's averaged form keeps an O(v^2) short-distance
            // deficit by construction; no cancellation happens here
            const cdouble y2 = y * y;
            cdouble acc = 0.0;
            for (int i = 0; i < 3; ++i)
                for (std::size_t n = 0; n < amp[i].size(); ++n) {
                    const cdouble sn = std::sin(0.5 * (n + 1.0) * om0 * y);
                    acc -= amp[i][n] * amp[i][n] * sn * sn;
                }
            return acc / (y2 * y2);
        };
    } else {
        throw domain_error("averaged_sigma_fn: family has no period average");
    }
    return s;
}

inline SigmaFn Worldline::inverse_averaged_sigma_fn() const {
    auto* f = std::get_if<wl::RelHarmonic1D>(&fam_);
    if (!f) throw domain_error("inverse_averaged_sigma_fn: relativistic oscillator only");
    const double om = f->omega, v0 = f->v0;
    const std::vector<double> ck = f->ck;
    const int n_tau = 96;

    // <1/Sigma - 1/y^2>_tau, assembled so every short-distance cancellation is
    // explicit: Sigma(tau,y) = y^2 A+ A- with A+- the segment means of e^{+-b},
    //   A+- = hA(tau,y) -+... = hA +- v0 cos(w tau) sinc(w y/2),
    //   hA = c0/2 + sum_k c_k cos(2k w tau) sinc(k w y),
    // and (A+ A- - 1) expanded in sinc-1 brackets (Parseval makes the y -> 0
    // constant vanish on the kept coefficient set).
    auto G_reg = [om, v0, ck, n_tau](cdouble y) -> cdouble {
        const cdouble y2 = y * y;
        const cdouble s1 = detail::sinc_m1(0.5 * om * y);
        std::vector<cdouble> smk(ck.size(), 0.0);
        for (std::size_t k = 1; k < ck.size(); ++k) smk[k] = detail::sinc_m1(double(k) * om * y);
        cdouble acc = 0.0;
        for (int j = 0; j < n_tau; ++j) {
            const double th = two_pi * j / n_tau;  // omega tau
            const double cth = std::cos(th);
            double ht = 0.5 * ck[0];
            cdouble dA = 0.0;  // hA - ht
            for (std::size_t k = 1; k < ck.size(); ++k) {
                const double ckc = ck[k] * std::cos(2.0 * k * th);
                ht += ckc;
                dA += ckc * smk[k];
            }
            const double vc = v0 * cth;
            // L = A+ A- - 1 = (hA^2 - ht^2) + (ht^2 - vc^2 - 1) - vc^2 (sinc^2 - 1)
            const cdouble piece1 = dA * (dA + 2.0 * ht);
            // ht^2 - vc^2 - 1: ~1e-16 after the Parseval rescale, and its
            // tau-mean vanishes on the kept coefficient set
            const double piece2 = (ht * ht - vc * vc) - 1.0;
            const cdouble piece3 = -vc * vc * s1 * (s1 + 2.0);
            const cdouble R = (piece1 + piece2 + piece3) / y2;
            acc += -R / (1.0 + R * y2);
        }
        return acc / double(n_tau);
    };

    SigmaFn s;
    s.eval = [G_reg](cdouble y) {
        const cdouble G = G_reg(y);
        return y * y / (1.0 + y * y * G);
    };
    s.eval_reg = [G_reg](cdouble y) {
        const cdouble G = G_reg(y);
        return -G / (1.0 + y * y * G);
    };
    s.scale = 1.0 / om;
    s.c_inf = 0.25 * ck[0] * ck[0];
    s.y_safe_im = 1.86 * std::asinh(1.0 / v0) / om;
    s.phase_rate = 3.0 * om;
    return s;
}

inline std::string Worldline::descriptor() const {
    std::ostringstream os;
    std::visit(
        [&](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, wl::Inertial>) os << "inertial";
            else if constexpr (std::is_same_v<T, wl::UniformAcceleration>)
                os << "uniform_acceleration(a=" << f.a << ")";
            else if constexpr (std::is_same_v<T, wl::Circular>)
                os << "circular(a=" << f.a << ",torsion=" << f.torsion << ")";
            else if constexpr (std::is_same_v<T, wl::Cusped>) os << "cusped(a=" << f.a << ")";
            else if constexpr (std::is_same_v<T, wl::RelHarmonic1D>)
                os << "rel_harmonic(v0=" << f.v0 << ",omega=" << f.omega << ")";
            else if constexpr (std::is_same_v<T, wl::ModulatedAcceleration>)
                os << "modulated(a0=" << f.a0 << ",a1=" << f.a1 << ",omega=" << f.omega << ")";
            else if constexpr (std::is_same_v<T, wl::Rapidity1D>) {
                os << "rapidity_poly(";
                for (std::size_t i = 0; i < f.poly.size(); ++i)
                    os << (i ? " " : "") << f.poly[i];
                os << ")";
            } else if constexpr (std::is_same_v<T, wl::NonRelPeriodic>)
                os << "nonrel_periodic(omega0=" << f.omega0 << ")";
            else os << "generic";
        },
        fam_);
    return os.str();
}

}  // namespace udw
