#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

namespace udw {

using cdouble = std::complex<double>;

inline constexpr double pi = 3.141592653589793238462643383279502884;
inline constexpr double two_pi = 2.0 * pi;
inline constexpr double sqrt_pi = 1.772453850905516027298167483341145183;

struct domain_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct overflow_signal : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Minkowski four-vector, signature (+,-,-,-), natural units c = 1.
template <class T>
struct FourVec {
    T t{}, x{}, y{}, z{};

    FourVec() = default;
    FourVec(T t_, T x_, T y_, T z_) : t(t_), x(x_), y(y_), z(z_) {}

    FourVec operator+(const FourVec& o) const { return {t + o.t, x + o.x, y + o.y, z + o.z}; }
    FourVec operator-(const FourVec& o) const { return {t - o.t, x - o.x, y - o.y, z - o.z}; }
    FourVec operator*(T s) const { return {t * s, x * s, y * s, z * s}; }

    T& operator[](int i) { return *(&t + i); }
    const T& operator[](int i) const { return *(&t + i); }
};

using FourVecR = FourVec<double>;
using FourVecC = FourVec<cdouble>;

/// <u,v> = u0 v0 - u.v  (timelike vectors have positive norm).
template <class T>
inline T minkowski_dot(const FourVec<T>& u, const FourVec<T>& v) {
    return u.t * v.t - u.x * v.x - u.y * v.y - u.z * v.z;
}

inline FourVecC to_complex(const FourVecR& u) {
    return {cdouble(u.t), cdouble(u.x), cdouble(u.y), cdouble(u.z)};
}

inline FourVecR real_part(const FourVecC& u) {
    return {u.t.real(), u.x.real(), u.y.real(), u.z.real()};
}

inline bool finite(const cdouble& z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
}

}  // namespace udw
