#pragma once

#include <cmath>

namespace natbound {

/// Second-order truncated Taylor number: value plus first and second
/// derivative with respect to one scalar variable. Drifts are written once
/// as generic callables and evaluated either on doubles (fast path) or on
/// jets when exact derivatives are needed.
struct Jet {
    double v = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;

    constexpr Jet() = default;
    constexpr Jet(double value) : v(value) {}  // NOLINT: implicit constants
    constexpr Jet(double value, double first, double second) : v(value), d1(first), d2(second) {}

    static constexpr Jet variable(double x) { return {x, 1.0, 0.0}; }
};

inline constexpr Jet operator+(const Jet& a, const Jet& b) { return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2}; }
inline constexpr Jet operator-(const Jet& a, const Jet& b) { return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2}; }
inline constexpr Jet operator-(const Jet& a) { return {-a.v, -a.d1, -a.d2}; }
inline constexpr Jet operator*(const Jet& a, const Jet& b) {
    return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2};
}
inline constexpr Jet operator/(const Jet& a, const Jet& b) {
    const double q = a.v / b.v;
    const double q1 = (a.d1 - q * b.d1) / b.v;
    const double q2 = (a.d2 - 2.0 * q1 * b.d1 - q * b.d2) / b.v;
    return {q, q1, q2};
}
inline Jet& operator+=(Jet& a, const Jet& b) { return a = a + b; }
inline Jet& operator-=(Jet& a, const Jet& b) { return a = a - b; }
inline Jet& operator*=(Jet& a, const Jet& b) { return a = a * b; }
inline Jet& operator/=(Jet& a, const Jet& b) { return a = a / b; }

// Chain rule for f(a) given f, f', f'' at a.v.
inline constexpr Jet compose(const Jet& a, double f, double df, double d2f) {
    return {f, df * a.d1, d2f * a.d1 * a.d1 + df * a.d2};
}

inline Jet exp(const Jet& a) {
    const double e = std::exp(a.v);
    return compose(a, e, e, e);
}
inline Jet log(const Jet& a) { return compose(a, std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v)); }
inline Jet sqrt(const Jet& a) {
    const double s = std::sqrt(a.v);
    return compose(a, s, 0.5 / s, -0.25 / (s * a.v));
}
inline Jet pow(const Jet& a, double p) {
    if (p == 0.0) return Jet(1.0);
    const double f = std::pow(a.v, p);
    const double df = p * std::pow(a.v, p - 1.0);
    const double d2f = p * (p - 1.0) * std::pow(a.v, p - 2.0);
    return compose(a, f, df, d2f);
}
inline Jet pow(const Jet& a, const Jet& b) {
    if (b.d1 == 0.0 && b.d2 == 0.0) return pow(a, b.v);
    return exp(b * log(a));
}

inline double value_of(double x) { return x; }
inline double value_of(const Jet& x) { return x.v; }

}  // namespace natbound
