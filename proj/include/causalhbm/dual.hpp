#pragma once

#include <cmath>

namespace causalhbm {

// Forward-mode dual number: value plus one tangent component. Running the
// hand-written gradient code on Dual inputs yields exact directional second
// derivatives (Hessian-vector products) without a tape.
struct Dual {
    double v = 0.0;
    double t = 0.0;

    Dual() = default;
    Dual(double value) : v(value) {}
    Dual(double value, double tangent) : v(value), t(tangent) {}
};

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }

inline Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.t + b.t}; }
inline Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.t - b.t}; }
inline Dual operator-(const Dual& a) { return {-a.v, -a.t}; }
inline Dual operator*(const Dual& a, const Dual& b) { return {a.v * b.v, a.t * b.v + a.v * b.t}; }
inline Dual operator/(const Dual& a, const Dual& b) {
    const double inv = 1.0 / b.v;
    return {a.v * inv, (a.t - a.v * b.t * inv) * inv};
}

inline Dual operator+(const Dual& a, double b) { return {a.v + b, a.t}; }
inline Dual operator+(double a, const Dual& b) { return {a + b.v, b.t}; }
inline Dual operator-(const Dual& a, double b) { return {a.v - b, a.t}; }
inline Dual operator-(double a, const Dual& b) { return {a - b.v, -b.t}; }
inline Dual operator*(const Dual& a, double b) { return {a.v * b, a.t * b}; }
inline Dual operator*(double a, const Dual& b) { return {a * b.v, a * b.t}; }
inline Dual operator/(const Dual& a, double b) { return {a.v / b, a.t / b}; }
inline Dual operator/(double a, const Dual& b) {
    const double inv = 1.0 / b.v;
    return {a * inv, -a * b.t * inv * inv};
}

inline Dual& operator+=(Dual& a, const Dual& b) { return a = a + b; }
inline Dual& operator-=(Dual& a, const Dual& b) { return a = a - b; }
inline Dual& operator*=(Dual& a, const Dual& b) { return a = a * b; }

inline bool operator<(const Dual& a, double b) { return a.v < b; }
inline bool operator>(const Dual& a, double b) { return a.v > b; }

inline Dual exp(const Dual& a) {
    const double e = std::exp(a.v);
    return {e, a.t * e};
}
inline Dual log(const Dual& a) { return {std::log(a.v), a.t / a.v}; }
inline Dual log1p(const Dual& a) { return {std::log1p(a.v), a.t / (1.0 + a.v)}; }
inline Dual sqrt(const Dual& a) {
    const double r = std::sqrt(a.v);
    return {r, 0.5 * a.t / r};
}

}  // namespace causalhbm
