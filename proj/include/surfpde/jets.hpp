#pragma once

#include <cmath>

#include "surfpde/types.hpp"

namespace surfpde {

// Truncated Taylor data of a function of the two chart parameters. Jet2 carries
// value, gradient and Hessian in the parameter variables; Jet1 drops the Hessian.
// Each tangential derivative consumes one order: fields enter as Jet2, their first
// tangential derivatives are Jet1, second tangential derivatives are plain values.

struct Jet1 {
    double v = 0.0;
    Vec2 d = Vec2::Zero();

    Jet1() = default;
    Jet1(double value, const Vec2& grad) : v(value), d(grad) {}
    static Jet1 constant(double c) { return {c, Vec2::Zero()}; }
};

inline Jet1 operator+(const Jet1& a, const Jet1& b) { return {a.v + b.v, a.d + b.d}; }
inline Jet1 operator-(const Jet1& a, const Jet1& b) { return {a.v - b.v, a.d - b.d}; }
inline Jet1 operator-(const Jet1& a) { return {-a.v, -a.d}; }
inline Jet1 operator*(const Jet1& a, const Jet1& b) { return {a.v * b.v, a.v * b.d + b.v * a.d}; }
inline Jet1 operator*(double s, const Jet1& a) { return {s * a.v, s * a.d}; }

struct Jet2 {
    double v = 0.0;
    Vec2 d = Vec2::Zero();
    Mat2 h = Mat2::Zero();

    Jet2() = default;
    Jet2(double value, const Vec2& grad, const Mat2& hess) : v(value), d(grad), h(hess) {}
    static Jet2 constant(double c) { return {c, Vec2::Zero(), Mat2::Zero()}; }

    Jet1 lower() const { return {v, d}; }
    /// The field ∂_a(·) as a one-order-lower jet.
    Jet1 partial(int a) const { return {d[a], h.col(a)}; }
};

inline Jet2 operator+(const Jet2& a, const Jet2& b) { return {a.v + b.v, a.d + b.d, a.h + b.h}; }
inline Jet2 operator-(const Jet2& a, const Jet2& b) { return {a.v - b.v, a.d - b.d, a.h - b.h}; }
inline Jet2 operator-(const Jet2& a) { return {-a.v, -a.d, -a.h}; }
inline Jet2 operator*(double s, const Jet2& a) { return {s * a.v, s * a.d, s * a.h}; }

inline Jet2 operator*(const Jet2& a, const Jet2& b) {
    Jet2 r;
    r.v = a.v * b.v;
    r.d = a.v * b.d + b.v * a.d;
    r.h = a.v * b.h + b.v * a.h + a.d * b.d.transpose() + b.d * a.d.transpose();
    return r;
}

inline Jet2 inverse(const Jet2& a) {
    const double iv = 1.0 / a.v;
    Jet2 r;
    r.v = iv;
    r.d = -iv * iv * a.d;
    r.h = -iv * iv * a.h + 2.0 * iv * iv * iv * a.d * a.d.transpose();
    return r;
}

inline Jet2 sqrt(const Jet2& a) {
    const double s = std::sqrt(a.v);
    Jet2 r;
    r.v = s;
    r.d = a.d / (2.0 * s);
    r.h = a.h / (2.0 * s) - (a.d * a.d.transpose()) / (4.0 * s * s * s);
    return r;
}

}  // namespace surfpde
