#ifndef ORBITSHIFT_SRC_JETS_HPP
#define ORBITSHIFT_SRC_JETS_HPP

// Truncated Taylor ("jet") algebra for scalar functions of two variables,
// up to third order. Used to push analytic derivatives of cylindrical field
// components through products and quotients, e.g. for R*Bpol/Bphi and its
// first variation under a field perturbation.

#include <array>

namespace orbitshift::detail {

struct ScalarJet2 {
    double v = 0.0;                            // value
    std::array<double, 2> g{{0, 0}};           // d/ds_j
    std::array<std::array<double, 2>, 2> h{};  // d2/ds_j ds_k
    double c[2][2][2] = {};                    // d3/ds_j ds_k ds_l

    static ScalarJet2 constant(double val) {
        ScalarJet2 j;
        j.v = val;
        return j;
    }
    // the coordinate s_which itself, evaluated at `val`
    static ScalarJet2 coord(int which, double val) {
        ScalarJet2 j;
        j.v = val;
        j.g[which] = 1.0;
        return j;
    }
};

inline ScalarJet2 operator+(const ScalarJet2& a, const ScalarJet2& b) {
    ScalarJet2 r;
    r.v = a.v + b.v;
    for (int j = 0; j < 2; ++j) {
        r.g[j] = a.g[j] + b.g[j];
        for (int k = 0; k < 2; ++k) {
            r.h[j][k] = a.h[j][k] + b.h[j][k];
            for (int l = 0; l < 2; ++l) r.c[j][k][l] = a.c[j][k][l] + b.c[j][k][l];
        }
    }
    return r;
}

inline ScalarJet2 operator-(const ScalarJet2& a, const ScalarJet2& b) {
    ScalarJet2 r;
    r.v = a.v - b.v;
    for (int j = 0; j < 2; ++j) {
        r.g[j] = a.g[j] - b.g[j];
        for (int k = 0; k < 2; ++k) {
            r.h[j][k] = a.h[j][k] - b.h[j][k];
            for (int l = 0; l < 2; ++l) r.c[j][k][l] = a.c[j][k][l] - b.c[j][k][l];
        }
    }
    return r;
}

inline ScalarJet2 operator*(double s, const ScalarJet2& a) {
    ScalarJet2 r = a;
    r.v *= s;
    for (int j = 0; j < 2; ++j) {
        r.g[j] *= s;
        for (int k = 0; k < 2; ++k) {
            r.h[j][k] *= s;
            for (int l = 0; l < 2; ++l) r.c[j][k][l] *= s;
        }
    }
    return r;
}

// Leibniz rule through third order.
inline ScalarJet2 operator*(const ScalarJet2& a, const ScalarJet2& b) {
    ScalarJet2 r;
    r.v = a.v * b.v;
    for (int j = 0; j < 2; ++j) r.g[j] = a.g[j] * b.v + a.v * b.g[j];
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k)
            r.h[j][k] = a.h[j][k] * b.v + a.g[j] * b.g[k] + a.g[k] * b.g[j] + a.v * b.h[j][k];
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k)
            for (int l = 0; l < 2; ++l)
                r.c[j][k][l] = a.c[j][k][l] * b.v + a.h[j][k] * b.g[l] + a.h[j][l] * b.g[k] +
                               a.h[k][l] * b.g[j] + a.g[j] * b.h[k][l] + a.g[k] * b.h[j][l] +
                               a.g[l] * b.h[j][k] + a.v * b.c[j][k][l];
    return r;
}

// 1/w, requires w.v != 0 (checked by callers against the domain).
inline ScalarJet2 recip(const ScalarJet2& w) {
    ScalarJet2 r;
    const double i1 = 1.0 / w.v;
    const double i2 = i1 * i1;
    const double i3 = i2 * i1;
    const double i4 = i3 * i1;
    r.v = i1;
    for (int j = 0; j < 2; ++j) r.g[j] = -w.g[j] * i2;
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) r.h[j][k] = 2.0 * w.g[j] * w.g[k] * i3 - w.h[j][k] * i2;
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k)
            for (int l = 0; l < 2; ++l)
                r.c[j][k][l] = -6.0 * w.g[j] * w.g[k] * w.g[l] * i4 +
                               2.0 * (w.h[j][k] * w.g[l] + w.h[j][l] * w.g[k] + w.h[k][l] * w.g[j]) * i3 -
                               w.c[j][k][l] * i2;
    return r;
}

}  // namespace orbitshift::detail

#endif
