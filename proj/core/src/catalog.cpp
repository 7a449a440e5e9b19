#include <cmath>
#include <complex>
#include <memory>

#include "field_impl.hpp"

// Builtin analytic systems and perturbation directions. Every backend here
// provides closed-form spatial derivatives; finite differences are only a
// fallback mode.

namespace orbitshift {
namespace detail {
namespace {

using std::cos;
using std::sin;

class NamedImpl : public FieldImpl {
public:
    NamedImpl(std::string id, std::map<std::string, double> params)
        : id_(std::move(id)), params_(std::move(params)) {}
    const std::string& id() const override { return id_; }
    const std::map<std::string, double>& params() const override { return params_; }

protected:
    double p(const std::string& key) const { return params_.at(key); }

private:
    std::string id_;
    std::map<std::string, double> params_;
};

// ---------------------------------------------------------------------------
// Autonomous flows
// ---------------------------------------------------------------------------

// dx/dt = A sin z + C cos y,  dy/dt = B sin x + A cos z,  dz/dt = C sin y + B cos x
class AbcImpl : public NamedImpl {
public:
    using NamedImpl::NamedImpl;
    SystemKind kind() const override { return SystemKind::FlowAutonomous; }
    int dim() const override { return 3; }
    int analytic_order() const override { return 3; }

    Vec value(const Vec& x, double) const override {
        const double A = p("A"), B = p("B"), C = p("C");
        Vec out(3);
        out << A * sin(x[2]) + C * cos(x[1]), B * sin(x[0]) + A * cos(x[2]),
            C * sin(x[1]) + B * cos(x[0]);
        return out;
    }

    void fill_analytic(const Vec& x, double, int order, DerivativeTensors& out) const override {
        const double A = p("A"), B = p("B"), C = p("C");
        const double sx = sin(x[0]), cx = cos(x[0]);
        const double sy = sin(x[1]), cy = cos(x[1]);
        const double sz = sin(x[2]), cz = cos(x[2]);
        out.value = Vec(3);
        out.value << A * sz + C * cy, B * sx + A * cz, C * sy + B * cx;
        out.grad = Mat::Zero(3, 3);
        out.grad(0, 1) = -C * sy;
        out.grad(0, 2) = A * cz;
        out.grad(1, 0) = B * cx;
        out.grad(1, 2) = -A * sz;
        out.grad(2, 0) = -B * sx;
        out.grad(2, 1) = C * cy;
        if (order >= 2) {
            out.hess = Tensor3(3, 3);
            out.hess(0, 1, 1) = -C * cy;
            out.hess(0, 2, 2) = -A * sz;
            out.hess(1, 0, 0) = -B * sx;
            out.hess(1, 2, 2) = -A * cz;
            out.hess(2, 0, 0) = -B * cx;
            out.hess(2, 1, 1) = -C * sy;
        }
        if (order >= 3) {
            out.third = Tensor4(3, 3);
            out.third(0, 1, 1, 1) = C * sy;
            out.third(0, 2, 2, 2) = -A * cz;
            out.third(1, 0, 0, 0) = -B * cx;
            out.third(1, 2, 2, 2) = A * sz;
            out.third(2, 0, 0, 0) = B * sx;
            out.third(2, 1, 1, 1) = -C * cy;
        }
    }
};

// dx/dt = -y, dy/dt = x
class PlanarRotationImpl : public NamedImpl {
public:
    using NamedImpl::NamedImpl;
    SystemKind kind() const override { return SystemKind::FlowAutonomous; }
    int dim() const override { return 2; }
    int analytic_order() const override { return 3; }

    Vec value(const Vec& x, double) const override {
        Vec out(2);
        out << -x[1], x[0];
        return out;
    }
    void fill_analytic(const Vec& x, double, int order, DerivativeTensors& out) const override {
        out.value = value(x, 0);
        out.grad = Mat(2, 2);
        out.grad << 0, -1, 1, 0;
        if (order >= 2) out.hess = Tensor3(2, 2);
        if (order >= 3) out.third = Tensor4(2, 2);
    }
};

// dx/dt = a x - y, dy/dt = x + a y. Exact flow exp(a t) R(t); used as a
// closed-form oracle for the integrator and for a nonzero-divergence case.
class DampedSpiralImpl : public NamedImpl {
public:
    using NamedImpl::NamedImpl;
    SystemKind kind() const override { return SystemKind::FlowAutonomous; }
    int dim() const override { return 2; }
    int analytic_order() const override { return 3; }

    Vec value(const Vec& x, double) const override {
        const double a = p("a");
        Vec out(2);
        out << a * x[0] - x[1], x[0] + a * x[1];
        return out;
    }
    void fill_analytic(const Vec& x, double, int order, DerivativeTensors& out) const override {
        const double a = p("a");
        out.value = value(x, 0);
        out.grad = Mat(2, 2);
        out.grad << a, -1, 1, a;
        if (order >= 2) out.hess = Tensor3(2, 2);
        if (order >= 3) out.third = Tensor4(2, 2);
    }
};

// ---------------------------------------------------------------------------
// Maps
// ---------------------------------------------------------------------------

// Chirikov standard map, state (p, x):
//   p' = p + K sin x
//   x' = x + p'
class StandardMapImpl : public NamedImpl {
public:
    using NamedImpl::NamedImpl;
    SystemKind kind() const override { return SystemKind::Map; }
    int dim() const override { return 2; }
    int analytic_order() const override { return 3; }

    Vec value(const Vec& s, double) const override {
        const double K = p("K");
        const double pn = s[0] + K * sin(s[1]);
        Vec out(2);
        out << pn, s[1] + pn;
        return out;
    }
    void fill_analytic(const Vec& s, double, int order, DerivativeTensors& out) const override {
        const double K = p("K");
        const double cx = cos(s[1]), sx = sin(s[1]);
        out.value = value(s, 0);
        out.grad = Mat(2, 2);
        out.grad << 1, K * cx, 1, 1 + K * cx;
        if (order >= 2) {
            out.hess = Tensor3(2, 2);
            out.hess(0, 1, 1) = -K * sx;
            out.hess(1, 1, 1) = -K * sx;
        }
        if (order >= 3) {
            out.third = Tensor4(2, 2);
            out.third(0, 1, 1, 1) = -K * cx;
            out.third(1, 1, 1, 1) = -K * cx;
        }
    }
};

// x' = 1 - a x^2 + y, y' = b x
class HenonImpl : public NamedImpl {
public:
    using NamedImpl::NamedImpl;
    SystemKind kind() const override { return SystemKind::Map; }
    int dim() const override { return 2; }
    int analytic_order() const override { return 3; }

    Vec value(const Vec& s, double) const override {
        const double a = p("a"), b = p("b");
        Vec out(2);
        out << 1.0 - a * s[0] * s[0] + s[1], b * s[0];
        return out;
    }
    void fill_analytic(const Vec& s, double, int order, DerivativeTensors& out) const override {
        const double a = p("a"), b = p("b");
        out.value = value(s, 0);
        out.grad = Mat(2, 2);
        out.grad << -2 * a * s[0], 1, b, 0;
        if (order >= 2) {
            out.hess = Tensor3(2, 2);
            out.hess(0, 0, 0) = -2 * a;
        }
        if (order >= 3) out.third = Tensor4(2, 2);
    }
};

// ---------------------------------------------------------------------------
// Toroidal fields
// ---------------------------------------------------------------------------

// Helmholtz-style helical harmonic about the axis (R0, 0):
//   zeta = (R - R0) + i Z,  C(a,b) = m!/(m-a-b)! * i^b * zeta^(m-a-b) * e^{-i n phi}
// so that Re C(a,b) = d^{a+b} P / du^a dv^b for P = Re[zeta^m e^{-i n phi}].
struct Harmonic {
    Harmonic(int m_, int n_, double u, double v, double phi) : m(m_), n(n_) {
        E = std::polar(1.0, -n * phi);
        zpow.resize(m + 1);
        zpow[0] = 1.0;
        const std::complex<double> z(u, v);
        for (int k = 1; k <= m; ++k) zpow[k] = zpow[k - 1] * z;
    }

    std::complex<double> C(int a, int b) const {
        const int q = m - a - b;
        if (q < 0) return 0.0;
        double coef = 1.0;
        for (int r = 0; r < a + b; ++r) coef *= m - r;
        static const std::complex<double> ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
        return coef * ipow[b % 4] * zpow[q] * E;
    }

    ScalarJet2 jet_re(int a, int b) const { return jet(a, b, false); }
    ScalarJet2 jet_im(int a, int b) const { return jet(a, b, true); }

    int m, n;
    std::complex<double> E;
    std::vector<std::complex<double>> zpow;

private:
    ScalarJet2 jet(int a, int b, bool imag) const {
        auto part = [imag](std::complex<double> c) { return imag ? c.imag() : c.real(); };
        ScalarJet2 j;
        j.v = part(C(a, b));
        j.g = {part(C(a + 1, b)), part(C(a, b + 1))};
        j.h[0][0] = part(C(a + 2, b));
        j.h[0][1] = j.h[1][0] = part(C(a + 1, b + 1));
        j.h[1][1] = part(C(a, b + 2));
        const double c30 = part(C(a + 3, b));
        const double c21 = part(C(a + 2, b + 1));
        const double c12 = part(C(a + 1, b + 2));
        const double c03 = part(C(a, b + 3));
        for (int jj = 0; jj < 2; ++jj)
            for (int kk = 0; kk < 2; ++kk)
                for (int ll = 0; ll < 2; ++ll) {
                    const int nv = jj + kk + ll;  // number of v-derivatives
                    j.c[jj][kk][ll] = (nv == 0) ? c30 : (nv == 1) ? c21 : (nv == 2) ? c12 : c03;
                }
        return j;
    }
};

// Axisymmetric tokamak-like base field with an optional resonant island term.
// The island is the curl of A_phi e_phi with R A_phi = eps B0 P, so it is
// divergence-free exactly:
//   dB_R = -eps B0 (dP/dZ) / R,  dB_Z = eps B0 (dP/dR) / R,  dB_phi = 0.
// Base field:
//   B_R = -B0 Z / (q R),  B_Z = B0 (R - R0) / (q R),  B_phi = B0 R0 / R,
//   q(r) = q0 + q2 r^2, r^2 = (R - R0)^2 + Z^2.
class ModelToroidalImpl : public ToroidalImpl {
public:
    ModelToroidalImpl(std::string id, std::map<std::string, double> params)
        : id_(std::move(id)), params_(std::move(params)) {}
    const std::string& id() const override { return id_; }
    const std::map<std::string, double>& params() const override { return params_; }
    int analytic_order() const override { return 3; }

    CylJet cyl_jet(double R, double Z, double phi) const override {
        const double B0 = params_.at("B0"), R0 = params_.at("R0");
        const double q0 = params_.at("q0"), q2 = params_.at("q2");
        const ScalarJet2 ju = ScalarJet2::coord(0, R - R0);
        const ScalarJet2 jv = ScalarJet2::coord(1, Z);
        const ScalarJet2 jq = ScalarJet2::constant(q0) + q2 * (ju * ju + jv * jv);
        const ScalarJet2 iR = recip(ScalarJet2::coord(0, R));
        const ScalarJet2 iq = recip(jq);

        CylJet cj;
        cj.BR = (-B0) * (jv * iq * iR);
        cj.BZ = B0 * (ju * iq * iR);
        cj.Bphi = (B0 * R0) * iR;

        const double eps = params_.at("island_eps");
        if (eps != 0.0) {
            const Harmonic H(static_cast<int>(params_.at("island_m")),
                             static_cast<int>(params_.at("island_n")), R - R0, Z, phi);
            cj.BR = cj.BR - (eps * B0) * (H.jet_re(0, 1) * iR);
            cj.BZ = cj.BZ + (eps * B0) * (H.jet_re(1, 0) * iR);
            cj.dphi[0] += -(eps * B0) * H.n * H.C(0, 1).imag() / R;
            cj.dphi[1] += (eps * B0) * H.n * H.C(1, 0).imag() / R;
        }
        return cj;
    }

private:
    std::string id_;
    std::map<std::string, double> params_;
};

// Standalone flux-form harmonic, used as a perturbation direction.
class FluxHarmonicImpl : public ToroidalImpl {
public:
    FluxHarmonicImpl(std::string id, std::map<std::string, double> params)
        : id_(std::move(id)), params_(std::move(params)) {}
    const std::string& id() const override { return id_; }
    const std::map<std::string, double>& params() const override { return params_; }
    int analytic_order() const override { return 3; }

    CylJet cyl_jet(double R, double Z, double phi) const override {
        const double amp = params_.at("amp");
        const Harmonic H(static_cast<int>(params_.at("m")), static_cast<int>(params_.at("n")),
                         R - params_.at("R0"), Z, phi);
        const ScalarJet2 iR = recip(ScalarJet2::coord(0, R));
        CylJet cj;
        cj.BR = (-amp) * (H.jet_re(0, 1) * iR);
        cj.BZ = amp * (H.jet_re(1, 0) * iR);
        cj.dphi[0] = -amp * H.n * H.C(0, 1).imag() / R;
        cj.dphi[1] = amp * H.n * H.C(1, 0).imag() / R;
        return cj;
    }

private:
    std::string id_;
    std::map<std::string, double> params_;
};

// Curl-free harmonic, the gradient of Phi = amp * P. Exercises the Bphi
// variation of the reduced field (dB_phi != 0); not divergence-free.
class PotentialHarmonicImpl : public ToroidalImpl {
public:
    PotentialHarmonicImpl(std::string id, std::map<std::string, double> params)
        : id_(std::move(id)), params_(std::move(params)) {}
    const std::string& id() const override { return id_; }
    const std::map<std::string, double>& params() const override { return params_; }
    int analytic_order() const override { return 3; }

    CylJet cyl_jet(double R, double Z, double phi) const override {
        const double amp = params_.at("amp");
        const int n = static_cast<int>(params_.at("n"));
        const Harmonic H(static_cast<int>(params_.at("m")), n, R - params_.at("R0"), Z, phi);
        const ScalarJet2 iR = recip(ScalarJet2::coord(0, R));
        CylJet cj;
        cj.BR = amp * H.jet_re(1, 0);
        cj.BZ = amp * H.jet_re(0, 1);
        cj.Bphi = (amp * n) * (H.jet_im(0, 0) * iR);
        cj.dphi[0] = amp * n * H.C(1, 0).imag();
        cj.dphi[1] = amp * n * H.C(0, 1).imag();
        cj.dphi[2] = -amp * n * n * H.C(0, 0).real() / R;
        return cj;
    }

private:
    std::string id_;
    std::map<std::string, double> params_;
};

// Constant cylindrical components (e.g. a uniform vertical field).
class ConstantCylImpl : public ToroidalImpl {
public:
    ConstantCylImpl(std::string id, std::map<std::string, double> params, double cR, double cZ,
                    double cphi)
        : id_(std::move(id)), params_(std::move(params)), cR_(cR), cZ_(cZ), cphi_(cphi) {}
    const std::string& id() const override { return id_; }
    const std::map<std::string, double>& params() const override { return params_; }
    int analytic_order() const override { return 3; }

    CylJet cyl_jet(double, double, double) const override {
        CylJet cj;
        cj.BR = ScalarJet2::constant(cR_);
        cj.BZ = ScalarJet2::constant(cZ_);
        cj.Bphi = ScalarJet2::constant(cphi_);
        return cj;
    }

private:
    std::string id_;
    std::map<std::string, double> params_;
    double cR_, cZ_, cphi_;
};

// ---------------------------------------------------------------------------
// Generic perturbation directions for flows and maps
// ---------------------------------------------------------------------------

class ConstantImpl : public NamedImpl {
public:
    ConstantImpl(std::string id, std::map<std::string, double> params, SystemKind kind, Vec c)
        : NamedImpl(std::move(id), std::move(params)), kind_(kind), c_(std::move(c)) {}
    SystemKind kind() const override { return kind_; }
    int dim() const override { return static_cast<int>(c_.size()); }
    int analytic_order() const override { return 3; }
    Vec value(const Vec&, double) const override { return c_; }
    void fill_analytic(const Vec&, double, int order, DerivativeTensors& out) const override {
        const int n = dim();
        out.value = c_;
        out.grad = Mat::Zero(n, n);
        if (order >= 2) out.hess = Tensor3(n, n);
        if (order >= 3) out.third = Tensor4(n, n);
    }

private:
    SystemKind kind_;
    Vec c_;
};

// dB_i = amp * sin(x_{(i+1) mod N}); a smooth perturbation that is nonlinear
// in x at every derivative order.
class CrossSineImpl : public NamedImpl {
public:
    CrossSineImpl(std::string id, std::map<std::string, double> params, SystemKind kind, int n)
        : NamedImpl(std::move(id), std::move(params)), kind_(kind), n_(n) {}
    SystemKind kind() const override { return kind_; }
    int dim() const override { return n_; }
    int analytic_order() const override { return 3; }

    Vec value(const Vec& x, double) const override {
        const double amp = p("amp");
        Vec out(n_);
        for (int i = 0; i < n_; ++i) out[i] = amp * sin(x[(i + 1) % n_]);
        return out;
    }
    void fill_analytic(const Vec& x, double, int order, DerivativeTensors& out) const override {
        const double amp = p("amp");
        out.value = value(x, 0);
        out.grad = Mat::Zero(n_, n_);
        if (order >= 2) out.hess = Tensor3(n_, n_);
        if (order >= 3) out.third = Tensor4(n_, n_);
        for (int i = 0; i < n_; ++i) {
            const int j = (i + 1) % n_;
            out.grad(i, j) = amp * cos(x[j]);
            if (order >= 2) out.hess(i, j, j) = -amp * sin(x[j]);
            if (order >= 3) out.third(i, j, j, j) = -amp * cos(x[j]);
        }
    }

private:
    SystemKind kind_;
    int n_;
};

// Analytic parameter derivatives dB/dparam of the catalog systems.
class AbcParamImpl : public NamedImpl {
public:
    AbcParamImpl(std::string id, int which) : NamedImpl(std::move(id), {}), which_(which) {}
    SystemKind kind() const override { return SystemKind::FlowAutonomous; }
    int dim() const override { return 3; }
    int analytic_order() const override { return 3; }

    Vec value(const Vec& x, double) const override {
        Vec out = Vec::Zero(3);
        switch (which_) {  // d/dA, d/dB, d/dC of the ABC field
            case 0: out << sin(x[2]), cos(x[2]), 0; break;
            case 1: out << 0, sin(x[0]), cos(x[0]); break;
            case 2: out << cos(x[1]), 0, sin(x[1]); break;
        }
        return out;
    }
    void fill_analytic(const Vec& x, double, int order, DerivativeTensors& out) const override {
        out.value = value(x, 0);
        out.grad = Mat::Zero(3, 3);
        if (order >= 2) out.hess = Tensor3(3, 3);
        if (order >= 3) out.third = Tensor4(3, 3);
        // index of the coordinate each row depends on, and the trig phase
        struct Row {
            int comp, coord;
            bool is_sin;
        };
        std::vector<Row> rows;
        switch (which_) {
            case 0: rows = {{0, 2, true}, {1, 2, false}}; break;
            case 1: rows = {{1, 0, true}, {2, 0, false}}; break;
            case 2: rows = {{2, 1, true}, {0, 1, false}}; break;
        }
        for (const auto& r : rows) {
            const double s = sin(x[r.coord]), c = cos(x[r.coord]);
            out.grad(r.comp, r.coord) = r.is_sin ? c : -s;
            if (order >= 2) out.hess(r.comp, r.coord, r.coord) = r.is_sin ? -s : -c;
            if (order >= 3) out.third(r.comp, r.coord, r.coord, r.coord) = r.is_sin ? -c : s;
        }
    }

private:
    int which_;
};

class StandardMapParamK : public NamedImpl {
public:
    explicit StandardMapParamK(std::string id) : NamedImpl(std::move(id), {}) {}
    SystemKind kind() const override { return SystemKind::Map; }
    int dim() const override { return 2; }
    int analytic_order() const override { return 3; }
    Vec value(const Vec& s, double) const override {
        Vec out(2);
        out << sin(s[1]), sin(s[1]);
        return out;
    }
    void fill_analytic(const Vec& s, double, int order, DerivativeTensors& out) const override {
        out.value = value(s, 0);
        out.grad = Mat::Zero(2, 2);
        out.grad(0, 1) = cos(s[1]);
        out.grad(1, 1) = cos(s[1]);
        if (order >= 2) {
            out.hess = Tensor3(2, 2);
            out.hess(0, 1, 1) = -sin(s[1]);
            out.hess(1, 1, 1) = -sin(s[1]);
        }
        if (order >= 3) {
            out.third = Tensor4(2, 2);
            out.third(0, 1, 1, 1) = -cos(s[1]);
            out.third(1, 1, 1, 1) = -cos(s[1]);
        }
    }
};

class HenonParamImpl : public NamedImpl {
public:
    HenonParamImpl(std::string id, bool wrt_a) : NamedImpl(std::move(id), {}), wrt_a_(wrt_a) {}
    SystemKind kind() const override { return SystemKind::Map; }
    int dim() const override { return 2; }
    int analytic_order() const override { return 3; }
    Vec value(const Vec& s, double) const override {
        Vec out(2);
        if (wrt_a_)
            out << -s[0] * s[0], 0;
        else
            out << 0, s[0];
        return out;
    }
    void fill_analytic(const Vec& s, double, int order, DerivativeTensors& out) const override {
        out.value = value(s, 0);
        out.grad = Mat::Zero(2, 2);
        if (wrt_a_)
            out.grad(0, 0) = -2 * s[0];
        else
            out.grad(1, 0) = 1;
        if (order >= 2) {
            out.hess = Tensor3(2, 2);
            if (wrt_a_) out.hess(0, 0, 0) = -2;
        }
        if (order >= 3) out.third = Tensor4(2, 2);
    }

private:
    bool wrt_a_;
};

class SpiralParamA : public NamedImpl {
public:
    explicit SpiralParamA(std::string id) : NamedImpl(std::move(id), {}) {}
    SystemKind kind() const override { return SystemKind::FlowAutonomous; }
    int dim() const override { return 2; }
    int analytic_order() const override { return 3; }
    Vec value(const Vec& x, double) const override { return x; }
    void fill_analytic(const Vec& x, double, int order, DerivativeTensors& out) const override {
        out.value = x;
        out.grad = Mat::Identity(2, 2);
        if (order >= 2) out.hess = Tensor3(2, 2);
        if (order >= 3) out.third = Tensor4(2, 2);
    }
};

std::map<std::string, double> merge_params(const std::string& id,
                                           std::map<std::string, double> defaults,
                                           const std::map<std::string, double>& user) {
    for (const auto& [key, val] : user) {
        auto it = defaults.find(key);
        if (it == defaults.end())
            throw ConfigError(id + ": unknown parameter \"" + key + "\"", key);
        it->second = val;
    }
    return defaults;
}

void validate_island(const std::map<std::string, double>& p, const std::string& id) {
    const double m = p.count("island_m") ? p.at("island_m") : p.at("m");
    const double n = p.count("island_n") ? p.at("island_n") : p.at("n");
    if (m != std::floor(m) || m < 1 || m > 8)
        throw ConfigError(id + ": harmonic m must be an integer in 1..8");
    if (n != std::floor(n) || n < 1 || n > 16)
        throw ConfigError(id + ": harmonic n must be an integer in 1..16");
}

}  // namespace
}  // namespace detail

const std::vector<CatalogEntry>& field_catalog() {
    static const std::vector<CatalogEntry> entries = {
        {"abc", SystemKind::FlowAutonomous, 3, {{"A", 1.0}, {"B", 1.0}, {"C", 1.0}},
         "Arnold-Beltrami-Childress flow (divergence-free, chaotic)"},
        {"planar-rotation", SystemKind::FlowAutonomous, 2, {},
         "rigid rotation dx/dt = (-y, x)"},
        {"damped-spiral", SystemKind::FlowAutonomous, 2, {{"a", 0.1}},
         "linear spiral dx/dt = (a x - y, x + a y) with exact flow exp(a t) R(t)"},
        {"model-toroidal", SystemKind::FlowToroidal, 2,
         {{"R0", 3.0}, {"B0", 1.0}, {"q0", 1.5}, {"q2", 1.0}, {"island_eps", 5e-3},
          {"island_m", 2.0}, {"island_n", 1.0}},
         "axisymmetric tokamak-like field, q(r) = q0 + q2 r^2, with a divergence-free "
         "(m,n) island term"},
        {"standard-map", SystemKind::Map, 2, {{"K", 1.0}},
         "Chirikov standard map, state (p, x): p' = p + K sin x, x' = x + p'"},
        {"henon", SystemKind::Map, 2, {{"a", 1.4}, {"b", 0.3}},
         "Henon map x' = 1 - a x^2 + y, y' = b x"},
    };
    return entries;
}

FieldSystem make_system(const std::string& id, const std::map<std::string, double>& params,
                        DerivativeMode mode) {
    using namespace detail;
    const CatalogEntry* entry = nullptr;
    for (const auto& e : field_catalog())
        if (e.id == id) entry = &e;
    if (!entry) throw ConfigError("unknown system id \"" + id + "\"", id);
    auto merged = merge_params(id, entry->defaults, params);

    std::shared_ptr<const FieldImpl> impl;
    if (id == "abc") impl = std::make_shared<AbcImpl>(id, merged);
    else if (id == "planar-rotation") impl = std::make_shared<PlanarRotationImpl>(id, merged);
    else if (id == "damped-spiral") impl = std::make_shared<DampedSpiralImpl>(id, merged);
    else if (id == "model-toroidal") {
        if (merged.at("island_eps") != 0.0) validate_island(merged, id);
        if (!(merged.at("R0") > 0.0)) throw ConfigError(id + ": R0 must be positive");
        impl = std::make_shared<ModelToroidalImpl>(id, merged);
    } else if (id == "standard-map") impl = std::make_shared<StandardMapImpl>(id, merged);
    else if (id == "henon") impl = std::make_shared<HenonImpl>(id, merged);
    return FieldSystem(impl, mode);
}

const std::vector<PerturbationCatalogEntry>& perturbation_catalog() {
    static const std::vector<PerturbationCatalogEntry> entries = {
        {"zero", "any", {}, "null direction"},
        {"uniform", "any", {{"c0", 0.0}, {"c1", 0.0}, {"c2", 0.0}},
         "constant components; for toroidal systems (dB_R, dB_Z, dB_phi)"},
        {"cross-sine", "flow/map", {{"amp", 1.0}}, "dB_i = amp sin(x_{i+1 mod N})"},
        {"flux-harmonic", "toroidal", {{"m", 1.0}, {"n", 1.0}, {"amp", 1e-2}},
         "divergence-free resonant term from the flux function amp B0-less P_mn"},
        {"potential-harmonic", "toroidal", {{"m", 2.0}, {"n", 1.0}, {"amp", 1e-2}},
         "curl-free grad(amp P_mn), has a nonzero dB_phi"},
        {"vertical-field", "toroidal", {{"amp", 1.0}}, "uniform vertical field (0, amp, 0)"},
        {"param:<name>", "any", {}, "analytic parameter derivative dB/d<name> of the base system"},
    };
    return entries;
}

Perturbation make_perturbation(const FieldSystem& base, const std::string& id,
                               const std::map<std::string, double>& params, double scale) {
    using namespace detail;
    const SystemKind kind = base.kind();
    const int n = base.dim();
    std::shared_ptr<const FieldImpl> impl;

    if (id == "zero") {
        if (!params.empty()) throw ConfigError("zero: takes no parameters");
        if (kind == SystemKind::FlowToroidal)
            impl = std::make_shared<ConstantCylImpl>(id, std::map<std::string, double>{}, 0, 0, 0);
        else
            impl = std::make_shared<ConstantImpl>(id, std::map<std::string, double>{}, kind,
                                                  Vec::Zero(n));
    } else if (id == "uniform") {
        auto merged = merge_params(id, {{"c0", 0.0}, {"c1", 0.0}, {"c2", 0.0}}, params);
        if (kind == SystemKind::FlowToroidal) {
            impl = std::make_shared<ConstantCylImpl>(id, merged, merged.at("c0"), merged.at("c1"),
                                                     merged.at("c2"));
        } else {
            Vec c(n);
            for (int i = 0; i < n; ++i) c[i] = merged.at("c" + std::to_string(i));
            impl = std::make_shared<ConstantImpl>(id, merged, kind, c);
        }
    } else if (id == "cross-sine") {
        if (kind == SystemKind::FlowToroidal)
            throw ConfigError("cross-sine: not defined for toroidal systems");
        auto merged = merge_params(id, {{"amp", 1.0}}, params);
        impl = std::make_shared<CrossSineImpl>(id, merged, kind, n);
    } else if (id == "flux-harmonic" || id == "potential-harmonic") {
        if (kind != SystemKind::FlowToroidal)
            throw ConfigError(id + ": base system is not toroidal");
        std::map<std::string, double> defaults = {
            {"m", 1.0}, {"n", 1.0}, {"amp", 1e-2}, {"R0", base.params().at("R0")}};
        auto merged = merge_params(id, defaults, params);
        validate_island(merged, id);
        if (id == "flux-harmonic")
            impl = std::make_shared<FluxHarmonicImpl>(id, merged);
        else
            impl = std::make_shared<PotentialHarmonicImpl>(id, merged);
    } else if (id == "vertical-field") {
        if (kind != SystemKind::FlowToroidal)
            throw ConfigError("vertical-field: base system is not toroidal");
        auto merged = merge_params(id, {{"amp", 1.0}}, params);
        impl = std::make_shared<ConstantCylImpl>(id, merged, 0.0, merged.at("amp"), 0.0);
    } else if (id.rfind("param:", 0) == 0) {
        if (!params.empty()) throw ConfigError(id + ": takes no parameters");
        const std::string pname = id.substr(6);
        const std::string& sys = base.id();
        if (sys == "abc" && (pname == "A" || pname == "B" || pname == "C"))
            impl = std::make_shared<AbcParamImpl>(id, pname == "A" ? 0 : pname == "B" ? 1 : 2);
        else if (sys == "standard-map" && pname == "K")
            impl = std::make_shared<StandardMapParamK>(id);
        else if (sys == "henon" && (pname == "a" || pname == "b"))
            impl = std::make_shared<HenonParamImpl>(id, pname == "a");
        else if (sys == "damped-spiral" && pname == "a")
            impl = std::make_shared<SpiralParamA>(id);
        else if (sys == "model-toroidal" && pname == "island_eps") {
            std::map<std::string, double> hp = {{"m", base.params().at("island_m")},
                                                {"n", base.params().at("island_n")},
                                                {"amp", 1.0},
                                                {"R0", base.params().at("R0")}};
            impl = std::make_shared<FluxHarmonicImpl>(id, hp);
        } else
            throw ConfigError("no analytic parameter derivative \"" + pname + "\" for system \"" +
                              sys + "\"", pname);
    } else {
        throw ConfigError("unknown perturbation id \"" + id + "\"", id);
    }

    Perturbation pert;
    pert.direction = FieldSystem(impl, base.derivative_mode());
    pert.scale = scale;
    return pert;
}

}  // namespace orbitshift
