#include "orbitshift/fields.hpp"

#include <cmath>
#include <cstdio>

#include "field_impl.hpp"

namespace orbitshift {

namespace detail {

const std::map<std::string, double>& FieldImpl::params() const {
    static const std::map<std::string, double> empty;
    return empty;
}

void FieldImpl::fill_analytic(const Vec&, double, int, DerivativeTensors&) const {
    throw MissingDerivativeError(id() + ": no analytic derivatives");
}

CylJet FieldImpl::cyl_jet(double, double, double) const {
    throw DomainError(id() + ": not a toroidal system");
}

void check_toroidal_domain(double R, double bphi, const std::string& id) {
    if (!(R > 0.0)) throw DomainError(id + ": R <= 0");
    if (std::abs(bphi) < 1e-10) throw DomainError(id + ": Bphi vanishes, field tangent to section");
}

void reduce_toroidal(const CylJet& cj, double R, int order, DerivativeTensors& out) {
    const ScalarJet2 Rj = ScalarJet2::coord(0, R);
    const ScalarJet2 iw = recip(cj.Bphi);
    const ScalarJet2 f0 = Rj * cj.BR * iw;
    const ScalarJet2 f1 = Rj * cj.BZ * iw;
    const ScalarJet2* f[2] = {&f0, &f1};

    out.value = Vec(2);
    out.value << f0.v, f1.v;
    out.order = order;
    if (order >= 1) {
        out.grad = Mat(2, 2);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) out.grad(i, j) = f[i]->g[j];
    }
    if (order >= 2) {
        out.hess = Tensor3(2, 2);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k) out.hess(i, j, k) = f[i]->h[j][k];
    }
    if (order >= 3) {
        out.third = Tensor4(2, 2);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k)
                    for (int l = 0; l < 2; ++l) out.third(i, j, k, l) = f[i]->c[j][k][l];
    }
}

Vec ToroidalImpl::value(const Vec& x, double t) const {
    const CylJet cj = cyl_jet(x[0], x[1], t);
    check_toroidal_domain(x[0], cj.Bphi.v, id());
    Vec out(2);
    out << x[0] * cj.BR.v / cj.Bphi.v, x[0] * cj.BZ.v / cj.Bphi.v;
    return out;
}

void ToroidalImpl::fill_analytic(const Vec& x, double t, int order,
                                 DerivativeTensors& out) const {
    const CylJet cj = cyl_jet(x[0], x[1], t);
    check_toroidal_domain(x[0], cj.Bphi.v, id());
    reduce_toroidal(cj, x[0], order, out);
}

namespace {

// Perturbed backend: base + k * direction, combined before any reduction.
class PerturbedImpl : public FieldImpl {
public:
    PerturbedImpl(std::shared_ptr<const FieldImpl> base,
                  std::shared_ptr<const FieldImpl> dir, double k)
        : base_(std::move(base)), dir_(std::move(dir)), k_(k) {
        char kbuf[32];
        std::snprintf(kbuf, sizeof(kbuf), "%.6g", k);
        id_ = base_->id() + "+" + kbuf + "*" + dir_->id();
    }

    SystemKind kind() const override { return base_->kind(); }
    int dim() const override { return base_->dim(); }
    int analytic_order() const override {
        return std::min(base_->analytic_order(), dir_->analytic_order());
    }
    const std::string& id() const override { return id_; }
    const std::map<std::string, double>& params() const override { return base_->params(); }

    Vec value(const Vec& x, double t) const override {
        if (kind() == SystemKind::FlowToroidal) {
            const CylJet cj = cyl_jet(x[0], x[1], t);
            check_toroidal_domain(x[0], cj.Bphi.v, id_);
            Vec out(2);
            out << x[0] * cj.BR.v / cj.Bphi.v, x[0] * cj.BZ.v / cj.Bphi.v;
            return out;
        }
        return base_->value(x, t) + k_ * dir_->value(x, t);
    }

    void fill_analytic(const Vec& x, double t, int order, DerivativeTensors& out) const override {
        if (kind() == SystemKind::FlowToroidal) {
            const CylJet cj = cyl_jet(x[0], x[1], t);
            check_toroidal_domain(x[0], cj.Bphi.v, id_);
            reduce_toroidal(cj, x[0], order, out);
            return;
        }
        base_->fill_analytic(x, t, order, out);
        DerivativeTensors d;
        dir_->fill_analytic(x, t, order, d);
        out.value += k_ * d.value;
        if (order >= 1) out.grad += k_ * d.grad;
        if (order >= 2) {
            d.hess *= k_;
            out.hess += d.hess;
        }
        if (order >= 3) {
            d.third *= k_;
            out.third += d.third;
        }
    }

    CylJet cyl_jet(double R, double Z, double phi) const override {
        CylJet a = base_->cyl_jet(R, Z, phi);
        const CylJet b = dir_->cyl_jet(R, Z, phi);
        a.BR = a.BR + k_ * b.BR;
        a.BZ = a.BZ + k_ * b.BZ;
        a.Bphi = a.Bphi + k_ * b.Bphi;
        a.dphi += k_ * b.dphi;
        return a;
    }

private:
    std::shared_ptr<const FieldImpl> base_, dir_;
    double k_;
    std::string id_;
};

// 3-D Cartesian view of a toroidal backend: dx/dt = B(x).
class CartesianEmbedImpl : public FieldImpl {
public:
    explicit CartesianEmbedImpl(std::shared_ptr<const FieldImpl> tor)
        : tor_(std::move(tor)), id_(tor_->id() + ":3d") {}

    SystemKind kind() const override { return SystemKind::FlowAutonomous; }
    int dim() const override { return 3; }
    int analytic_order() const override { return 1; }
    const std::string& id() const override { return id_; }
    const std::map<std::string, double>& params() const override { return tor_->params(); }

    Vec value(const Vec& x, double) const override {
        double R, phi, c, s;
        split(x, R, phi, c, s);
        const CylJet cj = tor_->cyl_jet(R, x[2], phi);
        Vec out(3);
        out << c * cj.BR.v - s * cj.Bphi.v, s * cj.BR.v + c * cj.Bphi.v, cj.BZ.v;
        return out;
    }

    void fill_analytic(const Vec& x, double, int order, DerivativeTensors& out) const override {
        if (order > 1) throw MissingDerivativeError(id_ + ": analytic order 1 only");
        double R, phi, c, s;
        split(x, R, phi, c, s);
        const CylJet cj = tor_->cyl_jet(R, x[2], phi);

        const Eigen::Vector3d W(cj.BR.v, cj.BZ.v, cj.Bphi.v);
        const Eigen::Vector3d WR(cj.BR.g[0], cj.BZ.g[0], cj.Bphi.g[0]);
        const Eigen::Vector3d WZ(cj.BR.g[1], cj.BZ.g[1], cj.Bphi.g[1]);
        const Eigen::Vector3d& Wp = cj.dphi;

        Eigen::Matrix3d M;  // (BR,BZ,Bphi) -> (Bx,By,Bz)
        M << c, 0, -s, s, 0, c, 0, 1, 0;
        Eigen::Matrix3d Mp;  // dM/dphi
        Mp << -s, 0, -c, c, 0, -s, 0, 0, 0;

        const Eigen::RowVector3d gR(c, s, 0);
        const Eigen::RowVector3d gZ(0, 0, 1);
        const Eigen::RowVector3d gphi(-s / R, c / R, 0);

        out.value = M * W;
        out.grad = M * (WR * gR + WZ * gZ + Wp * gphi) + (Mp * W) * gphi;
        out.order = 1;
    }

private:
    static void split(const Vec& x, double& R, double& phi, double& c, double& s) {
        R = std::hypot(x[0], x[1]);
        if (!(R > 0.0)) throw DomainError("cartesian embedding: R = 0");
        phi = std::atan2(x[1], x[0]);
        c = x[0] / R;
        s = x[1] / R;
    }

    std::shared_ptr<const FieldImpl> tor_;
    std::string id_;
};

void check_point(const FieldSystem& sys, const Vec& x) {
    if (x.size() != sys.dim())
        throw DomainError(sys.id() + ": point dimension " + std::to_string(x.size()) +
                          " != " + std::to_string(sys.dim()));
    if (!x.allFinite()) throw DomainError(sys.id() + ": non-finite point");
    if (sys.kind() == SystemKind::FlowToroidal && !(x[0] > 0.0))
        throw DomainError(sys.id() + ": R <= 0");
}

// Central finite-difference stencils on the field value.
constexpr double kFdStepGrad = 1e-6;
constexpr double kFdStepHess = 1e-4;
constexpr double kFdStepThird = 1e-3;

double fd_step(double base, double coord) { return base * std::max(1.0, std::abs(coord)); }

Vec shifted_eval(const FieldSystem& sys, Vec x, double t,
                 std::initializer_list<std::pair<int, double>> shifts) {
    for (auto [axis, d] : shifts) x[axis] += d;
    return sys.eval(x, t);
}

void fill_fd(const FieldSystem& sys, const Vec& x, double t, int from, int order,
             DerivativeTensors& out) {
    const int n = sys.dim();
    if (from <= 1 && order >= 1) {
        out.grad = Mat(n, n);
        for (int j = 0; j < n; ++j) {
            const double h = fd_step(kFdStepGrad, x[j]);
            out.grad.col(j) =
                (shifted_eval(sys, x, t, {{j, h}}) - shifted_eval(sys, x, t, {{j, -h}})) / (2 * h);
        }
    }
    if (from <= 2 && order >= 2) {
        out.hess = Tensor3(n, n);
        const Vec f0 = sys.eval(x, t);
        for (int j = 0; j < n; ++j) {
            const double hj = fd_step(kFdStepHess, x[j]);
            const Vec d2 = (shifted_eval(sys, x, t, {{j, hj}}) - 2 * f0 +
                            shifted_eval(sys, x, t, {{j, -hj}})) /
                           (hj * hj);
            for (int i = 0; i < n; ++i) out.hess(i, j, j) = d2[i];
            for (int k = j + 1; k < n; ++k) {
                const double hk = fd_step(kFdStepHess, x[k]);
                const Vec m = (shifted_eval(sys, x, t, {{j, hj}, {k, hk}}) -
                               shifted_eval(sys, x, t, {{j, hj}, {k, -hk}}) -
                               shifted_eval(sys, x, t, {{j, -hj}, {k, hk}}) +
                               shifted_eval(sys, x, t, {{j, -hj}, {k, -hk}})) /
                              (4 * hj * hk);
                for (int i = 0; i < n; ++i) {
                    out.hess(i, j, k) = m[i];
                    out.hess(i, k, j) = m[i];
                }
            }
        }
    }
    if (from <= 3 && order >= 3) {
        out.third = Tensor4(n, n);
        for (int j = 0; j < n; ++j)
            for (int k = j; k < n; ++k)
                for (int l = k; l < n; ++l) {
                    const double hj = fd_step(kFdStepThird, x[j]);
                    const double hk = fd_step(kFdStepThird, x[k]);
                    const double hl = fd_step(kFdStepThird, x[l]);
                    Vec d;
                    if (j == k && k == l) {
                        d = (shifted_eval(sys, x, t, {{j, 2 * hj}}) -
                             2 * shifted_eval(sys, x, t, {{j, hj}}) +
                             2 * shifted_eval(sys, x, t, {{j, -hj}}) -
                             shifted_eval(sys, x, t, {{j, -2 * hj}})) /
                            (2 * hj * hj * hj);
                    } else if (j == k) {  // d^2/dx_j^2 d/dx_l
                        auto second = [&](double dl) -> Vec {
                            return (shifted_eval(sys, x, t, {{j, hj}, {l, dl}}) -
                                    2 * shifted_eval(sys, x, t, {{l, dl}}) +
                                    shifted_eval(sys, x, t, {{j, -hj}, {l, dl}})) /
                                   (hj * hj);
                        };
                        d = (second(hl) - second(-hl)) / (2 * hl);
                    } else if (k == l) {  // d/dx_j d^2/dx_k^2
                        auto second = [&](double dj) -> Vec {
                            return (shifted_eval(sys, x, t, {{k, hk}, {j, dj}}) -
                                    2 * shifted_eval(sys, x, t, {{j, dj}}) +
                                    shifted_eval(sys, x, t, {{k, -hk}, {j, dj}})) /
                                   (hk * hk);
                        };
                        d = (second(hj) - second(-hj)) / (2 * hj);
                    } else {
                        d = Vec::Zero(n);
                        for (int sj = -1; sj <= 1; sj += 2)
                            for (int sk = -1; sk <= 1; sk += 2)
                                for (int sl = -1; sl <= 1; sl += 2)
                                    d += (sj * sk * sl) *
                                         shifted_eval(sys, x, t,
                                                      {{j, sj * hj}, {k, sk * hk}, {l, sl * hl}});
                        d /= 8 * hj * hk * hl;
                    }
                    // symmetrize over all permutations of (j,k,l)
                    for (int i = 0; i < n; ++i) {
                        out.third(i, j, k, l) = d[i];
                        out.third(i, j, l, k) = d[i];
                        out.third(i, k, j, l) = d[i];
                        out.third(i, k, l, j) = d[i];
                        out.third(i, l, j, k) = d[i];
                        out.third(i, l, k, j) = d[i];
                    }
                }
    }
}

}  // namespace
}  // namespace detail

FieldSystem::FieldSystem(std::shared_ptr<const detail::FieldImpl> impl, DerivativeMode mode)
    : impl_(std::move(impl)), mode_(mode) {}

SystemKind FieldSystem::kind() const { return impl_->kind(); }
int FieldSystem::dim() const { return impl_->dim(); }
int FieldSystem::analytic_order() const { return impl_->analytic_order(); }
const std::string& FieldSystem::id() const { return impl_->id(); }
const std::map<std::string, double>& FieldSystem::params() const { return impl_->params(); }

Vec FieldSystem::eval(const Vec& x, double t) const {
    detail::check_point(*this, x);
    Vec v = impl_->value(x, t);
    if (!v.allFinite()) throw DomainError(id() + ": non-finite field value");
    return v;
}

DerivativeTensors FieldSystem::derivatives(const Vec& x, int order, double t) const {
    detail::check_point(*this, x);
    if (order < 1 || order > 3)
        throw MissingDerivativeError(id() + ": derivative order must be 1..3");
    DerivativeTensors out;
    const int analytic_upto =
        (mode_ == DerivativeMode::Analytic) ? std::min(order, impl_->analytic_order()) : 0;
    if (analytic_upto > 0) {
        impl_->fill_analytic(x, t, analytic_upto, out);
    } else {
        out.value = impl_->value(x, t);
    }
    if (analytic_upto < order) detail::fill_fd(*this, x, t, analytic_upto + 1, order, out);
    out.order = order;
    return out;
}

Eigen::Vector3d FieldSystem::cylindrical_field(double R, double Z, double phi) const {
    if (kind() != SystemKind::FlowToroidal)
        throw DomainError(id() + ": cylindrical components only exist for toroidal systems");
    if (!(R > 0.0)) throw DomainError(id() + ": R <= 0");
    const detail::CylJet cj = impl_->cyl_jet(R, Z, phi);
    return {cj.BR.v, cj.BZ.v, cj.Bphi.v};
}

FieldSystem perturbed(const FieldSystem& base, const FieldSystem& direction, double k) {
    if (!direction.valid()) throw DomainError("perturbed: empty direction");
    if (direction.kind() != base.kind() || direction.dim() != base.dim())
        throw DomainError("perturbed: direction kind/dim does not match the base system");
    return FieldSystem(std::make_shared<detail::PerturbedImpl>(base.impl(), direction.impl(), k),
                       base.derivative_mode());
}

FieldSystem perturbed(const FieldSystem& base, const Perturbation& pert) {
    return perturbed(base, pert.direction, pert.scale);
}

FieldSystem embed_cartesian(const FieldSystem& toroidal) {
    if (toroidal.kind() != SystemKind::FlowToroidal)
        throw DomainError("embed_cartesian: expected a toroidal system");
    return FieldSystem(std::make_shared<detail::CartesianEmbedImpl>(toroidal.impl()),
                       toroidal.derivative_mode());
}

PerturbationJet perturbation_jet(const FieldSystem& base, const FieldSystem& direction,
                                 const Vec& x, double t, int order) {
    if (direction.kind() != base.kind() || direction.dim() != base.dim())
        throw DomainError("perturbation_jet: direction does not match the base system");
    detail::check_point(base, x);
    PerturbationJet out;
    out.order = order;
    const int n = base.dim();

    if (base.kind() != SystemKind::FlowToroidal) {
        out.delta2 = Vec::Zero(n);
        if (order <= 1) {
            out.delta = direction.eval(x, t);
        } else {
            const DerivativeTensors d = direction.derivatives(x, order - 1, t);
            out.delta = d.value;
            out.grad = d.grad;
            if (order >= 3) out.hess = d.hess;
        }
        return out;
    }

    // Toroidal: first and second k-derivatives of R*(Bpol + k*dBpol)/(Bphi + k*dBphi)
    // at k = 0, with the spatial gradient of the first one.
    if (order > 2)
        throw MissingDerivativeError(
            "toroidal variations are supported to second order; the reduction is nonlinear "
            "in the field and no third k-derivative jet is provided");
    using detail::ScalarJet2;
    const detail::CylJet b = base.impl()->cyl_jet(x[0], x[1], t);
    const detail::CylJet d = direction.impl()->cyl_jet(x[0], x[1], t);
    detail::check_toroidal_domain(x[0], b.Bphi.v, base.id());

    const ScalarJet2 Rj = ScalarJet2::coord(0, x[0]);
    const ScalarJet2 iw = recip(b.Bphi);
    const ScalarJet2 iw2 = iw * iw;
    const ScalarJet2 u[2] = {b.BR, b.BZ};
    const ScalarJet2 du[2] = {d.BR, d.BZ};

    out.delta = Vec(2);
    out.delta2 = Vec(2);
    if (order >= 2) out.grad = Mat(2, 2);
    for (int i = 0; i < 2; ++i) {
        const ScalarJet2 dfi = Rj * du[i] * iw - Rj * u[i] * d.Bphi * iw2;
        out.delta[i] = dfi.v;
        if (order >= 2) {
            out.grad(i, 0) = dfi.g[0];
            out.grad(i, 1) = dfi.g[1];
        }
        const ScalarJet2 d2fi =
            2.0 * (Rj * u[i] * d.Bphi * d.Bphi * iw2 * iw) - 2.0 * (Rj * du[i] * d.Bphi * iw2);
        out.delta2[i] = d2fi.v;
    }
    return out;
}

Vec delta_reduced_field(const FieldSystem& system, const Perturbation& pert, const Vec& x,
                        double phi) {
    if (system.kind() != SystemKind::FlowToroidal)
        throw DomainError("delta_reduced_field: expected a toroidal system");
    return perturbation_jet(system, pert.direction, x, phi, 1).delta;
}

double divergence(const FieldSystem& system, const Vec& x, double t) {
    switch (system.kind()) {
        case SystemKind::FlowAutonomous:
            return system.derivatives(x, 1, t).grad.trace();
        case SystemKind::FlowToroidal: {
            detail::check_point(system, x);
            const detail::CylJet cj = system.impl()->cyl_jet(x[0], x[1], t);
            const double R = x[0];
            return cj.BR.g[0] + cj.BR.v / R + cj.BZ.g[1] + cj.dphi[2] / R;
        }
        case SystemKind::Map:
            throw DomainError("divergence: not defined for maps");
    }
    throw DomainError("divergence: unknown kind");
}

}  // namespace orbitshift
