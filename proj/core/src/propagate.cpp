#include "orbitshift/propagate.hpp"

#include <algorithm>
#include <cmath>

namespace orbitshift {

namespace {

// Dormand-Prince 5(4) tableau
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// dense-output coefficients
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

double error_norm(const Vec& err, const Vec& y0, const Vec& y1, const Tolerances& tol) {
    double sum = 0;
    const int n = static_cast<int>(err.size());
    for (int i = 0; i < n; ++i) {
        const double sc = tol.abs + tol.rel * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double q = err[i] / sc;
        sum += q * q;
    }
    return std::sqrt(sum / n);
}

double initial_step(const OdeRhs& rhs, double t0, const Vec& y0, const Vec& f0, double dir,
                    double span, const Tolerances& tol) {
    const int n = static_cast<int>(y0.size());
    double d0 = 0, dd1 = 0;
    for (int i = 0; i < n; ++i) {
        const double sc = tol.abs + tol.rel * std::abs(y0[i]);
        d0 += (y0[i] / sc) * (y0[i] / sc);
        dd1 += (f0[i] / sc) * (f0[i] / sc);
    }
    d0 = std::sqrt(d0 / n);
    dd1 = std::sqrt(dd1 / n);
    double h0 = (d0 < 1e-5 || dd1 < 1e-5) ? 1e-6 : 0.01 * d0 / dd1;
    h0 = std::min(h0, span);
    Vec y1 = y0 + dir * h0 * f0;
    Vec f1(n);
    rhs(t0 + dir * h0, y1, f1);
    double d2 = 0;
    for (int i = 0; i < n; ++i) {
        const double sc = tol.abs + tol.rel * std::abs(y0[i]);
        const double q = (f1[i] - f0[i]) / sc;
        d2 += q * q;
    }
    d2 = std::sqrt(d2 / n) / h0;
    double h1;
    if (std::max(dd1, d2) <= 1e-15)
        h1 = std::max(1e-6, h0 * 1e-3);
    else
        h1 = std::pow(0.01 / std::max(dd1, d2), 0.2);
    return std::min({100 * h0, h1, span});
}

}  // namespace

Trajectory::Trajectory(std::vector<double> times, std::vector<Vec> states,
                       std::vector<DenseSegment> segments)
    : times_(std::move(times)), states_(std::move(states)), segments_(std::move(segments)) {}

Vec Trajectory::at(double t) const {
    if (times_.empty()) throw std::out_of_range("Trajectory::at: empty trajectory");
    const bool fwd = times_.back() >= times_.front();
    const double lo = fwd ? times_.front() : times_.back();
    const double hi = fwd ? times_.back() : times_.front();
    const double slack = 1e-9 * (1.0 + std::abs(lo) + std::abs(hi));
    if (t < lo - slack || t > hi + slack)
        throw std::out_of_range("Trajectory::at: t outside the integration span");
    if (segments_.empty()) {
        // sample-only trajectory: exact node lookup
        for (size_t i = 0; i < times_.size(); ++i)
            if (std::abs(times_[i] - t) <= slack) return states_[i];
        throw std::out_of_range("Trajectory::at: no interpolant and t is not a sample node");
    }
    // locate the segment containing t
    size_t idx;
    if (fwd) {
        idx = std::upper_bound(times_.begin(), times_.end(), t) - times_.begin();
    } else {
        idx = std::upper_bound(times_.begin(), times_.end(), t, std::greater<>()) - times_.begin();
    }
    idx = std::clamp<size_t>(idx, 1, segments_.size()) - 1;
    const DenseSegment& s = segments_[idx];
    const double th = (t - s.t0) / s.h;
    const double th1 = 1.0 - th;
    return s.c[0] + th * (s.c[1] + th1 * (s.c[2] + th * (s.c[3] + th1 * s.c[4])));
}

Trajectory integrate_ode(const OdeRhs& rhs, const Vec& y0, double t0, double t1,
                         const IntegratorOptions& opts) {
    if (!(opts.tol.rel > 0) || !(opts.tol.abs > 0))
        throw std::invalid_argument("integrate_ode: tolerances must be positive");
    const int n = static_cast<int>(y0.size());
    std::vector<double> times{t0};
    std::vector<Vec> states{y0};
    std::vector<Trajectory::DenseSegment> segs;

    if (t1 == t0) return Trajectory(std::move(times), std::move(states));

    const double dir = (t1 > t0) ? 1.0 : -1.0;
    const double span = std::abs(t1 - t0);

    Vec y = y0, k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), yt(n), y1v(n), err(n);
    double t = t0;
    rhs(t, y, k1);
    double h = (opts.h_init > 0) ? std::min(opts.h_init, span)
                                 : initial_step(rhs, t0, y0, k1, dir, span, opts.tol);
    bool rejected = false;

    for (long step = 0; step < opts.max_steps; ++step) {
        if (std::abs(t - t1) <= 1e-14 * std::max(1.0, std::abs(t1))) break;
        h = std::min(h, std::abs(t1 - t));
        const double hmin = 1e-14 * std::max({1.0, std::abs(t0), std::abs(t1)});
        if (h < hmin) throw IntegrationError("integrate_ode: step size collapse");
        const double hs = dir * h;

        yt = y + hs * (a21 * k1);
        rhs(t + c2 * hs, yt, k2);
        yt = y + hs * (a31 * k1 + a32 * k2);
        rhs(t + c3 * hs, yt, k3);
        yt = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
        rhs(t + c4 * hs, yt, k4);
        yt = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        rhs(t + c5 * hs, yt, k5);
        yt = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        rhs(t + hs, yt, k6);
        y1v = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        rhs(t + hs, y1v, k7);
        err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double enorm = error_norm(err, y, y1v, opts.tol);

        if (enorm <= 1.0) {
            Trajectory::DenseSegment s;
            s.t0 = t;
            s.h = hs;
            s.c[0] = y;
            s.c[1] = y1v - y;
            s.c[2] = hs * k1 - s.c[1];
            s.c[3] = s.c[1] - hs * k7 - s.c[2];
            s.c[4] = hs * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
            segs.push_back(std::move(s));

            t += hs;
            y = y1v;
            k1 = k7;  // FSAL
            times.push_back(t);
            states.push_back(y);
            if (!y.allFinite()) throw IntegrationError("integrate_ode: non-finite state");

            const double fac =
                std::min(rejected ? 1.0 : 5.0,
                         std::max(0.2, 0.9 * std::pow(std::max(enorm, 1e-32), -0.2)));
            h *= fac;
            rejected = false;
        } else {
            h *= std::max(0.2, 0.9 * std::pow(enorm, -0.2));
            rejected = true;
        }
    }
    if (std::abs(t - t1) > 1e-12 * std::max(1.0, std::abs(t1)))
        throw IntegrationError("integrate_ode: max step count exceeded");
    // pin the terminal node to t1 exactly
    times.back() = t1;
    return Trajectory(std::move(times), std::move(states), std::move(segs));
}

Vec rk4_integrate(const OdeRhs& rhs, Vec y, double t0, double t1, long n_steps) {
    const double h = (t1 - t0) / static_cast<double>(n_steps);
    const int n = static_cast<int>(y.size());
    Vec k1(n), k2(n), k3(n), k4(n);
    double t = t0;
    for (long i = 0; i < n_steps; ++i) {
        rhs(t, y, k1);
        rhs(t + h / 2, y + (h / 2) * k1, k2);
        rhs(t + h / 2, y + (h / 2) * k2, k3);
        rhs(t + h, y + h * k3, k4);
        y += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
        t = t0 + (i + 1) * h;
    }
    return y;
}

Trajectory integrate_flow(const FieldSystem& system, const Vec& x0, double t0, double t1,
                          const IntegratorOptions& opts) {
    if (system.kind() == SystemKind::Map)
        throw std::invalid_argument("integrate_flow: system is a map; use iterate_map");
    auto rhs = [&system](double t, const Vec& y, Vec& dy) { dy = system.eval(y, t); };
    return integrate_ode(rhs, x0, t0, t1, opts);
}

namespace {

struct Layout {
    int n = 0, order = 0;
    int size() const { return n + n * n + order * n; }
    int off_x() const { return 0; }
    int off_jac() const { return n; }
    int off_var(int j) const { return n + n * n + (j - 1) * n; }
};

// d/dt of the augmented state [x | DX | v1 | v2 | v3]. The map recursions use
// the same expressions read as next-iterate values instead of derivatives.
void variation_terms(const FieldSystem& sys, const FieldSystem& dir, const Layout& L, double t,
                     const Vec& y, Vec& out) {
    const int n = L.n;
    const Vec x = y.segment(L.off_x(), n);
    const DerivativeTensors d = sys.derivatives(x, std::max(1, L.order), t);
    Eigen::Map<const Mat> J(y.data() + L.off_jac(), n, n);

    out.resize(L.size());
    out.segment(L.off_x(), n) = d.value;
    Eigen::Map<Mat> dJ(out.data() + L.off_jac(), n, n);
    dJ = d.grad * J;
    if (L.order >= 1) {
        const PerturbationJet pj = perturbation_jet(sys, dir, x, t, L.order);
        const Vec v1 = y.segment(L.off_var(1), n);
        out.segment(L.off_var(1), n) = pj.delta + d.grad * v1;
        if (L.order >= 2) {
            const Vec v2 = y.segment(L.off_var(2), n);
            out.segment(L.off_var(2), n) =
                pj.delta2 + 2.0 * (pj.grad * v1) + d.hess.bilinear(v1, v1) + d.grad * v2;
            if (L.order >= 3) {
                const Vec v3 = y.segment(L.off_var(3), n);
                out.segment(L.off_var(3), n) = 3.0 * (pj.grad * v2) +
                                               3.0 * pj.hess.bilinear(v1, v1) +
                                               3.0 * d.hess.bilinear(v1, v2) +
                                               d.third.trilinear(v1, v1, v1) + d.grad * v3;
            }
        }
    }
}

Vec augmented_initial(const Layout& L, const Vec& x0) {
    Vec y0 = Vec::Zero(L.size());
    y0.segment(0, L.n) = x0;
    Eigen::Map<Mat>(y0.data() + L.off_jac(), L.n, L.n) = Mat::Identity(L.n, L.n);
    return y0;
}

void check_order_supported(const FieldSystem& sys, const Perturbation& pert, int order) {
    if (order < 0 || order > 3)
        throw std::invalid_argument("variation order must be in 0..3");
    if (order >= 1 && !pert.direction.valid())
        throw std::invalid_argument("variation order >= 1 requires a perturbation direction");
    if (order >= 1 && (pert.direction.kind() != sys.kind() || pert.direction.dim() != sys.dim()))
        throw std::invalid_argument("perturbation direction does not match the system");
}

}  // namespace

VariationBundle::VariationBundle(FieldSystem system, int order, Trajectory augmented)
    : system_(std::move(system)), order_(order), is_map_(false), aug_(std::move(augmented)) {
    dim_ = system_.dim();
}

VariationBundle::VariationBundle(FieldSystem system, int order, std::vector<Vec> states)
    : system_(std::move(system)), order_(order), is_map_(true), map_states_(std::move(states)) {
    dim_ = system_.dim();
    map_grid_.resize(map_states_.size());
    for (size_t i = 0; i < map_grid_.size(); ++i) map_grid_[i] = static_cast<double>(i);
}

const std::vector<double>& VariationBundle::grid() const {
    return is_map_ ? map_grid_ : aug_.times();
}

Vec VariationBundle::slice(const Vec& y, int block) const {
    const Layout L{dim_, order_};
    if (block == 0) return y.segment(0, dim_);
    return y.segment(L.off_var(block), dim_);
}

Vec VariationBundle::state(double t) const {
    if (is_map_) {
        const auto i = static_cast<size_t>(std::llround(t));
        return map_states_.at(i).segment(0, dim_);
    }
    return aug_.at(t).segment(0, dim_);
}

Mat VariationBundle::jacobian(double t) const {
    const Layout L{dim_, order_};
    const Vec y = is_map_ ? map_states_.at(static_cast<size_t>(std::llround(t))) : aug_.at(t);
    return Eigen::Map<const Mat>(y.data() + L.off_jac(), dim_, dim_);
}

Vec VariationBundle::variation(int j, double t) const {
    if (j < 1 || j > order_)
        throw std::invalid_argument("VariationBundle::variation: order not computed");
    const Vec y = is_map_ ? map_states_.at(static_cast<size_t>(std::llround(t))) : aug_.at(t);
    return slice(y, j);
}

Trajectory VariationBundle::base() const { return taylor_shift(0.0, 0); }

Trajectory VariationBundle::taylor_shift(double k, int order) const {
    if (order < 0 || order > order_)
        throw std::invalid_argument("taylor_shift: requested order exceeds the bundle order");
    const Layout L{dim_, order_};
    double w[4] = {1.0, 0.0, 0.0, 0.0};  // weights of [x, v1, v2, v3]
    double f = 1.0;
    for (int j = 1; j <= order; ++j) {
        f *= j;
        w[j] = std::pow(k, j) / f;
    }
    auto combine = [&](const Vec& y) {
        Vec out = y.segment(0, dim_);
        for (int j = 1; j <= order; ++j)
            if (w[j] != 0.0) out += w[j] * y.segment(L.off_var(j), dim_);
        return out;
    };

    if (is_map_) {
        std::vector<Vec> states;
        states.reserve(map_states_.size());
        for (const auto& y : map_states_) states.push_back(combine(y));
        return Trajectory(map_grid_, std::move(states));
    }
    std::vector<Vec> states;
    states.reserve(aug_.states().size());
    for (const auto& y : aug_.states()) states.push_back(combine(y));
    std::vector<Trajectory::DenseSegment> segs;
    segs.reserve(aug_.segments().size());
    for (const auto& s : aug_.segments()) {
        Trajectory::DenseSegment o;
        o.t0 = s.t0;
        o.h = s.h;
        for (int q = 0; q < 5; ++q) o.c[q] = combine(s.c[q]);
        segs.push_back(std::move(o));
    }
    return Trajectory(aug_.times(), std::move(states), std::move(segs));
}

Trajectory taylor_shift(const VariationBundle& bundle, double k, int order) {
    return bundle.taylor_shift(k, order);
}

VariationBundle integrate_variations(const FieldSystem& system, const Vec& x0, double t0,
                                     double t1, const Perturbation& pert, int order,
                                     const IntegratorOptions& opts) {
    if (system.kind() == SystemKind::Map)
        throw std::invalid_argument("integrate_variations: system is a map; use iterate_map");
    check_order_supported(system, pert, order);
    const Layout L{system.dim(), order};
    const FieldSystem dir = pert.direction;
    auto rhs = [&system, &dir, L](double t, const Vec& y, Vec& dy) {
        variation_terms(system, dir, L, t, y, dy);
    };
    Trajectory traj = integrate_ode(rhs, augmented_initial(L, x0), t0, t1, opts);
    return VariationBundle(system, order, std::move(traj));
}

VariationBundle iterate_map(const FieldSystem& system, const Vec& x0, long n,
                            const Perturbation& pert, int order) {
    if (system.kind() != SystemKind::Map)
        throw std::invalid_argument("iterate_map: system is not a map");
    if (n < 0) throw std::invalid_argument("iterate_map: n must be >= 0");
    check_order_supported(system, pert, order);
    const Layout L{system.dim(), order};
    std::vector<Vec> states;
    states.reserve(n + 1);
    states.push_back(augmented_initial(L, x0));
    Vec next;
    for (long i = 0; i < n; ++i) {
        variation_terms(system, pert.direction, L, static_cast<double>(i), states.back(), next);
        if (!next.allFinite()) throw IntegrationError("iterate_map: non-finite iterate");
        states.push_back(next);
    }
    return VariationBundle(system, order, std::move(states));
}

}  // namespace orbitshift
