#include "orbitshift/cycles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vendor_json.hpp"

namespace orbitshift {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kCondLimit = 1e12;

struct Shoot {
    Vec end;
    Mat jac;
    VariationBundle bundle;  // order-0 bundle (dense for toroidal)
};

Shoot shoot_once(const FieldSystem& sys, const Vec& x, int m, const NewtonOptions& opts) {
    Shoot s;
    if (sys.kind() == SystemKind::Map) {
        s.bundle = iterate_map(sys, x, m, {}, 0);
        s.end = s.bundle.state(m);
        s.jac = s.bundle.jacobian(m);
    } else {
        IntegratorOptions io;
        io.tol = opts.integ_tol;
        const double p0 = opts.section_angle;
        s.bundle = integrate_variations(sys, x, p0, p0 + kTwoPi * m, {}, 0, io);
        s.end = s.bundle.state(p0 + kTwoPi * m);
        s.jac = s.bundle.jacobian(p0 + kTwoPi * m);
    }
    return s;
}

double condition_number(const Mat& m) {
    Eigen::JacobiSVD<Mat> svd(m);
    const double smin = svd.singularValues().minCoeff();
    if (smin == 0.0) return std::numeric_limits<double>::infinity();
    return svd.singularValues().maxCoeff() / smin;
}

bool complex_less(const std::complex<double>& a, const std::complex<double>& b) {
    const double ma = std::abs(a), mb = std::abs(b);
    if (std::abs(ma - mb) > 1e-14 * (1 + ma + mb)) return ma > mb;
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
}

void normalize_column(CMat& v, int col) {
    v.col(col).normalize();
    const int n = static_cast<int>(v.rows());
    const double scale = v.col(col).cwiseAbs().maxCoeff();
    for (int i = 0; i < n; ++i) {
        const std::complex<double> c = v(i, col);
        if (std::abs(c) > 1e-12 * scale) {
            v.col(col) *= std::conj(c) / std::abs(c);
            break;
        }
    }
}

}  // namespace

std::string to_string(CycleClass c) {
    switch (c) {
        case CycleClass::XCycle: return "X_cycle";
        case CycleClass::OCycle: return "O_cycle";
        case CycleClass::Degenerate: return "degenerate";
        case CycleClass::NonhyperbolicOther: return "nonhyperbolic_other";
    }
    return "?";
}

EigenData eigen_decompose(const Mat& m) {
    const int n = static_cast<int>(m.rows());
    EigenData out;
    if (n == 2) {
        const double tr = m(0, 0) + m(1, 1);
        const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
        const std::complex<double> disc = std::sqrt(std::complex<double>(tr * tr / 4 - det, 0));
        CVec lam(2);
        lam << tr / 2.0 + disc, tr / 2.0 - disc;
        CMat vecs(2, 2);
        for (int i = 0; i < 2; ++i) {
            // row-based null vector of (m - lambda I), pick the better row
            const std::complex<double> l = lam[i];
            Eigen::Vector2cd v1(m(0, 1), l - m(0, 0));
            Eigen::Vector2cd v2(l - m(1, 1), m(1, 0));
            vecs.col(i) = (v1.norm() >= v2.norm()) ? v1 : v2;
            if (vecs.col(i).norm() == 0.0) vecs.col(i) = Eigen::Vector2cd(1, 0);
        }
        out.values = lam;
        out.vectors = vecs;
    } else {
        Eigen::EigenSolver<Mat> es(m);
        out.values = es.eigenvalues();
        out.vectors = es.eigenvectors();
    }
    // reproducible order and phase
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b) { return complex_less(out.values[a], out.values[b]); });
    CVec lam(n);
    CMat vecs(n, n);
    for (int i = 0; i < n; ++i) {
        lam[i] = out.values[idx[i]];
        vecs.col(i) = out.vectors.col(idx[i]);
        normalize_column(vecs, i);
    }
    out.values = lam;
    out.vectors = vecs;
    return out;
}

CycleClass classify_multipliers(const CVec& lambdas, double tol) {
    bool any_unit = false, all_off_circle = true, all_on_circle = true, any_minus_one = false;
    for (int i = 0; i < lambdas.size(); ++i) {
        const std::complex<double> l = lambdas[i];
        if (std::abs(l - 1.0) < tol) any_unit = true;
        if (std::abs(l + 1.0) < tol) any_minus_one = true;
        const double r = std::abs(std::abs(l) - 1.0);
        if (r < tol) all_off_circle = false;
        else all_on_circle = false;
    }
    if (any_unit) return CycleClass::Degenerate;
    if (all_off_circle) return CycleClass::XCycle;
    if (all_on_circle && !any_minus_one) return CycleClass::OCycle;
    return CycleClass::NonhyperbolicOther;
}

CycleClass classify_cycle(const Cycle& cycle) {
    const CycleSection& s = cycle.sections.front();
    if (cycle.kind() != SystemKind::FlowAutonomous)
        return classify_multipliers(s.eig.values);
    // Flow cycle: drop the unit eigenvalue whose eigenvector lies along the
    // local field direction, then classify the remaining section multipliers.
    const Vec b = cycle.system.eval(s.point);
    const Eigen::VectorXcd bhat = (b / b.norm()).cast<std::complex<double>>();
    const int n = static_cast<int>(s.eig.values.size());
    int drop = 0;
    double best = -1;
    for (int i = 0; i < n; ++i) {
        const double align = std::abs(s.eig.vectors.col(i).dot(bhat));
        if (align > best) {
            best = align;
            drop = i;
        }
    }
    CVec rest(n - 1);
    int j = 0;
    for (int i = 0; i < n; ++i)
        if (i != drop) rest[j++] = s.eig.values[i];
    return classify_multipliers(rest);
}

Cycle find_cycle(const FieldSystem& system, const Vec& guess, int m, const NewtonOptions& opts) {
    if (system.kind() == SystemKind::FlowAutonomous)
        throw std::invalid_argument(
            "find_cycle: general flows have no canonical section; trace the toroidal form and "
            "use embed_cycle_3d");
    if (m < 1) throw std::invalid_argument("find_cycle: m must be >= 1");

    Vec x = guess;
    Shoot sh = shoot_once(system, x, m, opts);
    Vec F = sh.end - x;
    double res = F.norm();
    std::vector<double> history{res};

    int iter = 0;
    while (res > opts.tol) {
        if (++iter > opts.max_iter)
            throw NewtonError("find_cycle: no convergence in " + std::to_string(opts.max_iter) +
                              " iterations (residual " + std::to_string(res) + ")");
        Mat M = sh.jac - Mat::Identity(system.dim(), system.dim());
        if (condition_number(M) > kCondLimit)
            throw DegenerateCycleError(
                "find_cycle: DP^m has a unit eigenvalue; Newton step is singular");
        const Vec step = M.fullPivLu().solve(-F);

        double lambda = 1.0;
        Shoot trial;
        Vec x_try;
        double res_try = std::numeric_limits<double>::infinity();
        int halvings = 0;
        while (true) {
            x_try = x + lambda * step;
            trial = shoot_once(system, x_try, m, opts);
            res_try = (trial.end - x_try).norm();
            if (res_try < res || halvings >= opts.max_halvings) break;
            lambda /= 2;
            ++halvings;
        }
        if (res_try >= res)
            throw NewtonError("find_cycle: damped step stalled at residual " +
                              std::to_string(res));
        x = x_try;
        sh = std::move(trial);
        F = sh.end - x;
        res = F.norm();
        history.push_back(res);
    }

    Cycle cyc;
    cyc.system = system;
    cyc.m = m;
    cyc.closure_residual = res;
    cyc.newton_residuals = std::move(history);
    cyc.integ_tol = opts.integ_tol;

    const Mat M0 = sh.jac;
    if (system.kind() == SystemKind::Map) {
        cyc.period = m;
        cyc.sections.resize(m);
        std::vector<Mat> step_jac(m);
        for (int j = 0; j < m; ++j) {
            cyc.sections[j].angle = j;
            cyc.sections[j].time = j;
            cyc.sections[j].point = sh.bundle.state(j);
            step_jac[j] = system.derivatives(cyc.sections[j].point, 1).grad;
        }
        for (int j = 0; j < m; ++j) {
            Mat Mj = Mat::Identity(2, 2);
            for (int i = 0; i < m; ++i) Mj = step_jac[(j + i) % m] * Mj;
            cyc.sections[j].jac_full = Mj;
            cyc.sections[j].eig = eigen_decompose(Mj);
        }
    } else {
        cyc.period = kTwoPi * m;
        const int ns = std::max(1, opts.n_sections);
        cyc.sections.resize(ns);
        for (int j = 0; j < ns; ++j) {
            const double phi = opts.section_angle + cyc.period * j / ns;
            const Mat Sj = sh.bundle.jacobian(phi);
            cyc.sections[j].angle = phi;
            cyc.sections[j].time = phi - opts.section_angle;
            cyc.sections[j].point = sh.bundle.state(phi);
            cyc.sections[j].jac_full = Sj * M0 * Sj.inverse();
            cyc.sections[j].eig = eigen_decompose(cyc.sections[j].jac_full);
        }
    }
    cyc.cls = classify_cycle(cyc);
    return cyc;
}

Mat full_period_jacobian(const Cycle& cycle, int section_index) {
    const CycleSection& s = cycle.sections.at(section_index);
    IntegratorOptions io;
    io.tol = cycle.integ_tol;
    switch (cycle.kind()) {
        case SystemKind::Map:
            return iterate_map(cycle.system, s.point, cycle.m, {}, 0).jacobian(cycle.m);
        case SystemKind::FlowToroidal: {
            auto b = integrate_variations(cycle.system, s.point, s.angle,
                                          s.angle + cycle.period, {}, 0, io);
            return b.jacobian(s.angle + cycle.period);
        }
        case SystemKind::FlowAutonomous: {
            auto b = integrate_variations(cycle.system, s.point, 0.0, cycle.period, {}, 0, io);
            return b.jacobian(cycle.period);
        }
    }
    throw std::invalid_argument("full_period_jacobian: unknown kind");
}

std::vector<Mat> evolve_jacobian(const Cycle& cycle) {
    if (cycle.kind() == SystemKind::Map)
        throw std::invalid_argument("evolve_jacobian: along-cycle evolution is continuous-time");
    const int n = cycle.dim();
    const bool toroidal = cycle.kind() == SystemKind::FlowToroidal;
    const FieldSystem& sys = cycle.system;

    // state: [x | M] with d/ds M = A M - M A, A = spatial gradient at x
    auto rhs = [&sys, n](double s, const Vec& y, Vec& dy) {
        const Vec x = y.segment(0, n);
        const DerivativeTensors d = sys.derivatives(x, 1, s);
        Eigen::Map<const Mat> M(y.data() + n, n, n);
        dy.resize(y.size());
        dy.segment(0, n) = d.value;
        Eigen::Map<Mat> dM(dy.data() + n, n, n);
        dM = d.grad * M - M * d.grad;
    };

    const CycleSection& s0 = cycle.sections.front();
    Vec y0(n + n * n);
    y0.segment(0, n) = s0.point;
    Eigen::Map<Mat>(y0.data() + n, n, n) = s0.jac_full;

    IntegratorOptions io;
    io.tol = cycle.integ_tol;
    const double a0 = toroidal ? s0.angle : 0.0;
    Trajectory tr = integrate_ode(rhs, y0, a0, a0 + cycle.period, io);

    std::vector<Mat> out;
    out.reserve(cycle.sections.size());
    for (const auto& sec : cycle.sections) {
        const double s = toroidal ? sec.angle : sec.time;
        const Vec y = tr.at(s);
        out.emplace_back(Eigen::Map<const Mat>(y.data() + n, n, n));
    }
    return out;
}

int detect_turn_count(const FieldSystem& system, const Vec& x, int m_max, double tol,
                      const NewtonOptions& opts) {
    for (int m = 1; m <= m_max; ++m) {
        const Shoot s = shoot_once(system, x, m, opts);
        if ((s.end - x).norm() <= tol) return m;
    }
    return 0;
}

std::vector<Vec> line_scan(const FieldSystem& system, int m, const Vec& a, const Vec& b,
                           int samples, const NewtonOptions& opts) {
    if (system.kind() == SystemKind::FlowAutonomous)
        throw std::invalid_argument("line_scan: supported for toroidal systems and maps");
    if (samples < 3) throw std::invalid_argument("line_scan: need at least 3 samples");
    std::vector<double> res(samples);
    std::vector<Vec> pts(samples);
    for (int i = 0; i < samples; ++i) {
        const double s = static_cast<double>(i) / (samples - 1);
        pts[i] = (1 - s) * a + s * b;
        try {
            res[i] = (shoot_once(system, pts[i], m, opts).end - pts[i]).norm();
        } catch (const std::exception&) {
            res[i] = std::numeric_limits<double>::infinity();
        }
    }
    std::vector<Vec> minima;
    for (int i = 1; i + 1 < samples; ++i)
        if (res[i] < res[i - 1] && res[i] <= res[i + 1] && std::isfinite(res[i]))
            minima.push_back(pts[i]);
    return minima;
}

Cycle embed_cycle_3d(const Cycle& toroidal_cycle) {
    if (toroidal_cycle.kind() != SystemKind::FlowToroidal)
        throw std::invalid_argument("embed_cycle_3d: expected a toroidal cycle");
    const FieldSystem& tor = toroidal_cycle.system;
    const FieldSystem sys3 = embed_cartesian(tor);

    // time along the field line: dt/dphi = R / B_phi
    auto rhs = [&tor](double phi, const Vec& y, Vec& dy) {
        const Vec x = y.segment(0, 2);
        dy.resize(3);
        dy.segment(0, 2) = tor.eval(x, phi);
        dy[2] = y[0] / tor.cylindrical_field(y[0], y[1], phi)[2];
    };
    IntegratorOptions io;
    io.tol = toroidal_cycle.integ_tol;
    const CycleSection& s0 = toroidal_cycle.sections.front();
    Vec y0(3);
    y0 << s0.point[0], s0.point[1], 0.0;
    const Trajectory tr = integrate_ode(rhs, y0, s0.angle, s0.angle + toroidal_cycle.period, io);
    const double T = tr.at(s0.angle + toroidal_cycle.period)[2];

    Cycle out;
    out.system = sys3;
    out.m = toroidal_cycle.m;
    out.period = T;
    out.integ_tol = toroidal_cycle.integ_tol;
    out.closure_residual = toroidal_cycle.closure_residual;
    out.newton_residuals = toroidal_cycle.newton_residuals;

    out.sections.resize(toroidal_cycle.sections.size());
    double max_closure = toroidal_cycle.closure_residual;
    for (size_t j = 0; j < toroidal_cycle.sections.size(); ++j) {
        const auto& st = toroidal_cycle.sections[j];
        const Vec y = tr.at(st.angle);
        Vec p3(3);
        p3 << y[0] * std::cos(st.angle), y[0] * std::sin(st.angle), y[1];
        auto b = integrate_variations(sys3, p3, 0.0, T, {}, 0, io);
        out.sections[j].angle = st.angle;
        out.sections[j].time = y[2];
        out.sections[j].point = p3;
        out.sections[j].jac_full = b.jacobian(T);
        out.sections[j].eig = eigen_decompose(out.sections[j].jac_full);
        max_closure = std::max(max_closure, (b.state(T) - p3).norm());
    }
    out.closure_residual = max_closure;
    out.cls = classify_cycle(out);
    return out;
}

std::string cycle_to_json(const Cycle& cycle) {
    nlohmann::json j;
    j["system"] = cycle.system.id();
    j["kind"] = cycle.kind() == SystemKind::Map           ? "map"
                : cycle.kind() == SystemKind::FlowToroidal ? "flow_toroidal"
                                                           : "flow_autonomous";
    j["m"] = cycle.m;
    j["period"] = cycle.period;
    j["class"] = to_string(cycle.cls);
    j["closure_residual"] = cycle.closure_residual;
    nlohmann::json secs = nlohmann::json::array();
    for (const auto& s : cycle.sections) {
        nlohmann::json js;
        js["angle"] = s.angle;
        js["time"] = s.time;
        js["point"] = std::vector<double>(s.point.data(), s.point.data() + s.point.size());
        std::vector<double> jac;  // row-major
        for (int r = 0; r < s.jac_full.rows(); ++r)
            for (int c = 0; c < s.jac_full.cols(); ++c) jac.push_back(s.jac_full(r, c));
        js["jac_full"] = jac;
        nlohmann::json eig = nlohmann::json::array();
        for (int i = 0; i < s.eig.values.size(); ++i) {
            nlohmann::json je;
            je["re"] = s.eig.values[i].real();
            je["im"] = s.eig.values[i].imag();
            std::vector<double> vre, vim;
            for (int r = 0; r < s.eig.vectors.rows(); ++r) {
                vre.push_back(s.eig.vectors(r, i).real());
                vim.push_back(s.eig.vectors(r, i).imag());
            }
            je["vec_re"] = vre;
            je["vec_im"] = vim;
            eig.push_back(je);
        }
        js["eigs"] = eig;
        secs.push_back(js);
    }
    j["sections"] = secs;
    return j.dump(2);
}

}  // namespace orbitshift
