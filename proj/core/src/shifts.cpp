#include "orbitshift/shifts.hpp"

#include <cmath>

namespace orbitshift {

namespace {

constexpr double kCondLimit = 1e12;

void check_pert(const Cycle& cycle, const Perturbation& pert, const char* where) {
    if (!pert.direction.valid())
        throw std::invalid_argument(std::string(where) + ": empty perturbation direction");
    if (pert.direction.kind() != cycle.kind() || pert.direction.dim() != cycle.dim())
        throw std::invalid_argument(std::string(where) +
                                    ": perturbation direction does not match the cycle's system");
}

Vec guarded_solve(const Mat& m, const Vec& rhs, const char* where) {
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    if (smin == 0.0 || smax / smin > kCondLimit)
        throw DegenerateCycleError(std::string(where) +
                                   ": matrix is singular to the 1e12 condition guard "
                                   "(unit or near-unit multiplier)");
    return svd.solve(rhs);
}

IntegratorOptions integ_opts(const Cycle& cycle) {
    IntegratorOptions io;
    io.tol = cycle.integ_tol;
    return io;
}

}  // namespace

Vec delta_return_map(const Cycle& cycle, const Perturbation& pert, int section) {
    check_pert(cycle, pert, "delta_return_map");
    const CycleSection& s = cycle.sections.at(section);
    switch (cycle.kind()) {
        case SystemKind::Map:
            return iterate_map(cycle.system, s.point, cycle.m, pert, 1).variation(1, cycle.m);
        case SystemKind::FlowToroidal: {
            auto b = integrate_variations(cycle.system, s.point, s.angle, s.angle + cycle.period,
                                          pert, 1, integ_opts(cycle));
            return b.variation(1, s.angle + cycle.period);
        }
        case SystemKind::FlowAutonomous: {
            auto b = integrate_variations(cycle.system, s.point, 0.0, cycle.period, pert, 1,
                                          integ_opts(cycle));
            return b.variation(1, cycle.period);
        }
    }
    throw std::invalid_argument("delta_return_map: unknown kind");
}

Vec cycle_shift_section(const Cycle& cycle, const Perturbation& pert, int section) {
    if (cycle.kind() == SystemKind::FlowAutonomous)
        throw std::invalid_argument(
            "cycle_shift_section: flow cycles use cycle_shift_perpendicular");
    const CycleSection& s = cycle.sections.at(section);
    const Vec dp = delta_return_map(cycle, pert, section);
    const Mat M = s.jac_full - Mat::Identity(cycle.dim(), cycle.dim());
    return guarded_solve(M, -dp, "cycle_shift_section");
}

std::vector<Vec> cycle_shift_perpendicular(const Cycle& flow_cycle, const Perturbation& pert) {
    if (flow_cycle.kind() != SystemKind::FlowAutonomous)
        throw std::invalid_argument("cycle_shift_perpendicular: expected a flow cycle");
    check_pert(flow_cycle, pert, "cycle_shift_perpendicular");
    const int n = flow_cycle.dim();
    std::vector<Vec> out;
    out.reserve(flow_cycle.sections.size());
    for (int j = 0; j < flow_cycle.n_sections(); ++j) {
        const CycleSection& s = flow_cycle.sections[j];
        const Vec b = flow_cycle.system.eval(s.point);
        const double bn = b.norm();
        if (bn == 0.0) throw DomainError("cycle_shift_perpendicular: |B| = 0 on the cycle");
        const Vec bhat = b / bn;
        const Mat proj = Mat::Identity(n, n) - bhat * bhat.transpose();
        const Vec dxt = delta_return_map(flow_cycle, pert, j);
        const Mat M = Mat::Identity(n, n) - proj * s.jac_full;
        out.push_back(guarded_solve(M, Vec(proj * dxt), "cycle_shift_perpendicular"));
    }
    return out;
}

std::vector<Vec> evolve_delta_return(const Cycle& cycle, const Perturbation& pert) {
    if (cycle.kind() == SystemKind::Map)
        throw std::invalid_argument("evolve_delta_return: along-cycle evolution is "
                                    "continuous-time; recompute per iterate instead");
    check_pert(cycle, pert, "evolve_delta_return");
    const int n = cycle.dim();
    const bool toroidal = cycle.kind() == SystemKind::FlowToroidal;
    const FieldSystem& sys = cycle.system;
    const FieldSystem& dir = pert.direction;

    // state: [x | M = DP^m(phi) | delta]
    auto rhs = [&sys, &dir, n, toroidal](double s, const Vec& y, Vec& dy) {
        const Vec x = y.segment(0, n);
        const DerivativeTensors d = sys.derivatives(x, 1, s);
        const Vec delta_b = toroidal ? perturbation_jet(sys, dir, x, s, 1).delta
                                     : dir.eval(x, s);
        Eigen::Map<const Mat> M(y.data() + n, n, n);
        const Vec dl = y.segment(n + n * n, n);
        dy.resize(y.size());
        dy.segment(0, n) = d.value;
        Eigen::Map<Mat> dM(dy.data() + n, n, n);
        dM = d.grad * M - M * d.grad;
        dy.segment(n + n * n, n) =
            d.grad * dl - (M - Mat::Identity(n, n)) * delta_b;
    };

    const CycleSection& s0 = cycle.sections.front();
    Vec y0(n + n * n + n);
    y0.segment(0, n) = s0.point;
    Eigen::Map<Mat>(y0.data() + n, n, n) = s0.jac_full;
    y0.segment(n + n * n, n) = delta_return_map(cycle, pert, 0);

    const double a0 = toroidal ? s0.angle : 0.0;
    Trajectory tr = integrate_ode(rhs, y0, a0, a0 + cycle.period, integ_opts(cycle));

    std::vector<Vec> out;
    out.reserve(cycle.sections.size() + 1);
    for (const auto& sec : cycle.sections) {
        const Vec y = tr.at(toroidal ? sec.angle : sec.time);
        out.push_back(y.segment(n + n * n, n));
    }
    out.push_back(tr.at(a0 + cycle.period).segment(n + n * n, n));
    return out;
}

Trajectory evolve_cycle_shift_trajectory(const Cycle& cycle, const Perturbation& pert) {
    if (cycle.kind() != SystemKind::FlowToroidal)
        throw std::invalid_argument("evolve_cycle_shift: defined for toroidal cycles");
    check_pert(cycle, pert, "evolve_cycle_shift");
    const FieldSystem& sys = cycle.system;
    const FieldSystem& dir = pert.direction;

    // state: [x | delta x_cyc]
    auto rhs = [&sys, &dir](double phi, const Vec& y, Vec& dy) {
        const Vec x = y.segment(0, 2);
        const DerivativeTensors d = sys.derivatives(x, 1, phi);
        const Vec df = perturbation_jet(sys, dir, x, phi, 1).delta;
        dy.resize(4);
        dy.segment(0, 2) = d.value;
        dy.segment(2, 2) = d.grad * y.segment(2, 2) + df;
    };

    const CycleSection& s0 = cycle.sections.front();
    Vec y0(4);
    y0.segment(0, 2) = s0.point;
    y0.segment(2, 2) = cycle_shift_section(cycle, pert, 0);
    return integrate_ode(rhs, y0, s0.angle, s0.angle + cycle.period, integ_opts(cycle));
}

std::vector<Vec> evolve_cycle_shift(const Cycle& cycle, const Perturbation& pert) {
    const Trajectory tr = evolve_cycle_shift_trajectory(cycle, pert);
    std::vector<Vec> out;
    out.reserve(cycle.sections.size() + 1);
    for (const auto& sec : cycle.sections) out.push_back(tr.at(sec.angle).segment(2, 2));
    out.push_back(tr.at(cycle.sections.front().angle + cycle.period).segment(2, 2));
    return out;
}

namespace {

CVec eig_derivative(const Mat& M, const Mat& dM, const EigenData& right) {
    const EigenData left = eigen_decompose(M.transpose());
    const int n = static_cast<int>(right.values.size());
    const CMat dMc = dM.cast<std::complex<double>>();
    CVec out(n);
    for (int i = 0; i < n; ++i) {
        // pair the left eigenvector with the matching eigenvalue
        int match = 0;
        double best = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            const double d = std::abs(left.values[j] - right.values[i]);
            if (d < best) {
                best = d;
                match = j;
            }
        }
        const CVec u = left.vectors.col(match);
        const CVec v = right.vectors.col(i);
        const std::complex<double> denom = (u.transpose() * v)(0, 0);
        out[i] = (u.transpose() * dMc * v)(0, 0) / denom;
    }
    return out;
}

JacobianDerivative map_jacobian_derivative(const Cycle& cycle, const Perturbation& pert) {
    const int m = cycle.m;
    const int n = cycle.dim();
    std::vector<Mat> J(m), dJ(m);
    for (int i = 0; i < m; ++i) {
        const Vec& x = cycle.sections[i].point;
        const DerivativeTensors d = cycle.system.derivatives(x, 2);
        const DerivativeTensors dp = pert.direction.derivatives(x, 1);
        const Vec dx = cycle_shift_section(cycle, pert, i);
        J[i] = d.grad;
        dJ[i] = dp.grad + d.hess.contract(dx);
    }
    JacobianDerivative out;
    for (int s = 0; s < m; ++s) {
        Mat total = Mat::Zero(n, n);
        for (int i = 0; i < m; ++i) {
            Mat term = Mat::Identity(n, n);
            for (int q = 0; q < m; ++q) {
                const int idx = (s + q) % m;
                term = ((q == i) ? dJ[idx] : J[idx]) * term;
            }
            total += term;
        }
        out.angles.push_back(cycle.sections[s].angle);
        out.ddp.push_back(total);
        out.eig_derivs.push_back(eig_derivative(cycle.sections[s].jac_full, total,
                                                cycle.sections[s].eig));
    }
    return out;
}

}  // namespace

JacobianDerivative jacobian_total_derivative(const Cycle& cycle, const Perturbation& pert) {
    check_pert(cycle, pert, "jacobian_total_derivative");
    if (cycle.cls == CycleClass::Degenerate)
        throw DegenerateCycleError("jacobian_total_derivative: degenerate cycle");
    if (cycle.kind() == SystemKind::Map) return map_jacobian_derivative(cycle, pert);
    if (cycle.kind() != SystemKind::FlowToroidal)
        throw std::invalid_argument(
            "jacobian_total_derivative: available for toroidal and map cycles");

    const FieldSystem& sys = cycle.system;
    const FieldSystem& dir = pert.direction;
    const std::vector<Vec> shifts = evolve_cycle_shift(cycle, pert);

    // state: [x | W = DX(phi_j -> phi) | delta x_cyc | V = dDX/dk]
    auto rhs = [&sys, &dir](double phi, const Vec& y, Vec& dy) {
        const Vec x = y.segment(0, 2);
        const DerivativeTensors d = sys.derivatives(x, 2, phi);
        const PerturbationJet pj = perturbation_jet(sys, dir, x, phi, 2);
        Eigen::Map<const Mat> W(y.data() + 2, 2, 2);
        const Vec dxc = y.segment(6, 2);
        Eigen::Map<const Mat> V(y.data() + 8, 2, 2);
        const Mat dA = pj.grad + d.hess.contract(dxc);
        dy.resize(12);
        dy.segment(0, 2) = d.value;
        Eigen::Map<Mat>(dy.data() + 2, 2, 2) = d.grad * W;
        dy.segment(6, 2) = d.grad * dxc + pj.delta;
        Eigen::Map<Mat>(dy.data() + 8, 2, 2) = dA * W + d.grad * V;
    };

    JacobianDerivative out;
    for (int j = 0; j < cycle.n_sections(); ++j) {
        const CycleSection& s = cycle.sections[j];
        Vec y0 = Vec::Zero(12);
        y0.segment(0, 2) = s.point;
        Eigen::Map<Mat>(y0.data() + 2, 2, 2) = Mat::Identity(2, 2);
        y0.segment(6, 2) = shifts[j];
        Trajectory tr = integrate_ode(rhs, y0, s.angle, s.angle + cycle.period,
                                      integ_opts(cycle));
        const Vec ye = tr.at(s.angle + cycle.period);
        Mat V = Eigen::Map<const Mat>(ye.data() + 8, 2, 2);
        out.angles.push_back(s.angle);
        out.ddp.push_back(V);
        out.eig_derivs.push_back(eig_derivative(s.jac_full, V, s.eig));
    }
    return out;
}

CycleShift compute_cycle_shift(const Cycle& cycle, const Perturbation& pert) {
    CycleShift out;
    for (const auto& s : cycle.sections) out.angles.push_back(s.angle);
    switch (cycle.kind()) {
        case SystemKind::Map:
            for (int j = 0; j < cycle.n_sections(); ++j) {
                out.delta_xcyc.push_back(cycle_shift_section(cycle, pert, j));
                out.delta_return.push_back(delta_return_map(cycle, pert, j));
            }
            break;
        case SystemKind::FlowToroidal:
            out.delta_xcyc = evolve_cycle_shift(cycle, pert);
            out.delta_return = evolve_delta_return(cycle, pert);
            out.delta_xcyc.pop_back();  // drop the closing values
            out.delta_return.pop_back();
            break;
        case SystemKind::FlowAutonomous:
            out.delta_xcyc = cycle_shift_perpendicular(cycle, pert);
            out.delta_return = evolve_delta_return(cycle, pert);
            out.delta_return.pop_back();
            break;
    }
    return out;
}

}  // namespace orbitshift
