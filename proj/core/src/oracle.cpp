#include "orbitshift/oracle.hpp"

#include <atomic>
#include <cmath>
#include <thread>

namespace orbitshift {

Cycle relocate_cycle(const FieldSystem& system, const Perturbation& pert, double k,
                     const Cycle& seed, const RelocateOptions& opts) {
    const FieldSystem sys_k = perturbed(system, pert.direction, k);
    NewtonOptions nopts;
    nopts.tol = opts.newton_tol;
    nopts.integ_tol = seed.integ_tol;
    nopts.n_sections = seed.n_sections();
    if (seed.kind() == SystemKind::FlowToroidal) nopts.section_angle = seed.sections[0].angle;
    Vec guess = seed.sections[0].point;
    if (opts.first_order_shift) guess += k * (*opts.first_order_shift);
    return find_cycle(sys_k, guess, seed.m, nopts);
}

FdEstimate finite_difference(const std::function<Vec(double)>& quantity, FdScheme scheme,
                             double k) {
    if (!(k > 0)) throw std::invalid_argument("finite_difference: step must be positive");
    auto stencil = [&](double h) -> Vec {
        if (scheme == FdScheme::Central) return (quantity(h) - quantity(-h)) / (2 * h);
        return (quantity(h) - quantity(0.0)) / h;
    };
    FdEstimate out;
    out.value = stencil(k);
    const Vec half = stencil(k / 2);
    const double p = (scheme == FdScheme::Central) ? 2.0 : 1.0;
    const double denom = std::pow(2.0, p) - 1.0;
    out.refined = (std::pow(2.0, p) * half - out.value) / denom;
    out.error_estimate = (half - out.value).norm() / denom;
    const double coarse_err = (out.value - out.refined).norm();
    const double fine_err = (half - out.refined).norm();
    out.observed_ratio = (fine_err > 0) ? coarse_err / fine_err : 0.0;
    return out;
}

OrderFit fit_order(const std::vector<double>& k_list, const std::vector<double>& residuals,
                   double floor) {
    if (k_list.size() != residuals.size())
        throw std::invalid_argument("fit_order: mismatched lengths");
    std::vector<double> lx, ly;
    for (size_t i = 0; i < k_list.size(); ++i) {
        if (!(residuals[i] > floor) || !std::isfinite(residuals[i])) continue;
        lx.push_back(std::log(k_list[i]));
        ly.push_back(std::log(residuals[i]));
    }
    const int n = static_cast<int>(lx.size());
    if (n < 3)
        throw std::invalid_argument("fit_order: fewer than 3 residuals above the roundoff floor");

    double sx = 0, sy = 0;
    for (int i = 0; i < n; ++i) {
        sx += lx[i];
        sy += ly[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    OrderFit fit;
    fit.n_used = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0;
    for (int i = 0; i < n; ++i) {
        const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
        ss_res += r * r;
    }
    if (n > 2) {
        const double se = std::sqrt(ss_res / (n - 2) / sxx);
        // two-sided 97.5% Student t quantiles for df = 1..30
        static const double t975[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306,
                                      2.262,  2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
                                      2.110,  2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
                                      2.060,  2.056, 2.052, 2.048, 2.045, 2.042};
        const int df = n - 2;
        const double t = (df <= 30) ? t975[df - 1] : 1.96;
        fit.half_width = t * se;
    }
    return fit;
}

// Declared in shifts.hpp; lives here because it is a brute-force estimate
// built on relocate_cycle.
Vec map_cycle_shift_curvature(const Cycle& cycle, const Perturbation& pert, double k_step) {
    if (cycle.kind() != SystemKind::Map)
        throw std::invalid_argument("map_cycle_shift_curvature: maps only");
    RelocateOptions opts;
    opts.first_order_shift = cycle_shift_section(cycle, pert, 0);
    const Vec x0 = cycle.sections[0].point;
    const Vec xp = relocate_cycle(cycle.system, pert, +k_step, cycle, opts).sections[0].point;
    const Vec xm = relocate_cycle(cycle.system, pert, -k_step, cycle, opts).sections[0].point;
    return (xp - 2.0 * x0 + xm) / (k_step * k_step);
}

const std::vector<double>& default_k_ladder() {
    static const std::vector<double> ladder = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
    return ladder;
}

ShiftReport shift_convergence_report(const Cycle& cycle, const Perturbation& pert,
                                     const std::vector<double>& k_list, double slope_lo,
                                     double slope_hi, int threads) {
    if (k_list.size() < 3) throw std::invalid_argument("shift_convergence_report: need >= 3 k");
    for (size_t i = 1; i < k_list.size(); ++i)
        if (!(k_list[i] < k_list[i - 1]))
            throw std::invalid_argument("shift_convergence_report: k_list must decrease");
    if (!(k_list.front() / k_list.back() >= 100.0))
        throw std::invalid_argument("shift_convergence_report: k_list must span >= 2 decades");

    ShiftReport rep;
    rep.case_id = cycle.system.id() + "+" + pert.direction.id();
    rep.k_list = k_list;
    rep.slope_lo = slope_lo;
    rep.slope_hi = slope_hi;

    const Vec x0 = cycle.sections[0].point;
    const Vec dx = cycle_shift_section(cycle, pert, 0);
    const size_t nk = k_list.size();
    rep.predicted.resize(nk);
    rep.reference.resize(nk);
    rep.residuals.assign(nk, std::numeric_limits<double>::quiet_NaN());
    rep.status.assign(nk, "ok");

    RelocateOptions ropts;
    ropts.first_order_shift = dx;

    auto run_one = [&](size_t i) {
        rep.predicted[i] = x0 + k_list[i] * dx;
        try {
            const Cycle moved = relocate_cycle(cycle.system, pert, k_list[i], cycle, ropts);
            rep.reference[i] = moved.sections[0].point;
            rep.residuals[i] = (rep.reference[i] - rep.predicted[i]).norm();
        } catch (const std::exception& e) {
            rep.status[i] = e.what();
        }
    };

    if (threads <= 1) {
        for (size_t i = 0; i < nk; ++i) run_one(i);
    } else {
        std::vector<std::thread> pool;
        std::atomic<size_t> next{0};
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < nk; i = next.fetch_add(1)) run_one(i);
            });
        for (auto& th : pool) th.join();
    }

    std::vector<double> ks, rs;
    for (size_t i = 0; i < nk; ++i)
        if (rep.status[i] == "ok") {
            ks.push_back(k_list[i]);
            rs.push_back(rep.residuals[i]);
        }
    rep.order = fit_order(ks, rs);
    rep.pass = rep.order.slope >= slope_lo && rep.order.slope <= slope_hi;
    return rep;
}

}  // namespace orbitshift
