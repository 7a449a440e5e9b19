#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"

using namespace orbitshift;
using testutil::model_pert;
using testutil::model_xcycle;

TEST_CASE("order fitting") {
    std::vector<double> ks = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3};

    SUBCASE("exact power laws") {
        std::vector<double> r2, r3;
        for (double k : ks) {
            r2.push_back(3.0 * k * k);
            r3.push_back(0.5 * k * k * k);
        }
        const OrderFit f2 = fit_order(ks, r2);
        CHECK(f2.slope == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(f2.half_width < 1e-6);
        CHECK(fit_order(ks, r3).slope == doctest::Approx(3.0).epsilon(1e-9));
    }
    SUBCASE("roundoff floor points are excluded") {
        std::vector<double> r = {1e-2, 9e-4, 1e-4, 9e-6, 1e-13};
        const OrderFit f = fit_order(ks, r);
        CHECK(f.n_used == 4);
    }
    SUBCASE("too few usable points is an error") {
        std::vector<double> r = {1e-2, 1e-13, 1e-13, 1e-13, 1e-14};
        CHECK_THROWS_AS(fit_order(ks, r), std::invalid_argument);
    }
}

TEST_CASE("finite differences with Richardson checks") {
    SUBCASE("even function has zero central derivative") {
        auto q = [](double k) {
            Vec v(1);
            v << k * k;
            return v;
        };
        const FdEstimate est = finite_difference(q, FdScheme::Central, 0.1);
        CHECK(est.value[0] == 0.0);
        CHECK(est.refined[0] == 0.0);
    }
    SUBCASE("sine derivative at zero") {
        auto q = [](double k) {
            Vec v(1);
            v << std::sin(k);
            return v;
        };
        const FdEstimate est = finite_difference(q, FdScheme::Central, 1e-4);
        CHECK(std::abs(est.value[0] - 1.0) < 1e-8);
        CHECK(std::abs(est.refined[0] - 1.0) < 1e-12);
        CHECK(est.observed_ratio == doctest::Approx(4.0).epsilon(0.05));
    }
    SUBCASE("forward scheme ratio is near 2") {
        auto q = [](double k) {
            Vec v(1);
            v << std::exp(k);
            return v;
        };
        const FdEstimate est = finite_difference(q, FdScheme::Forward, 1e-3);
        CHECK(est.observed_ratio == doctest::Approx(2.0).epsilon(0.05));
    }
}

TEST_CASE("relocation") {
    const Cycle& xc = model_xcycle();
    const Perturbation pert = model_pert();

    SUBCASE("k = 0 reproduces the seed cycle") {
        const Cycle same = relocate_cycle(xc.system, pert, 0.0, xc);
        CHECK((same.sections[0].point - xc.sections[0].point).norm() < 1e-10);
    }
    SUBCASE("standard map kick has an analytic relocation") {
        const FieldSystem sm = make_system("standard-map", {{"K", 1.0}});
        Vec guess(2);
        guess << 0.1, 0.1;
        const Cycle fp = find_cycle(sm, guess, 1);
        const Perturbation kick = make_perturbation(sm, "uniform", {{"c0", 1.0}, {"c1", 1.0}});
        const double k = 1e-3;
        const Cycle moved = relocate_cycle(sm, kick, k, fp);
        // state (p, x): p* = 0, x* = -asin(k/K)
        CHECK(std::abs(moved.sections[0].point[0]) < 1e-12);
        CHECK(std::abs(moved.sections[0].point[1] - (-std::asin(k))) < 1e-11);
        CHECK(std::abs(moved.sections[0].point[1] + k) < 2e-10);  // + O(k^3)
    }
    SUBCASE("relocated cycle keeps a tight closure residual") {
        const Cycle moved = relocate_cycle(xc.system, pert, 1e-2, xc);
        CHECK(moved.closure_residual <= 1e-10);
    }
    SUBCASE("displacement itself is first order in k") {
        std::vector<double> ks = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
        std::vector<double> disp;
        for (double k : ks)
            disp.push_back(
                (relocate_cycle(xc.system, pert, k, xc).sections[0].point -
                 xc.sections[0].point)
                    .norm());
        const OrderFit f = fit_order(ks, disp);
        CHECK(f.slope == doctest::Approx(1.0).epsilon(0.05));
    }
}

TEST_CASE("shift report is deterministic and thread-invariant") {
    const Cycle& xc = model_xcycle();
    const Perturbation pert = model_pert();
    const ShiftReport a = shift_convergence_report(xc, pert, default_k_ladder(), 1.8, 2.2, 1);
    const ShiftReport b = shift_convergence_report(xc, pert, default_k_ladder(), 1.8, 2.2, 3);
    CHECK(a.pass);
    CHECK(b.pass);
    CHECK(a.order.slope == b.order.slope);
    for (size_t i = 0; i < a.k_list.size(); ++i) CHECK(a.residuals[i] == b.residuals[i]);
}

TEST_CASE("report preconditions") {
    const Cycle& xc = model_xcycle();
    const Perturbation pert = model_pert();
    CHECK_THROWS_AS(shift_convergence_report(xc, pert, {1e-1, 1e-2}), std::invalid_argument);
    CHECK_THROWS_AS(shift_convergence_report(xc, pert, {1e-1, 3e-2, 1e-2}),
                    std::invalid_argument);  // span < 2 decades
}
