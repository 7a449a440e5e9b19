#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"

using namespace orbitshift;
using testutil::fd_in_k;
using testutil::rel_err;

namespace {

constexpr double kPi = std::numbers::pi;

IntegratorOptions tight() {
    IntegratorOptions io;
    io.tol = {1e-12, 1e-14};
    return io;
}

Vec spiral_exact(const Vec& x0, double a, double t) {
    Vec out(2);
    out << std::exp(a * t) * (x0[0] * std::cos(t) - x0[1] * std::sin(t)),
        std::exp(a * t) * (x0[0] * std::sin(t) + x0[1] * std::cos(t));
    return out;
}

}  // namespace

TEST_CASE("planar rotation quarter turn") {
    const FieldSystem rot = make_system("planar-rotation");
    Vec x0(2);
    x0 << 1.0, 0.0;
    const Trajectory tr = integrate_flow(rot, x0, 0.0, kPi / 2, tight());
    Vec want(2);
    want << 0.0, 1.0;
    CHECK((tr.at(kPi / 2) - want).norm() < 1e-9);
}

TEST_CASE("backward integration") {
    const FieldSystem rot = make_system("planar-rotation");
    Vec x0(2);
    x0 << 1.0, 0.0;
    const Trajectory tr = integrate_flow(rot, x0, 0.0, -kPi / 2, tight());
    Vec want(2);
    want << 0.0, -1.0;
    CHECK((tr.at(-kPi / 2) - want).norm() < 1e-9);
    CHECK((tr.at(-0.7) - integrate_flow(rot, x0, 0.0, -0.7, tight()).at(-0.7)).norm() < 1e-10);
}

TEST_CASE("cross-integrator reference on the ABC flow") {
    const FieldSystem abc = make_system("abc");
    Vec x0 = Vec::Zero(3);
    auto rhs = [&abc](double t, const Vec& y, Vec& dy) { dy = abc.eval(y, t); };
    const Vec a = integrate_flow(abc, x0, 0.0, 1.0, tight()).at(1.0);
    const Vec b = rk4_integrate(rhs, x0, 0.0, 1.0, 20000);
    CHECK((a - b).norm() < 1e-9);
}

TEST_CASE("toroidal axis closes after one turn") {
    const FieldSystem tok = make_system("model-toroidal");
    Vec axis(2);
    axis << 3.0, 0.0;
    const Trajectory tr = integrate_flow(tok, axis, 0.0, 2 * kPi, tight());
    CHECK((tr.at(2 * kPi) - axis).norm() < 1e-9);
}

TEST_CASE("dense interpolant reproduces samples at nodes; grid is monotone") {
    const FieldSystem abc = make_system("abc");
    Vec x0(3);
    x0 << 0.1, 0.2, 0.3;
    const Trajectory tr = integrate_flow(abc, x0, 0.0, 3.0);
    for (size_t i = 0; i < tr.times().size(); ++i) {
        CHECK((tr.at(tr.times()[i]) - tr.states()[i]).norm() == 0.0);
        if (i) CHECK(tr.times()[i] > tr.times()[i - 1]);
    }
}

TEST_CASE("initial conditions of the variation bundle") {
    const FieldSystem abc = make_system("abc");
    const Perturbation pert = make_perturbation(abc, "param:A");
    Vec x0(3);
    x0 << 0.1, 0.2, 0.3;
    const auto b = integrate_variations(abc, x0, 0.0, 1.0, pert, 3, tight());
    CHECK((b.jacobian(0.0) - Mat::Identity(3, 3)).norm() == 0.0);
    for (int j = 1; j <= 3; ++j) CHECK(b.variation(j, 0.0).norm() == 0.0);
}

TEST_CASE("damped spiral has a closed-form flow, Jacobian and variations") {
    const double a = 0.1;
    const FieldSystem sp = make_system("damped-spiral", {{"a", a}});
    const Perturbation pa = make_perturbation(sp, "param:a");
    Vec x0(2);
    x0 << 1.0, 0.5;
    const double T = 2.0;
    const auto b = integrate_variations(sp, x0, 0.0, T, pa, 3, tight());
    const Vec xT = spiral_exact(x0, a, T);
    CHECK(rel_err(b.state(T), xT) < 1e-11);
    // DX = exp(a t) R(t)
    Mat dx_exact(2, 2);
    dx_exact << std::cos(T), -std::sin(T), std::sin(T), std::cos(T);
    dx_exact *= std::exp(a * T);
    CHECK(rel_err(b.jacobian(T), dx_exact) < 1e-11);
    // the j-th variation under dB/da is exactly t^j X(t)
    for (int j = 1; j <= 3; ++j)
        CHECK(rel_err(b.variation(j, T), Vec(std::pow(T, j) * xT)) < 1e-10);
}

TEST_CASE("first variation matches differences in k on the planar rotation") {
    const FieldSystem rot = make_system("planar-rotation");
    const Perturbation pert = make_perturbation(rot, "uniform", {{"c0", 1.0}, {"c1", 0.0}});
    Vec x0(2);
    x0 << 1.0, 0.0;
    const double T = 2.0;
    const auto b = integrate_variations(rot, x0, 0.0, T, pert, 1, tight());
    auto endpoint = [&](double k) {
        return integrate_flow(perturbed(rot, pert.direction, k), x0, 0.0, T, tight()).at(T);
    };
    // spec ladder k in {1e-3, 1e-4, 1e-5}; the system is linear in k, so
    // plain central differences are already exact to roundoff
    for (double k : {1e-3, 1e-4, 1e-5}) {
        const Vec fd = (endpoint(k) - endpoint(-k)) / (2 * k);
        CHECK(rel_err(b.variation(1, T), fd) < 1e-6);
    }
    CHECK(rel_err(b.variation(1, T), fd_in_k(endpoint, 1, 1e-3)) < 1e-8);
}

TEST_CASE("unit Jacobian determinant for divergence-free flows") {
    const FieldSystem rot = make_system("planar-rotation");
    Vec x0(2);
    x0 << 0.7, -0.2;
    const auto br = integrate_variations(rot, x0, 0.0, 2 * kPi, {}, 0, tight());
    CHECK(std::abs(br.jacobian(2 * kPi).determinant() - 1.0) < 1e-8);

    const FieldSystem abc = make_system("abc");
    Vec y0(3);
    y0 << 0.1, 0.2, 0.3;
    const auto ba = integrate_variations(abc, y0, 0.0, 2 * kPi, {}, 0, tight());
    CHECK(std::abs(ba.jacobian(2 * kPi).determinant() - 1.0) < 1e-8);
}

TEST_CASE("semigroup property of the Jacobian") {
    const FieldSystem abc = make_system("abc");
    Vec x0(3);
    x0 << 0.3, -0.1, 0.5;
    const double t1 = 0.8, t2 = 1.1;
    const auto whole = integrate_variations(abc, x0, 0.0, t1 + t2, {}, 0, tight());
    const auto first = integrate_variations(abc, x0, 0.0, t1, {}, 0, tight());
    const auto second =
        integrate_variations(abc, first.state(t1), t1, t1 + t2, {}, 0, tight());
    CHECK(rel_err(Mat(second.jacobian(t1 + t2) * first.jacobian(t1)),
                  whole.jacobian(t1 + t2)) < 1e-8);
}

TEST_CASE("log det DX equals the integrated divergence") {
    // damped spiral: exact value 2 a t
    const double a = 0.17;
    const FieldSystem sp = make_system("damped-spiral", {{"a", a}});
    Vec x0(2);
    x0 << 1.0, -0.3;
    const auto b = integrate_variations(sp, x0, 0.0, 3.0, {}, 0, tight());
    CHECK(std::abs(std::log(b.jacobian(3.0).determinant()) - 2 * a * 3.0) < 1e-7);

    // toroidal reduced system: trace A is nonzero; integrate it alongside
    const FieldSystem tok = make_system("model-toroidal");
    Vec y0(2);
    y0 << 3.4, 0.1;
    auto rhs = [&tok](double phi, const Vec& y, Vec& dy) {
        const Vec x = y.segment(0, 2);
        const DerivativeTensors d = tok.derivatives(x, 1, phi);
        Eigen::Map<const Mat> J(y.data() + 2, 2, 2);
        dy.resize(7);
        dy.segment(0, 2) = d.value;
        Eigen::Map<Mat>(dy.data() + 2, 2, 2) = d.grad * J;
        dy[6] = d.grad.trace();
    };
    Vec z0 = Vec::Zero(7);
    z0.segment(0, 2) = y0;
    Eigen::Map<Mat>(z0.data() + 2, 2, 2) = Mat::Identity(2, 2);
    const Trajectory tr = integrate_ode(rhs, z0, 0.0, 4 * kPi, tight());
    const Vec ze = tr.at(4 * kPi);
    const double logdet =
        std::log(Eigen::Map<const Mat>(ze.data() + 2, 2, 2).determinant());
    CHECK(std::abs(logdet - ze[6]) < 1e-7);
}

TEST_CASE("tolerance tightening never degrades accuracy") {
    const FieldSystem abc = make_system("abc");
    Vec x0(3);
    x0 << 0.1, 0.2, 0.3;
    auto rhs = [&abc](double t, const Vec& y, Vec& dy) { dy = abc.eval(y, t); };
    const Vec ref = rk4_integrate(rhs, x0, 0.0, 2.0, 400000);
    double rel = 1e-4;
    double prev = std::numeric_limits<double>::infinity();
    for (int halving = 0; halving < 18; ++halving) {
        IntegratorOptions io;
        io.tol = {rel, rel * 1e-2};
        const double err = (integrate_flow(abc, x0, 0.0, 2.0, io).at(2.0) - ref).norm();
        CHECK(err <= prev * 1.05 + 2e-13);
        prev = err;
        rel /= 2;
    }
}

TEST_CASE("taylor shift of the trajectory") {
    const FieldSystem rot = make_system("planar-rotation");
    const Perturbation pert = make_perturbation(rot, "cross-sine", {{"amp", 1.0}});
    Vec x0(2);
    x0 << 1.0, 0.0;
    const double T = 2.0;
    const auto b = integrate_variations(rot, x0, 0.0, T, pert, 3, tight());

    SUBCASE("k = 0 returns the base trajectory exactly") {
        const Trajectory base = b.base();
        const Trajectory shifted = taylor_shift(b, 0.0, 3);
        for (size_t i = 0; i < base.times().size(); ++i)
            CHECK((shifted.states()[i] - base.states()[i]).norm() == 0.0);
        CHECK((shifted.at(1.234) - base.at(1.234)).norm() == 0.0);
    }
    SUBCASE("order-1 and order-3 residual slopes against re-integration") {
        const std::vector<double> ks = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
        std::vector<double> r1, r3;
        for (double k : ks) {
            const Vec truth =
                integrate_flow(perturbed(rot, pert.direction, k), x0, 0.0, T, tight()).at(T);
            r1.push_back((truth - taylor_shift(b, k, 1).at(T)).norm());
            r3.push_back((truth - taylor_shift(b, k, 3).at(T)).norm());
        }
        const OrderFit f1 = fit_order(ks, r1);
        const OrderFit f3 = fit_order(ks, r3);
        CHECK(f1.slope == doctest::Approx(2.0).epsilon(0.1));
        CHECK(f3.slope == doctest::Approx(4.0).epsilon(0.1));
    }
    SUBCASE("requesting more than the computed order fails") {
        const auto b1 = integrate_variations(rot, x0, 0.0, T, pert, 1, tight());
        CHECK_THROWS_AS(taylor_shift(b1, 0.1, 2), std::invalid_argument);
    }
}

TEST_CASE("map iteration and its variations") {
    const FieldSystem sm = make_system("standard-map", {{"K", 1.0}});
    const Perturbation pk = make_perturbation(sm, "param:K");
    Vec x0(2);
    x0 << 0.0, 0.0;

    SUBCASE("n = 0 gives identity Jacobian and zero variations") {
        const auto b = iterate_map(sm, x0, 0, pk, 2);
        CHECK((b.jacobian(0) - Mat::Identity(2, 2)).norm() == 0.0);
        CHECK(b.variation(1, 0).norm() == 0.0);
    }
    SUBCASE("one-step Jacobian at the origin, state (p, x)") {
        const auto b = iterate_map(sm, x0, 1, {}, 0);
        Mat want(2, 2);
        want << 1, 1, 1, 2;
        CHECK((b.jacobian(1) - want).norm() == 0.0);
    }
    SUBCASE("Henon parameter variation matches differences in k") {
        const FieldSystem he = make_system("henon");
        const Perturbation pa = make_perturbation(he, "param:a");
        Vec h0(2);
        h0 << 0.1, 0.1;
        const int n = 5;
        const auto b = iterate_map(he, h0, n, pa, 1);
        auto endpoint = [&](double k) {
            return iterate_map(perturbed(he, pa.direction, k), h0, n, {}, 0).state(n);
        };
        CHECK(rel_err(b.variation(1, n), fd_in_k(endpoint, 1, 1e-5)) < 1e-6);
    }
}

TEST_CASE("integration failure paths") {
    // step-size collapse at a movable singularity
    auto rhs = [](double t, const Vec& y, Vec& dy) {
        dy.resize(1);
        dy[0] = y[0] / (1.0 - t);
    };
    Vec one(1);
    one << 1.0;
    CHECK_THROWS_AS(integrate_ode(rhs, one, 0.0, 2.0), IntegrationError);

    // a perturbation strong enough to null the toroidal component makes the
    // reduced system undefined there
    const FieldSystem tok = make_system("model-toroidal");
    const Perturbation hp =
        make_perturbation(tok, "potential-harmonic", {{"m", 2}, {"n", 1}, {"amp", 1e-2}});
    const FieldSystem broken = perturbed(tok, hp.direction, 300.0);
    Vec x(2);
    x << 4.0, 0.0;
    CHECK_THROWS_AS(broken.eval(x, kPi / 2), DomainError);

    Vec x0(2);
    x0 << 0.05, 0.0;
    CHECK_THROWS_AS(integrate_flow(make_system("standard-map"), x0, 0.0, 1.0),
                    std::invalid_argument);

    IntegratorOptions bad;
    bad.tol = {0.0, 1e-12};
    CHECK_THROWS_AS(integrate_flow(make_system("planar-rotation"), x0, 0.0, 1.0, bad),
                    std::invalid_argument);
}
