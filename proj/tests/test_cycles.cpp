#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>
#include <cmath>
#include <numbers>

#include "helpers.hpp"

using namespace orbitshift;
using testutil::model_xcycle;
using testutil::rel_err;

TEST_CASE("standard map fixed point") {
    const FieldSystem sm = make_system("standard-map", {{"K", 1.0}});
    Vec guess(2);
    guess << 0.1, 0.1;
    const Cycle fp = find_cycle(sm, guess, 1);
    CHECK(fp.sections[0].point.norm() < 1e-10);
    CHECK(fp.closure_residual <= 1e-10);
    Mat want(2, 2);
    want << 1, 1, 1, 2;
    CHECK(rel_err(fp.sections[0].jac_full, want) < 1e-12);
    CHECK(fp.cls == CycleClass::XCycle);

    // m = 2 at a fixed point: Jacobian is the square of the one-step one
    const Cycle fp2 = find_cycle(sm, guess, 2);
    CHECK(rel_err(fp2.sections[0].jac_full, Mat(want * want)) < 1e-12);
}

TEST_CASE("toroidal axis cycle") {
    const FieldSystem tok = make_system("model-toroidal");
    Vec guess(2);
    guess << 3.01, 0.0;
    const Cycle axis = find_cycle(tok, guess, 1);
    Vec want(2);
    want << 3.0, 0.0;
    CHECK((axis.sections[0].point - want).norm() < 1e-9);
    CHECK(axis.cls == CycleClass::OCycle);
    CHECK(std::abs(axis.sections[0].jac_full.determinant() - 1.0) < 1e-8);
}

TEST_CASE("island X-cycle from a symmetry-line scan") {
    const Cycle& xc = model_xcycle();
    CHECK(xc.cls == CycleClass::XCycle);
    CHECK(xc.closure_residual <= 1e-10);
    CHECK(xc.m == 2);

    SUBCASE("closure holds at every stored section") {
        IntegratorOptions io;
        io.tol = xc.integ_tol;
        for (int j = 0; j < xc.n_sections(); ++j) {
            const auto b = integrate_variations(xc.system, xc.sections[j].point,
                                                xc.sections[j].angle,
                                                xc.sections[j].angle + xc.period, {}, 0, io);
            CHECK((b.state(xc.sections[j].angle + xc.period) - xc.sections[j].point).norm() <=
                  1e-10);
        }
    }
    SUBCASE("multipliers agree across sections") {
        const CVec lam0 = xc.sections[0].eig.values;
        for (const auto& s : xc.sections)
            for (int i = 0; i < 2; ++i)
                CHECK(std::abs(s.eig.values[i] - lam0[i]) / std::abs(lam0[i]) < 1e-6);
    }
    SUBCASE("determinant is section-independent and unity") {
        for (const auto& s : xc.sections)
            CHECK(std::abs(s.jac_full.determinant() - 1.0) < 1e-6);
    }
    SUBCASE("newton converges quadratically near the solution") {
        const auto& r = xc.newton_residuals;
        bool checked = false;
        for (size_t i = 0; i + 1 < r.size(); ++i)
            if (r[i] <= 1e-4 && r[i + 1] > 1e-14) {
                CHECK(r[i + 1] <= 1e4 * r[i] * r[i]);
                checked = true;
            }
        CHECK(checked);
    }
}

TEST_CASE("full-period Jacobian recomputation and commutator evolution") {
    const Cycle& xc = model_xcycle();
    const auto evolved = evolve_jacobian(xc);
    for (int j = 0; j < xc.n_sections(); ++j) {
        const Mat direct = full_period_jacobian(xc, j);
        CHECK(rel_err(evolved[j], direct) < 1e-6);
        CHECK(rel_err(xc.sections[j].jac_full, direct) < 1e-6);
        const EigenData e = eigen_decompose(evolved[j]);
        for (int i = 0; i < 2; ++i)
            CHECK(std::abs(e.values[i] - xc.sections[0].eig.values[i]) /
                      std::abs(xc.sections[0].eig.values[i]) <
                  1e-8);
    }
}

TEST_CASE("commutator evolution is constant when A commutes with DP") {
    // axisymmetric field (no island): along the axis cycle A is a constant
    // rotation generator, so [A, DP] = 0 and DP stays put
    const FieldSystem tok = make_system("model-toroidal", {{"island_eps", 0.0}});
    Vec guess(2);
    guess << 3.0001, 0.0;
    const Cycle axis = find_cycle(tok, guess, 1);
    const auto evolved = evolve_jacobian(axis);
    for (const Mat& m : evolved) CHECK(rel_err(m, axis.sections[0].jac_full) < 1e-9);
}

TEST_CASE("classification") {
    CVec lam(2);
    lam << 1.94965374, 0.51291252;  // quoted X-cycle multiplier pair
    CHECK(classify_multipliers(lam) == CycleClass::XCycle);
    // consistency of the quoted pair with a unit determinant
    CHECK(std::abs(lam[0].real() * lam[1].real() - 1.0) < 3e-6);

    lam << std::polar(1.0, 0.3), std::polar(1.0, -0.3);
    CHECK(classify_multipliers(lam) == CycleClass::OCycle);

    lam << 1.0, 1.0;
    CHECK(classify_multipliers(lam) == CycleClass::Degenerate);

    lam << -1.0, -1.0;
    CHECK(classify_multipliers(lam) == CycleClass::NonhyperbolicOther);

    lam << 2.0, -1.0;
    CHECK(classify_multipliers(lam) == CycleClass::NonhyperbolicOther);
}

TEST_CASE("degenerate Newton solve is reported") {
    // K = 0 shear map: every (0, x) is fixed and DP - I is singular
    const FieldSystem sm = make_system("standard-map", {{"K", 0.0}});
    Vec guess(2);
    guess << 0.1, 0.3;
    CHECK_THROWS_AS(find_cycle(sm, guess, 1), DegenerateCycleError);
}

TEST_CASE("find_cycle rejects plain flows") {
    const FieldSystem abc = make_system("abc");
    CHECK_THROWS_AS(find_cycle(abc, Vec::Zero(3), 1), std::invalid_argument);
}

TEST_CASE("turn-count helper") {
    const Cycle& xc = model_xcycle();
    CHECK(detect_turn_count(xc.system, xc.sections[0].point, 4, 1e-8) == 2);
    Vec off(2);
    off << 3.2, 0.1;  // generic point: no closure up to m = 4
    CHECK(detect_turn_count(xc.system, off, 4, 1e-8) == 0);
}

TEST_CASE("3-D embedding of a toroidal cycle") {
    const Cycle& xc = model_xcycle();
    const Cycle c3 = embed_cycle_3d(xc);
    CHECK(c3.kind() == SystemKind::FlowAutonomous);
    CHECK(c3.cls == CycleClass::XCycle);
    CHECK(c3.closure_residual < 1e-9);

    // the time-T monodromy carries the reduced multipliers plus a unit
    // eigenvalue along the field direction
    const CVec lam3 = c3.sections[0].eig.values;
    const CVec lam2 = xc.sections[0].eig.values;
    CHECK(std::abs(lam3[0] - lam2[0]) / std::abs(lam2[0]) < 1e-7);
    CHECK(std::abs(lam3[2] - lam2[1]) / std::abs(lam2[1]) < 1e-7);
    CHECK(std::abs(lam3[1] - 1.0) < 1e-7);

    for (const auto& s : c3.sections) {
        const Vec b = c3.system.eval(s.point);
        CHECK((s.jac_full * b - b).norm() / b.norm() < 1e-6);
    }
}

TEST_CASE("eigen decomposition conventions") {
    Mat m(2, 2);
    m << 2.0, 1.0, 0.0, 0.5;
    const EigenData e = eigen_decompose(m);
    CHECK(e.values[0].real() == doctest::Approx(2.0));
    CHECK(e.values[1].real() == doctest::Approx(0.5));
    for (int i = 0; i < 2; ++i) {
        CHECK(e.vectors.col(i).norm() == doctest::Approx(1.0));
        // first significant component is real positive
        for (int r = 0; r < 2; ++r) {
            const auto c = e.vectors(r, i);
            if (std::abs(c) > 1e-9) {
                CHECK(c.real() > 0.0);
                CHECK(std::abs(c.imag()) < 1e-14);
                break;
            }
        }
        CHECK((m * e.vectors.col(i) - e.values[i] * e.vectors.col(i)).norm() < 1e-12);
    }
}

TEST_CASE("cycle JSON export") {
    const Cycle& xc = model_xcycle();
    const auto j = nlohmann::json::parse(cycle_to_json(xc));
    CHECK(j["class"] == "X_cycle");
    CHECK(j["m"] == 2);
    CHECK(j["sections"].size() == static_cast<size_t>(xc.n_sections()));
    CHECK(j["sections"][0]["jac_full"].size() == 4);  // row-major 2x2
    CHECK(j["sections"][0]["eigs"][0].contains("re"));
}
