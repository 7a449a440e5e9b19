#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "helpers.hpp"
#include "orbitshift/cli.hpp"
#include "orbitshift/io.hpp"

using namespace orbitshift;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("orbitshift_test_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string write_config(const TempDir& dir, const std::string& name, const json& j) {
    const std::string p = dir.file(name);
    io::write_text(p, j.dump(2));
    return p;
}

int run_cli(std::initializer_list<std::string> args, std::string* err = nullptr) {
    return cli::run(std::vector<std::string>(args), err);
}

}  // namespace

TEST_CASE("unknown configuration keys are rejected with the offending name") {
    TempDir dir("badkey");
    const json cfg = {{"system", {{"id", "planar-rotation"}}},
                      {"perturbtion", {{"id", "zero"}}},
                      {"trace", {{"x0", {1.0, 0.0}}, {"t1", 1.0}}}};
    std::string err;
    const int code = run_cli({"trace", "--config", write_config(dir, "cfg.json", cfg), "--out",
                              dir.file("out")},
                             &err);
    CHECK(code == cli::kExitConfig);
    CHECK(err.find("perturbtion") != std::string::npos);
    const json je = json::parse(err);
    CHECK(je["error"]["kind"] == "config");
    CHECK(je["error"]["key"] == "perturbtion");
}

TEST_CASE("trace of the planar rotation lands on (0, 1) at t = pi/2") {
    TempDir dir("trace");
    const json cfg = {{"system", {{"id", "planar-rotation"}}},
                      {"trace",
                       {{"x0", {1.0, 0.0}}, {"t0", 0.0}, {"t1", kPi / 2}, {"samples", 5}}},
                      {"output", {{"dir", dir.file("out")}}}};
    REQUIRE(run_cli({"trace", "--config", write_config(dir, "cfg.json", cfg)}) == cli::kExitOk);

    const auto csv = testutil::parse_csv(io::read_text(dir.file("out/trace.csv")));
    REQUIRE(csv.header.size() >= 3);
    CHECK(csv.header[0] == "t");
    CHECK(csv.header[1] == "x0");
    REQUIRE(csv.rows.size() == 5);
    const auto& last = csv.rows.back();
    CHECK(std::abs(last[0] - kPi / 2) < 1e-15);
    CHECK(std::abs(last[1]) < 1e-9);
    CHECK(std::abs(last[2] - 1.0) < 1e-9);

    // manifest hash is carried by every artifact
    CHECK(csv.manifest.size() == 16);
    const json manifest = json::parse(io::read_text(dir.file("out/manifest.json")));
    CHECK(manifest["manifest_hash"] == csv.manifest);
    CHECK(manifest["version"] == std::string(kVersion));
}

TEST_CASE("tighter tolerance moves the ABC trace toward the cross-check reference") {
    TempDir dir("abctol");
    auto run_at = [&](double tol, const std::string& out) {
        const json cfg = {{"system", {{"id", "abc"}}},
                          {"trace", {{"x0", {0.1, 0.2, 0.3}}, {"t1", 2.0}, {"samples", 2}}},
                          {"output", {{"dir", dir.file(out)}}}};
        // tolerance overrides arrive through the command-line flags
        REQUIRE(run_cli({"trace", "--config", write_config(dir, out + ".json", cfg),
                         "--tol-rel", io::format_double(tol), "--tol-abs",
                         io::format_double(tol * 1e-2)}) == cli::kExitOk);
        const auto csv = testutil::parse_csv(io::read_text(dir.file(out + "/trace.csv")));
        Vec x(3);
        x << csv.rows.back()[1], csv.rows.back()[2], csv.rows.back()[3];
        return x;
    };
    const FieldSystem abc = make_system("abc");
    auto rhs = [&abc](double t, const Vec& y, Vec& dy) { dy = abc.eval(y, t); };
    Vec x0(3);
    x0 << 0.1, 0.2, 0.3;
    const Vec ref = rk4_integrate(rhs, x0, 0.0, 2.0, 200000);
    const double loose = (run_at(1e-6, "loose") - ref).norm();
    const double tight = (run_at(1e-11, "tight") - ref).norm();
    CHECK(tight < loose);
}

TEST_CASE("poincare sections") {
    SUBCASE("axis seed stays put") {
        TempDir dir("poincare_axis");
        const json cfg = {{"system", {{"id", "model-toroidal"}}},
                          {"poincare", {{"seeds", {{3.0, 0.0}}}, {"turns", 12}}},
                          {"output", {{"dir", dir.file("out")}}}};
        REQUIRE(run_cli({"poincare", "--config", write_config(dir, "cfg.json", cfg)}) ==
                cli::kExitOk);
        const auto csv = testutil::parse_csv(io::read_text(dir.file("out/poincare.csv")));
        REQUIRE(csv.rows.size() == 12);
        for (const auto& row : csv.rows) {
            CHECK(std::abs(row[2] - 3.0) < 1e-9);
            CHECK(std::abs(row[3]) < 1e-9);
            CHECK(row[4] == 1.0);
        }
    }
    SUBCASE("integrable standard map keeps p constant") {
        TempDir dir("poincare_k0");
        const json cfg = {{"system", {{"id", "standard-map"}, {"params", {{"K", 0.0}}}}},
                          {"poincare", {{"seeds", {{0.37, 0.1}}}, {"turns", 50}}},
                          {"output", {{"dir", dir.file("out")}}}};
        REQUIRE(run_cli({"poincare", "--config", write_config(dir, "cfg.json", cfg)}) ==
                cli::kExitOk);
        const auto csv = testutil::parse_csv(io::read_text(dir.file("out/poincare.csv")));
        REQUIRE(csv.rows.size() == 50);
        for (const auto& row : csv.rows) CHECK(row[2] == doctest::Approx(0.37).epsilon(1e-14));
    }
    SUBCASE("island seeds lock onto the n/m = 1/2 rotation number") {
        // structural check on the island chain: inside the island the
        // poloidal transit averages one half turn per toroidal turn
        const FieldSystem tok = make_system("model-toroidal");
        const Cycle& xc = testutil::model_xcycle();
        Vec seed = xc.sections[0].point;
        seed[1] += 0.03;  // inside the island, near the X-point
        const int turns = 40;
        IntegratorOptions io;
        io.tol = {1e-10, 1e-12};
        const Trajectory tr = integrate_flow(tok, seed, 0.0, turns * 2 * kPi, io);
        double theta = 0.0;
        double prev = std::atan2(seed[1], seed[0] - 3.0);
        const int per_turn = 64;
        for (int i = 1; i <= turns * per_turn; ++i) {
            const Vec x = tr.at(2 * kPi * i / per_turn);
            const double a = std::atan2(x[1], x[0] - 3.0);
            double d = a - prev;
            while (d > kPi) d -= 2 * kPi;
            while (d < -kPi) d += 2 * kPi;
            theta += d;
            prev = a;
        }
        const double iota = theta / (turns * 2 * kPi);
        CHECK(std::abs(std::abs(iota) - 0.5) < 0.02);
    }
    SUBCASE("seeds outside the domain flag the row and the run continues") {
        TempDir dir("poincare_exit");
        const json cfg = {{"system", {{"id", "model-toroidal"}}},
                          {"poincare", {{"seeds", {{-0.5, 0.0}, {3.0, 0.0}}}, {"turns", 4}}},
                          {"output", {{"dir", dir.file("out")}}}};
        REQUIRE(run_cli({"poincare", "--config", write_config(dir, "cfg.json", cfg)}) ==
                cli::kExitOk);
        const auto csv = testutil::parse_csv(io::read_text(dir.file("out/poincare.csv")));
        // the bad seed gets one flagged row; the axis still produces all turns
        REQUIRE(csv.rows.size() == 5);
        CHECK(csv.rows[0][0] == 0.0);
        CHECK(csv.rows[0][4] == 0.0);
        CHECK(std::isnan(csv.rows[0][2]));
        int ok_axis = 0;
        for (const auto& row : csv.rows)
            if (row[0] == 1.0 && row[4] == 1.0) ++ok_axis;
        CHECK(ok_axis == 4);
    }
}

TEST_CASE("find-cycle command and its structured degenerate error") {
    TempDir dir("cycle");
    const json good = {{"system", {{"id", "standard-map"}}},
                       {"cycle", {{"guess", {0.1, 0.1}}, {"m", 1}}},
                       {"output", {{"dir", dir.file("out")}}}};
    REQUIRE(run_cli({"find-cycle", "--config", write_config(dir, "good.json", good)}) ==
            cli::kExitOk);
    const json cyc = json::parse(io::read_text(dir.file("out/cycle.json")));
    CHECK(cyc["class"] == "X_cycle");
    const auto ribbon = testutil::parse_csv(io::read_text(dir.file("out/sections.csv")));
    CHECK(ribbon.rows.size() == 1);

    // unit multiplier: Newton cannot proceed, reported as a degenerate cycle
    const json degen = {{"system", {{"id", "standard-map"}, {"params", {{"K", 0.0}}}}},
                        {"cycle", {{"guess", {0.1, 0.3}}, {"m", 1}}},
                        {"output", {{"dir", dir.file("out2")}}}};
    std::string err;
    const int code =
        run_cli({"find-cycle", "--config", write_config(dir, "degen.json", degen)}, &err);
    CHECK(code == cli::kExitRuntime);
    CHECK(json::parse(err)["error"]["kind"] == "degenerate-cycle");
}

TEST_CASE("shift command writes per-section tables and a convergence report") {
    TempDir dir("shift");
    const Cycle& xc = testutil::model_xcycle();
    const json cfg = {
        {"system", {{"id", "model-toroidal"}}},
        {"perturbation",
         {{"id", "flux-harmonic"},
          {"params", {{"m", 1}, {"n", 1}, {"amp", 3e-3}}},
          {"k_list", {1e-1, 3e-2, 1e-2, 3e-3, 1e-3}}}},
        {"cycle",
         {{"guess", {xc.sections[0].point[0], xc.sections[0].point[1]}}, {"m", 2}}},
        {"shift", json::object()},
        {"output", {{"dir", dir.file("out")}}}};
    REQUIRE(run_cli({"shift", "--config", write_config(dir, "cfg.json", cfg)}) == cli::kExitOk);

    const auto table = testutil::parse_csv(io::read_text(dir.file("out/shift.csv")));
    CHECK(table.rows.size() == 8);
    CHECK(table.header[1] == "dxcyc_R");
    const json rep = json::parse(io::read_text(dir.file("out/shift_report.json")));
    CHECK(rep["convergence"]["pass"] == true);
    const double slope = rep["convergence"]["fitted_order"].get<double>();
    CHECK(slope > 1.8);
    CHECK(slope < 2.2);
    const auto residuals = testutil::parse_csv(io::read_text(dir.file("out/residuals.csv")));
    CHECK(residuals.rows.size() == 5);
}

TEST_CASE("jacobian-shift command emits the eigenvalue-drift table") {
    TempDir dir("jshift");
    const Cycle& xc = testutil::model_xcycle();
    const json cfg = {
        {"system", {{"id", "model-toroidal"}}},
        {"perturbation",
         {{"id", "flux-harmonic"}, {"params", {{"m", 1}, {"n", 1}, {"amp", 3e-3}}}}},
        {"cycle",
         {{"guess", {xc.sections[0].point[0], xc.sections[0].point[1]}}, {"m", 2}}},
        {"jacobian_shift", json::object()},
        {"output", {{"dir", dir.file("out")}}}};
    REQUIRE(run_cli({"jacobian-shift", "--config", write_config(dir, "cfg.json", cfg)}) ==
            cli::kExitOk);
    const auto table = testutil::parse_csv(io::read_text(dir.file("out/jacobian_shift.csv")));
    REQUIRE(table.rows.size() == 8);
    REQUIRE(table.header.size() == 9);  // angle + 4 matrix entries + 2 complex derivatives

    // the table must match the FD reference (per-unit-scale derivative)
    const Perturbation pert = testutil::model_pert();
    RelocateOptions ropts;
    ropts.first_order_shift = cycle_shift_section(xc, pert, 0);
    const double k = 1e-4;
    const Cycle cp = relocate_cycle(xc.system, pert, +k, xc, ropts);
    const Cycle cm = relocate_cycle(xc.system, pert, -k, xc, ropts);
    for (int i = 0; i < 2; ++i) {
        const auto fd =
            (cp.sections[0].eig.values[i] - cm.sections[0].eig.values[i]) / (2 * k);
        const std::complex<double> got(table.rows[0][5 + 2 * i], table.rows[0][6 + 2 * i]);
        CHECK(std::abs(got - fd) / std::abs(fd) < 1e-4);
    }
}

TEST_CASE("identical configuration produces byte-identical outputs") {
    TempDir dir("determinism");
    const json cfg = {{"system", {{"id", "model-toroidal"}}},
                      {"trace", {{"x0", {3.4, 0.1}}, {"t1", 12.0}, {"samples", 64}}},
                      {"output", {{"dir", "PLACEHOLDER"}}}};
    for (const std::string out : {"a", "b"}) {
        json c = cfg;
        c["output"]["dir"] = dir.file(out);
        REQUIRE(run_cli({"trace", "--config", write_config(dir, out + ".json", c)}) ==
                cli::kExitOk);
    }
    CHECK(io::read_text(dir.file("a/trace.csv")) == io::read_text(dir.file("b/trace.csv")));
    CHECK(io::read_text(dir.file("a/manifest.json")) ==
          io::read_text(dir.file("b/manifest.json")));
}

TEST_CASE("verify subset runs and reports deterministically") {
    TempDir dir("verify8");
    const json cfg = {{"verify", {{"criteria", {8}}}}, {"output", {{"dir", dir.file("a")}}}};
    REQUIRE(run_cli({"verify", "--config", write_config(dir, "cfg.json", cfg)}) == cli::kExitOk);
    json c2 = cfg;
    c2["output"]["dir"] = dir.file("b");
    REQUIRE(run_cli({"verify", "--config", write_config(dir, "cfg2.json", c2)}) == cli::kExitOk);
    CHECK(io::read_text(dir.file("a/verify_report.json")) ==
          io::read_text(dir.file("b/verify_report.json")));
    const json rep = json::parse(io::read_text(dir.file("a/verify_report.json")));
    CHECK(rep["all_pass"] == true);
    CHECK(rep["criteria"][0]["id"] == 8);
}

TEST_CASE("list-fields and usage errors") {
    CHECK(run_cli({"list-fields"}) == cli::kExitOk);
    std::string err;
    CHECK(run_cli({"no-such-command"}, &err) == cli::kExitConfig);
    CHECK(run_cli({"trace"}, &err) == cli::kExitConfig);  // --config required
}

TEST_CASE("formatted doubles round-trip exactly") {
    for (double v : {kPi, 1.0 / 3.0, 2.718281828459045, 1e-17, -0.0, 123456789.123456789}) {
        CHECK(std::stod(io::format_double(v)) == v);
    }
}
