// Acceptance suite: runs every verification criterion at its pinned
// tolerance, prints one pass/fail line each, and exits nonzero on failure.
// Criterion 9 drives the verify command twice and compares the reports
// byte for byte.

#include <json.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>

#include "orbitshift/acceptance.hpp"
#include "orbitshift/cli.hpp"
#include "orbitshift/io.hpp"

namespace fs = std::filesystem;
using namespace orbitshift;

namespace {

acceptance::CriterionResult run_cli_determinism() {
    acceptance::CriterionResult r;
    r.id = 9;
    r.name = "cli-determinism";
    r.budget_seconds = 600.0;
    const auto t0 = std::chrono::steady_clock::now();

    const fs::path base = fs::temp_directory_path() / "orbitshift_acceptance_c9";
    fs::remove_all(base);
    fs::create_directories(base);
    const fs::path cfg_path = base / "verify.json";
    io::write_text(cfg_path.string(), "{}\n");

    bool ok = true;
    std::string first;
    for (const std::string out : {"run1", "run2"}) {
        const int code = cli::run({"verify", "--config", cfg_path.string(), "--out",
                                   (base / out).string()});
        if (code != cli::kExitOk) {
            ok = false;
            r.detail += "verify exit code " + std::to_string(code) + " in " + out + "; ";
        }
    }
    if (ok) {
        for (const std::string name : {"verify_report.json", "manifest.json"}) {
            const std::string a = io::read_text((base / "run1" / name).string());
            const std::string b = io::read_text((base / "run2" / name).string());
            if (a != b) {
                ok = false;
                r.detail += name + " differs between runs; ";
            }
        }
    }
    fs::remove_all(base);
    r.pass = ok;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

}  // namespace

int main() {
    const auto suite = acceptance::run_criteria();
    bool all = true;
    for (const auto& r : suite.results) {
        std::printf("%s\n", acceptance::console_line(r).c_str());
        all = all && r.pass;
        if (r.seconds > r.budget_seconds) {
            std::printf("[FAIL] %d %s exceeded its %.0fs budget\n", r.id, r.name.c_str(),
                        r.budget_seconds);
            all = false;
        }
    }

    const auto c9 = run_cli_determinism();
    std::printf("%s\n", acceptance::console_line(c9).c_str());
    all = all && c9.pass;

    std::printf("%s\n", all ? "acceptance: ALL CRITERIA PASS" : "acceptance: FAILURES PRESENT");
    return all ? 0 : 1;
}
