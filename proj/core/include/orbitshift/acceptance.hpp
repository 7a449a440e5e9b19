#ifndef ORBITSHIFT_ACCEPTANCE_HPP
#define ORBITSHIFT_ACCEPTANCE_HPP

#include <string>
#include <utility>
#include <vector>

namespace orbitshift::acceptance {

/// One verification criterion. `metrics` and `detail` are deterministic
/// (identical across runs on one machine); wall-clock goes to `seconds`
/// only and is never serialized, so reports are byte-reproducible.
struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    double seconds = 0;
    double budget_seconds = 0;
    std::vector<std::pair<std::string, double>> metrics;
    std::string detail;
};

struct SuiteResult {
    std::vector<CriterionResult> results;
    bool all_pass = false;
};

/// All criterion ids, in order.
const std::vector<int>& criterion_ids();

/// Run the given criteria (empty = all). Results come back in id order.
SuiteResult run_criteria(const std::vector<int>& ids = {}, int threads = 1);

/// Deterministic JSON report (pass flags, metrics; no timings).
std::string report_json(const SuiteResult& suite);

/// One console line per criterion, e.g. "[PASS] 3 commutator-evolution ...".
std::string console_line(const CriterionResult& r);

}  // namespace orbitshift::acceptance

#endif
