#ifndef ORBITSHIFT_CLI_HPP
#define ORBITSHIFT_CLI_HPP

#include <string>
#include <vector>

namespace orbitshift::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitVerify = 3;

/// Complete command-line entry point. args excludes the program name, e.g.
/// {"trace", "--config", "run.json", "--out", "results"}.
/// Subcommands: trace, poincare, find-cycle, shift, jacobian-shift, verify,
/// list-fields. On error a machine-readable JSON object is printed to
/// stderr (and copied to *error_json when given).
int run(const std::vector<std::string>& args, std::string* error_json = nullptr);

}  // namespace orbitshift::cli

#endif
