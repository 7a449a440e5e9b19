#ifndef ORBITSHIFT_ORACLE_HPP
#define ORBITSHIFT_ORACLE_HPP

#include <functional>
#include <optional>

#include "orbitshift/shifts.hpp"

namespace orbitshift {

struct RelocateOptions {
    double newton_tol = 1e-12;  // 100x tighter than typical quantities under test
    /// Seed the perturbed Newton solve at point + k * first_order_shift when
    /// provided (helps at the large-k end of a ladder).
    std::optional<Vec> first_order_shift;
};

/// Brute-force reference: re-find the cycle in the finitely perturbed system
/// B + k * direction, seeded at the unperturbed cycle point, and recompute
/// the full-period Jacobian and eigen-data at the same section angles.
Cycle relocate_cycle(const FieldSystem& system, const Perturbation& pert, double k,
                     const Cycle& seed, const RelocateOptions& opts = {});

enum class FdScheme { Forward, Central };

/// Finite-difference estimate of d q / dk at k = 0 with a Richardson check:
/// the stencil is evaluated at steps k and k/2, `refined` is the Richardson
/// extrapolation, `error_estimate` the difference-based error bound, and
/// `observed_ratio` should approach 4 (central) or 2 (forward).
struct FdEstimate {
    Vec value;     // estimate at step k
    Vec refined;   // Richardson extrapolation of the k and k/2 estimates
    double error_estimate = 0;
    double observed_ratio = 0;
};

FdEstimate finite_difference(const std::function<Vec(double)>& quantity, FdScheme scheme,
                             double k);

/// Least-squares slope of log(residual) against log(k), with a symmetric 95%
/// half-width. Residuals at or below `floor` are excluded as roundoff;
/// fewer than 3 usable points is an error.
struct OrderFit {
    double slope = 0;
    double half_width = 0;
    double intercept = 0;
    int n_used = 0;
};

OrderFit fit_order(const std::vector<double>& k_list, const std::vector<double>& residuals,
                   double floor = 1e-12);

/// Per-k comparison of a first-order prediction against brute-force
/// relocation, with the fitted convergence order of the residual.
struct ShiftReport {
    std::string case_id;
    std::vector<double> k_list;
    std::vector<Vec> predicted;       // per k (absolute positions)
    std::vector<Vec> reference;       // per k
    std::vector<double> residuals;    // per k, NaN when the relocation failed
    std::vector<std::string> status;  // "ok" or the per-k failure reason
    OrderFit order;
    double slope_lo = 0, slope_hi = 0;
    bool pass = false;
};

/// Default ladder {1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4}.
const std::vector<double>& default_k_ladder();

/// Predicted section-0 cycle position x0 + k * delta x_cyc against the
/// relocated cycle, over the ladder; pass = fitted slope within
/// [slope_lo, slope_hi]. Relocation failures are recorded per k, not fatal.
ShiftReport shift_convergence_report(const Cycle& cycle, const Perturbation& pert,
                                     const std::vector<double>& k_list, double slope_lo = 1.8,
                                     double slope_hi = 2.2, int threads = 1);

}  // namespace orbitshift

#endif
