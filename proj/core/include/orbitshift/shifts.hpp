#ifndef ORBITSHIFT_SHIFTS_HPP
#define ORBITSHIFT_SHIFTS_HPP

#include "orbitshift/cycles.hpp"

namespace orbitshift {

/// First variation of the full-period return over the cycle: deltaP^m for
/// toroidal systems and maps, deltaX_T for flow cycles. Integrates the
/// order-1 variational system from the section point over one full period
/// with zero initial variation; per unit perturbation scale.
Vec delta_return_map(const Cycle& cycle, const Perturbation& pert, int section);

/// First-order shift of the cycle point at a section:
///   delta x_cyc = -(DP^m - I)^{-1} deltaP^m.
/// Requires a non-degenerate cycle (no unit multiplier); toroidal and map
/// cycles only.
Vec cycle_shift_section(const Cycle& cycle, const Perturbation& pert, int section);

/// Shift of a flow cycle in the local plane perpendicular to the orbit:
///   delta_perp x_cyc = [I - (I - bb^T) DX_T]^{-1} (I - bb^T) deltaX_T,
/// evaluated at every stored section point; the result is orthogonal to the
/// local field direction b.
std::vector<Vec> cycle_shift_perpendicular(const Cycle& flow_cycle, const Perturbation& pert);

/// Propagate the full-period return variation along the cycle by the linear
/// inhomogeneous equation
///   d/dphi deltaP^m = A deltaP^m - (DP^m - I) Delta(R Bpol/Bphi)
/// (for flow cycles, with A -> grad B and the raw DeltaB). Seeded from a
/// direct computation at section 0; returns one value per stored section
/// plus a final closing value at the full period, which must reproduce the
/// seed (periodicity of the shifted cycle).
std::vector<Vec> evolve_delta_return(const Cycle& cycle, const Perturbation& pert);

/// Propagate the cycle-point shift along a toroidal cycle:
///   d/dphi delta x_cyc = A delta x_cyc + Delta(R Bpol/Bphi).
/// Same convention as evolve_delta_return: n_sections values plus the
/// closing value.
std::vector<Vec> evolve_cycle_shift(const Cycle& cycle, const Perturbation& pert);

/// Dense record of the joint state [x | delta x_cyc] over one full period of
/// a toroidal cycle (the integral curve behind evolve_cycle_shift).
Trajectory evolve_cycle_shift_trajectory(const Cycle& cycle, const Perturbation& pert);

/// Total derivative of the full-period Jacobian with respect to the
/// perturbation strength, including the convection by the cycle shift:
///   d/dphi dDP = dA * DP + A * dDP,  dDP(phi_s) = 0,
///   dA = (explicit perturbation of A) + (delta x_cyc . grad) A,
/// integrated over m turns from every stored section. Eigenvalue derivatives
/// come from first-order perturbation theory with left/right eigenvectors.
/// Toroidal cycles use the equation above; map cycles use the discrete
/// product rule.
struct JacobianDerivative {
    std::vector<double> angles;
    std::vector<Mat> ddp;        // per-section (DeltaB . d/dB) DP^m
    std::vector<CVec> eig_derivs;  // per-section d lambda_i / dk
};

JacobianDerivative jacobian_total_derivative(const Cycle& cycle, const Perturbation& pert);

/// Assembled per-section shift record (per unit perturbation scale).
/// delta_xcyc holds delta x_cyc (toroidal/map) or delta_perp x_cyc (flows).
struct CycleShift {
    std::vector<double> angles;
    std::vector<Vec> delta_xcyc;
    std::vector<Vec> delta_return;
};

CycleShift compute_cycle_shift(const Cycle& cycle, const Perturbation& pert);

/// Experimental, maps only: d^2 x_cyc / dk^2 at k = 0, the curvature of the
/// periodic-point path under the perturbation. Estimated by Newton-refining
/// the first-order Taylor prediction at +/- k_step and taking the second
/// central difference; no closed form is provided.
Vec map_cycle_shift_curvature(const Cycle& cycle, const Perturbation& pert,
                              double k_step = 1e-3);

}  // namespace orbitshift

#endif
