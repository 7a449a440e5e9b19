#ifndef ORBITSHIFT_CYCLES_HPP
#define ORBITSHIFT_CYCLES_HPP

#include "orbitshift/propagate.hpp"

namespace orbitshift {

enum class CycleClass { XCycle, OCycle, Degenerate, NonhyperbolicOther };

std::string to_string(CycleClass c);

/// Eigen-decomposition with a reproducible convention: eigenvalues sorted by
/// descending modulus (then descending real, then imaginary part), vectors
/// unit length with the first non-negligible component made real positive.
struct EigenData {
    CVec values;
    CMat vectors;  // columns
};

EigenData eigen_decompose(const Mat& m);

struct CycleSection {
    double angle = 0;  // phi along the cycle (toroidal), iterate index (map)
    double time = 0;   // time offset from section 0 (flows; == angle otherwise)
    Vec point;
    Mat jac_full;  // full-period Jacobian starting at this section
    EigenData eig;
};

struct NewtonOptions {
    double tol = 1e-10;
    int max_iter = 50;
    int max_halvings = 20;
    Tolerances integ_tol{1e-12, 1e-14};
    int n_sections = 8;        // toroidal/flow section count (maps use m)
    double section_angle = 0;  // phi of section 0 (toroidal)
};

/// A closed orbit: a field line closing on itself after m toroidal turns, a
/// period-m orbit of a map, or (via embed_cycle_3d) a closed orbit of a 3-D
/// flow. Immutable after construction.
struct Cycle {
    FieldSystem system;
    int m = 1;
    double period = 0;  // 2 pi m (toroidal), m (map), T (flow)
    std::vector<CycleSection> sections;
    CycleClass cls = CycleClass::NonhyperbolicOther;
    double closure_residual = 0;
    std::vector<double> newton_residuals;
    Tolerances integ_tol;

    SystemKind kind() const { return system.kind(); }
    int dim() const { return system.dim(); }
    int n_sections() const { return static_cast<int>(sections.size()); }
};

/// Newton shooting on F(x) = P^m(x) - x with the integrated Jacobian
/// DP^m - I and residual-monotone step damping. Supports toroidal systems
/// and maps; cycles of general flows are built with embed_cycle_3d.
Cycle find_cycle(const FieldSystem& system, const Vec& guess, int m,
                 const NewtonOptions& opts = {});

/// Direct recomputation of the full-period Jacobian from the given section
/// (independent of the values stored in the cycle).
Mat full_period_jacobian(const Cycle& cycle, int section_index);

/// Propagate the full-period Jacobian along the cycle by integrating the
/// commutator equation d/dphi DP^m = [A, DP^m] (d/dt DX_T = [grad B, DX_T]
/// for flow cycles) from section 0; returns one matrix per section.
std::vector<Mat> evolve_jacobian(const Cycle& cycle);

/// Hyperbolicity class from the stored section multipliers. For flow cycles
/// the unit eigenvalue along the field direction is removed first.
CycleClass classify_cycle(const Cycle& cycle);

/// Classification of section-map multipliers (no flow direction involved).
CycleClass classify_multipliers(const CVec& lambdas, double tol = 1e-8);

/// Smallest m <= m_max whose closure residual |P^m(x) - x| is below tol;
/// 0 when none qualifies. m is never auto-detected elsewhere.
int detect_turn_count(const FieldSystem& system, const Vec& x, int m_max, double tol,
                      const NewtonOptions& opts = {});

/// Coarse closure-residual scan along the segment [a, b]: points where
/// |P^m(x) - x| has a local minimum, used to seed find_cycle for island
/// chains (symmetry lines are the usual choice of segment).
std::vector<Vec> line_scan(const FieldSystem& system, int m, const Vec& a, const Vec& b,
                           int samples, const NewtonOptions& opts = {});

/// Lift a toroidal cycle to the corresponding closed orbit of the 3-D
/// Cartesian flow dx/dt = B(x): recovers the period T, the section points
/// and the time-T monodromy DX_T per section.
Cycle embed_cycle_3d(const Cycle& toroidal_cycle);

/// Cycle record serialized as JSON (sections, row-major Jacobians,
/// eigenvalues as re/im pairs, eigenvectors, class).
std::string cycle_to_json(const Cycle& cycle);

}  // namespace orbitshift

#endif
