#ifndef ORBITSHIFT_PROPAGATE_HPP
#define ORBITSHIFT_PROPAGATE_HPP

#include <array>
#include <functional>

#include "orbitshift/fields.hpp"
#include "orbitshift/types.hpp"

namespace orbitshift {

struct Tolerances {
    double rel = 1e-10;
    double abs = 1e-12;
};

struct IntegratorOptions {
    Tolerances tol;
    double h_init = 0.0;  // 0 = automatic
    long max_steps = 4'000'000;
};

/// Right-hand side dy/dt = f(t, y).
using OdeRhs = std::function<void(double, const Vec&, Vec&)>;

/// Solution of an ODE on [t_start, t_end] with a continuous interpolant.
/// Samples are the accepted integration steps; `at` evaluates the free
/// 4th-order interpolant of the embedded 5(4) pair and reproduces the
/// samples exactly at the nodes.
class Trajectory {
public:
    struct DenseSegment {
        double t0 = 0, h = 0;
        std::array<Vec, 5> c;
    };

    Trajectory() = default;
    Trajectory(std::vector<double> times, std::vector<Vec> states,
               std::vector<DenseSegment> segments = {});

    int dim() const { return times_.empty() ? 0 : static_cast<int>(states_[0].size()); }
    double t_start() const { return times_.front(); }
    double t_end() const { return times_.back(); }
    const std::vector<double>& times() const { return times_; }
    const std::vector<Vec>& states() const { return states_; }
    bool has_dense() const { return !segments_.empty(); }
    const std::vector<DenseSegment>& segments() const { return segments_; }

    /// Dense evaluation anywhere inside [t_start, t_end].
    Vec at(double t) const;

private:
    std::vector<double> times_;
    std::vector<Vec> states_;
    std::vector<DenseSegment> segments_;
};

/// Adaptive Dormand-Prince 5(4) with dense output.
Trajectory integrate_ode(const OdeRhs& rhs, const Vec& y0, double t0, double t1,
                         const IntegratorOptions& opts = {});

/// Fixed-step classical RK4; the independent cross-check integrator.
Vec rk4_integrate(const OdeRhs& rhs, Vec y0, double t0, double t1, long n_steps);

/// Integrate dx/dt = B(x) (or dx_pol/dphi = R Bpol/Bphi) from x0 over
/// [t0, t1].
Trajectory integrate_flow(const FieldSystem& system, const Vec& x0, double t0, double t1,
                          const IntegratorOptions& opts = {});

/// Trajectory together with the Jacobian DX(t) (w.r.t. the initial point)
/// and the directional field variations of order 1..3, all per unit
/// perturbation scale and all evaluated on the unperturbed orbit:
///   DX(t0) = I, var_j(t0) = 0.
/// For maps the grid is the iterate index and there is no interpolant.
class VariationBundle {
public:
    VariationBundle() = default;
    VariationBundle(FieldSystem system, int order, Trajectory augmented);  // flows
    VariationBundle(FieldSystem system, int order, std::vector<Vec> states);  // maps

    const FieldSystem& system() const { return system_; }
    int dim() const { return dim_; }
    int order() const { return order_; }
    bool is_map() const { return is_map_; }
    const std::vector<double>& grid() const;

    Vec state(double t) const;
    Mat jacobian(double t) const;
    /// j-th variation (1..order)
    Vec variation(int j, double t) const;

    /// The base orbit as a stand-alone trajectory (dense for flows).
    Trajectory base() const;

    /// X + k var1 + k^2/2 var2 + k^3/6 var3, truncated at `order`, on the
    /// bundle's grid (dense for flows).
    Trajectory taylor_shift(double k, int order) const;

    const Trajectory& augmented() const { return aug_; }

private:
    Vec slice(const Vec& y, int block) const;  // block 0 = x, 2.. = variations
    FieldSystem system_;
    int dim_ = 0;
    int order_ = 0;
    bool is_map_ = false;
    Trajectory aug_;                  // flows: flattened [x | DX | v1 | v2 | v3]
    std::vector<double> map_grid_;    // maps
    std::vector<Vec> map_states_;
};

/// Simultaneous integration of the orbit, its Jacobian and the variation
/// hierarchy of the given order (0..3) under the perturbation direction.
/// The whole augmented state is error-controlled as one system.
VariationBundle integrate_variations(const FieldSystem& system, const Vec& x0, double t0,
                                     double t1, const Perturbation& pert, int order,
                                     const IntegratorOptions& opts = {});

/// Discrete counterpart for maps: n iterations of the map together with the
/// Jacobian products and the variation recursions.
VariationBundle iterate_map(const FieldSystem& system, const Vec& x0, long n,
                            const Perturbation& pert, int order);

/// Free-function form of VariationBundle::taylor_shift.
Trajectory taylor_shift(const VariationBundle& bundle, double k, int order);

}  // namespace orbitshift

#endif
