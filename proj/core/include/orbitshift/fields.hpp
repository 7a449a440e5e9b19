#ifndef ORBITSHIFT_FIELDS_HPP
#define ORBITSHIFT_FIELDS_HPP

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "orbitshift/types.hpp"

namespace orbitshift {

enum class SystemKind { FlowAutonomous, FlowToroidal, Map };

enum class DerivativeMode { Analytic, FiniteDifference };

/// Spatial derivative tensors of a field at one point:
///   grad(i,j)      = d F_i / dx_j
///   hess(i,j,k)    = d2 F_i / dx_j dx_k        (order >= 2)
///   third(i,j,k,l) = d3 F_i / dx_j dx_k dx_l   (order >= 3)
/// For toroidal systems these are derivatives of the reduced section field
/// R*Bpol/Bphi with respect to (R, Z); grad is then the 2x2 matrix usually
/// written A(R, Z, phi).
struct DerivativeTensors {
    Vec value;
    Mat grad;
    Tensor3 hess;
    Tensor4 third;
    int order = 0;
};

namespace detail {
class FieldImpl;
}

/// A dynamical system: an autonomous flow dx/dt = B(x), a toroidal field
/// traced in the azimuthal angle dx_pol/dphi = R*Bpol/Bphi, or a map
/// x(n+1) = P(x(n)). Immutable after construction; cheap to copy and safe
/// to share across threads.
class FieldSystem {
public:
    FieldSystem() = default;
    explicit FieldSystem(std::shared_ptr<const detail::FieldImpl> impl,
                         DerivativeMode mode = DerivativeMode::Analytic);

    bool valid() const { return impl_ != nullptr; }
    SystemKind kind() const;
    /// State dimension: N for autonomous flows/maps, 2 for toroidal systems.
    int dim() const;
    /// Highest derivative order available analytically (0 = value only).
    int analytic_order() const;
    DerivativeMode derivative_mode() const { return mode_; }
    const std::string& id() const;
    const std::map<std::string, double>& params() const;

    /// Field value at x. `t` is the time for flows (ignored when autonomous),
    /// the angle phi for toroidal systems, and ignored for maps. Toroidal
    /// systems return the reduced 2-vector R*Bpol/Bphi.
    Vec eval(const Vec& x, double t = 0.0) const;

    /// Spatial derivatives up to `order` (1..3). Falls back to central finite
    /// differences when the backend has no analytic formula for the requested
    /// order or when the system was built in FiniteDifference mode.
    DerivativeTensors derivatives(const Vec& x, int order, double t = 0.0) const;

    /// Toroidal systems only: the raw cylindrical components (B_R, B_Z, B_phi).
    Eigen::Vector3d cylindrical_field(double R, double Z, double phi) const;

    const std::shared_ptr<const detail::FieldImpl>& impl() const { return impl_; }

private:
    std::shared_ptr<const detail::FieldImpl> impl_;
    DerivativeMode mode_ = DerivativeMode::Analytic;
};

/// A perturbation direction with a scalar strength: the perturbed system is
/// B + scale * direction. All first-order outputs in this library are
/// reported per unit scale; `scale` is applied when comparing against
/// finitely perturbed systems.
struct Perturbation {
    FieldSystem direction;
    double scale = 1.0;
};

struct CatalogEntry {
    std::string id;
    SystemKind kind;
    int dim;
    std::map<std::string, double> defaults;
    std::string summary;
};

/// Builtin analytic systems addressable by string id.
const std::vector<CatalogEntry>& field_catalog();

/// Instantiate a catalog system. Unknown parameter names are rejected.
FieldSystem make_system(const std::string& id,
                        const std::map<std::string, double>& params = {},
                        DerivativeMode mode = DerivativeMode::Analytic);

struct PerturbationCatalogEntry {
    std::string id;
    std::string applies_to;  // "flow", "toroidal", "map", "any"
    std::map<std::string, double> defaults;
    std::string summary;
};

const std::vector<PerturbationCatalogEntry>& perturbation_catalog();

/// Instantiate a perturbation direction for `base`. Ids of the form
/// "param:<name>" request the analytic parameter derivative dB/d<name> of
/// the base system.
Perturbation make_perturbation(const FieldSystem& base, const std::string& id,
                               const std::map<std::string, double>& params = {},
                               double scale = 1.0);

/// The perturbed system base + pert.scale * pert.direction. For toroidal
/// systems the combination happens at the level of the cylindrical
/// components, before the reduction by Bphi.
FieldSystem perturbed(const FieldSystem& base, const Perturbation& pert);
FieldSystem perturbed(const FieldSystem& base, const FieldSystem& direction, double k);

/// View a toroidal system (or a toroidal perturbation direction) as a 3-D
/// autonomous flow in Cartesian coordinates, dx/dt = B(x). Analytic to first
/// order; higher derivatives fall back to finite differences.
FieldSystem embed_cartesian(const FieldSystem& toroidal);

/// First directional variation of the reduced field, per unit scale:
///   Delta(R*Bpol/Bphi) = R*DeltaBpol/Bphi - R*Bpol*DeltaBphi/Bphi^2.
Vec delta_reduced_field(const FieldSystem& system, const Perturbation& pert,
                        const Vec& x, double phi = 0.0);

/// Divergence of the field as a vector field in physical space. For toroidal
/// systems this includes the cylindrical metric terms; maps are rejected.
double divergence(const FieldSystem& system, const Vec& x, double t = 0.0);

/// Pointwise data describing how a perturbation direction enters the
/// variational equations, per unit scale:
///   delta  - DeltaB (autonomous/map) or Delta(R*Bpol/Bphi) (toroidal)
///   grad   - spatial gradient of delta                  (order >= 2)
///   hess   - spatial second derivatives of delta        (order >= 3)
///   delta2 - second k-derivative of the reduced field along B + k*DeltaB
///            (nonzero only for toroidal systems, where the reduction is
///            nonlinear in the field)
struct PerturbationJet {
    Vec delta;
    Mat grad;
    Tensor3 hess;
    Vec delta2;
    int order = 1;
};

PerturbationJet perturbation_jet(const FieldSystem& base, const FieldSystem& direction,
                                 const Vec& x, double t, int order);

}  // namespace orbitshift

#endif
