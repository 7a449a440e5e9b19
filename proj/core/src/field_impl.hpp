#ifndef ORBITSHIFT_SRC_FIELD_IMPL_HPP
#define ORBITSHIFT_SRC_FIELD_IMPL_HPP

#include <map>
#include <string>

#include "jets.hpp"
#include "orbitshift/fields.hpp"

namespace orbitshift::detail {

// Jets of the cylindrical components with respect to (R, Z) at fixed phi,
// plus the phi-derivatives of the component values (for divergence and for
// the Cartesian embedding).
struct CylJet {
    ScalarJet2 BR, BZ, Bphi;
    Eigen::Vector3d dphi = Eigen::Vector3d::Zero();
};

class FieldImpl {
public:
    virtual ~FieldImpl() = default;

    virtual SystemKind kind() const = 0;
    virtual int dim() const = 0;
    virtual int analytic_order() const = 0;
    virtual const std::string& id() const = 0;
    virtual const std::map<std::string, double>& params() const;

    // Value of the (reduced) field / map. Implemented for all kinds.
    virtual Vec value(const Vec& x, double t) const = 0;

    // Analytic spatial derivatives; only called with order <= analytic_order().
    virtual void fill_analytic(const Vec& x, double t, int order,
                               DerivativeTensors& out) const;

    // Toroidal systems: component jets at (R, Z, phi). order <= 3 refers to
    // the (R, Z) derivatives carried by the jets.
    virtual CylJet cyl_jet(double R, double Z, double phi) const;
};

// Shared base for toroidal backends: value/fill_analytic are derived from
// cyl_jet via the quotient rule.
class ToroidalImpl : public FieldImpl {
public:
    SystemKind kind() const final { return SystemKind::FlowToroidal; }
    int dim() const final { return 2; }
    Vec value(const Vec& x, double t) const final;
    void fill_analytic(const Vec& x, double t, int order,
                       DerivativeTensors& out) const final;
};

// Reduced-field jets from cylindrical jets: f_i = R * u_i / w.
void reduce_toroidal(const CylJet& cj, double R, int order, DerivativeTensors& out);

void check_toroidal_domain(double R, double bphi, const std::string& id);

}  // namespace orbitshift::detail

#endif
