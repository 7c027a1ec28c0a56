#pragma once

#include <vector>

#include "sgf/geometry.hpp"
#include "sgf/ode.hpp"

namespace sgf {

/// Phase-space state of the lifted geodesic system.  x is the chart position,
/// y its momentum/velocity covector, q the momentum conjugate to y and p the
/// momentum conjugate to x.  Packing order is (x, y, q, p) throughout.
struct CotangentState {
    Vec x, y, q, p;

    int dim() const { return int(x.size()); }
    static CotangentState zero(int d) {
        return {Vec::Zero(d), Vec::Zero(d), Vec::Zero(d), Vec::Zero(d)};
    }
    Vec pack() const;
    static CotangentState unpack(const Vec& v);
};

struct FlowOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double blowup_norm = 1e6;
    std::vector<double> sample_times;  // extra trajectory sample requests
};

struct FlowResult {
    CotangentState final;
    std::vector<double> times;
    std::vector<CotangentState> trajectory;
    double energy_drift = 0;  // max |H(t) - H(0)| over accepted steps
    long steps = 0;
    OdeSolution dense;  // continuous extension of the packed state
};

struct VariationalResult {
    FlowResult flow;
    Mat jac;     // d(X,Y,Q,P)(t) / d(x0,y0,q0,p0), 4d x 4d
    double J;    // det of d(X,Y)/d(q0,p0)
    OdeSolution dense;  // packed [state | jacobian] system
};

/// H = 1/2 (g q, q) - (G y, p) + 1/2 (d/dx (G y, y), q).
double hamiltonian(const MetricModel& m, const CotangentState& s);

/// Canonical Hamilton equations: xdot = dH/dp, ydot = dH/dq, qdot = -dH/dy,
/// pdot = -dH/dx.  Flat specialization: xdot=-y, ydot=q, qdot=p, pdot=0.
CotangentState hamiltonian_rhs(const MetricModel& m, const CotangentState& s);

/// Jacobian of hamiltonian_rhs with respect to the packed state (4d x 4d).
Mat hamiltonian_rhs_jacobian(const MetricModel& m, const CotangentState& s);

FlowResult integrate_flow(const MetricModel& m, const CotangentState& s0, double t,
                          const FlowOptions& opts = {});

/// Integrates the flow together with its linearization.  jac(0) = identity.
VariationalResult variational_flow(const MetricModel& m, const CotangentState& s0, double t,
                                   const FlowOptions& opts = {});

/// Flow linearized only in the initial momenta (q0, p0): a 4d x 2d system,
/// enough for shooting and for J, at roughly half the cost of the full
/// variational matrix.
struct ZetaVariational {
    OdeSolution dense;  // packed [state | d(state)/d(q0,p0)]
    CotangentState final;
    Mat dXY_dzeta;  // 2d x 2d
    double J = 0;
};

ZetaVariational variational_flow_zeta(const MetricModel& m, const CotangentState& s0,
                                      double t, const FlowOptions& opts = {});

struct ScalingReport {
    // log-log slopes of |dX/dp0|, |dX/dq0|, |dY/dp0|, |dY/dq0| versus t
    double slope_dX_dp0 = 0, slope_dX_dq0 = 0, slope_dY_dp0 = 0, slope_dY_dq0 = 0;
    // fitted constants for the |x(t)-x0| <= k t (1 + c/t) family of bounds
    double k_x = 0, k_y = 0, k_q = 0, k_p = 0;
    int blown_up = 0;  // samples rejected by the blow-up guard
    std::vector<double> t_grid;
};

/// Samples initial data on the boundary of the scaled polydisk
/// |y0|=c/t, |q0|=c^2/t^2, |p0|=c^3/t^3 and checks the short-time bounds and
/// the leading powers t^3/6, t^2/2, t^2/2, t of the flow derivatives.
ScalingReport check_scaling_hypothesis(const MetricModel& m, const Vec& x0, double c,
                                       const std::vector<double>& t_grid,
                                       const FlowOptions& opts = {});

}  // namespace sgf
