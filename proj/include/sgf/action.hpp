#pragma once

#include "sgf/bvp.hpp"

namespace sgf {

/// Two-point function S with its derivative identities:
/// grad_z = (dS/dx, dS/dy) = (p(t), q(t)), grad_z0 = (-p0, -q0).
struct TwoPointAction {
    double S = 0;
    Vec grad_z;    // 2d: (p(t), q(t))
    Vec grad_z0;   // 2d: (-p0, -q0)
    Mat hess_z;    // 2d x 2d, ordered (x, y)
    double vanvleck = 0;  // |det d^2 S / dz dz0| = 1/|J|
};

/// Quadrature of p x' + q y' - H along the converged characteristic
/// (composite Simpson on the integrator's accepted steps).
TwoPointAction two_point_action(const MetricModel& m, const BvpSolution& sol);

/// (hess_z, vanvleck) via the flow-Jacobian identity
/// Hess_z S = [d(P,Q)/dzeta] [d(X,Y)/dzeta]^{-1}.
std::pair<Mat, double> action_hessian(const MetricModel& m, const BvpSolution& sol);

/// Mixed Hessian d^2 S / dz dz0 assembled from the full variational Jacobian;
/// |det| of this equals 1/|J| (tested, not assumed).
Mat action_mixed_hessian(const MetricModel& m, const BvpSolution& sol);

/// |dS/dt + H(x, y, dS/dx, dS/dy)| / (1 + |H|) with a 4th-order central
/// difference in t and analytic gradients from the endpoint momenta.
double hj_residual(const MetricModel& m, double t, const Vec& x0, const Vec& y0,
                   const Vec& x, const Vec& y, double h_fd = 1e-4,
                   const BvpOptions& opts = {});

/// Piecewise curve (x, y)(tau) on a uniform time grid.
struct SampledCurve {
    std::vector<double> times;
    std::vector<Vec> x, y;
};

struct LagrangianOptions {
    double constraint_tol = 1e-5;  // pointwise bound on |x' + G(x) y|
};

/// Value of the action functional on an admissible curve: quadrature of
/// 1/2 (G w, w) with w = y' - 1/2 d/dx(G y, y); infinite (error) off the
/// constraint manifold x' = -G(x) y.
double lagrangian_functional(const MetricModel& m, const SampledCurve& curve, double t,
                             const LagrangianOptions& opts = {});

/// Weierstrass excess 1/2 (q1-q2, g(x)(q1-q2)); nonnegative for positive
/// definite g.  Depends on (x, q1-q2) only; the remaining arguments are kept
/// for the excess-function signature.
double weierstrass_excess(const MetricModel& m, const Vec& x, const Vec& y, const Vec& q1,
                          const Vec& p1, const Vec& q2, const Vec& p2);

/// Leading quadratic form 6|x-x0|^2/t^3 + 6 (x-x0).(y+y0)/t^2
/// + 2 (|y|^2 + y.y0 + |y0|^2)/t; equals S exactly in the flat case.
double quadratic_approx(double t, const Vec& x, const Vec& y, const Vec& x0, const Vec& y0);

/// S and J for one endpoint pair via the reduced (zeta-only) shooting system.
/// Half the cost of solve_bvp + two_point_action; used by kernel evaluation
/// and quadrature loops that do not need Hessian blocks.
struct ActionPoint {
    double S = 0;
    double J = 0;
    double residual = 0;
    int iterations = 0;
};
ActionPoint evaluate_action_fast(const MetricModel& m, double t, const Vec& x0,
                                 const Vec& y0, const Vec& x, const Vec& y,
                                 const BvpOptions& opts = {});

}  // namespace sgf
