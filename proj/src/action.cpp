#include "sgf/action.hpp"

namespace sgf {

namespace {

// p x' + q y' - H from a state (the primes via the Hamiltonian vector field)
double action_integrand(const MetricModel& m, const CotangentState& s) {
    CotangentState ds = hamiltonian_rhs(m, s);
    return s.p.dot(ds.x) + s.q.dot(ds.y) - hamiltonian(m, s);
}

}  // namespace

std::pair<Mat, double> action_hessian(const MetricModel& m, const BvpSolution& sol) {
    const int d = int(sol.x0.size());
    const Mat& full = sol.variational.jac;
    Mat Mxy = full.block(0, 2 * d, 2 * d, 2 * d);  // d(X,Y)/d(q0,p0)
    Mat Mpq(2 * d, 2 * d);
    Mpq.topRows(d) = full.block(3 * d, 2 * d, d, 2 * d);     // dP/dzeta
    Mpq.bottomRows(d) = full.block(2 * d, 2 * d, d, 2 * d);  // dQ/dzeta

    double detJ = Mxy.determinant();
    const double floor = 0.5 * std::pow(sol.t, 4.0 * d) / std::pow(12.0, d);
    if (!(std::abs(detJ) > std::max(1e-300, floor)))
        throw SingularJacobian("action_hessian: |J| below threshold");
    Mat hess = Mpq * Mxy.inverse();
    (void)m;
    return {hess, 1.0 / std::abs(detJ)};
}

Mat action_mixed_hessian(const MetricModel& m, const BvpSolution& sol) {
    (void)m;
    const int d = int(sol.x0.size());
    const Mat& full = sol.variational.jac;
    // grad_z S = (P,Q)(t; z0, zeta(z, z0)); differentiate in z0 at fixed z:
    // dzeta/dz0 = -[d(X,Y)/dzeta]^{-1} d(X,Y)/dz0.
    Mat Mxy_zeta = full.block(0, 2 * d, 2 * d, 2 * d);
    Mat Mxy_z0 = full.block(0, 0, 2 * d, 2 * d);
    Mat Mpq_zeta(2 * d, 2 * d), Mpq_z0(2 * d, 2 * d);
    Mpq_zeta.topRows(d) = full.block(3 * d, 2 * d, d, 2 * d);
    Mpq_zeta.bottomRows(d) = full.block(2 * d, 2 * d, d, 2 * d);
    Mpq_z0.topRows(d) = full.block(3 * d, 0, d, 2 * d);
    Mpq_z0.bottomRows(d) = full.block(2 * d, 0, d, 2 * d);

    Mat dzeta_dz0 = -Mxy_zeta.partialPivLu().solve(Mxy_z0);
    return Mpq_z0 + Mpq_zeta * dzeta_dz0;
}

TwoPointAction two_point_action(const MetricModel& m, const BvpSolution& sol) {
    const int d = int(sol.x0.size());
    TwoPointAction act;

    // Simpson on the accepted steps of the variational solve, states from the
    // continuous extension.
    const int n = 4 * d;
    double S = 0;
    for (const auto& step : sol.variational.dense.dense()) {
        double t0 = step.t0, h = step.h;
        CotangentState s0 = CotangentState::unpack(step.eval(t0).head(n));
        CotangentState sm = CotangentState::unpack(step.eval(t0 + 0.5 * h).head(n));
        CotangentState s1 = CotangentState::unpack(step.eval(t0 + h).head(n));
        S += h / 6.0 *
             (action_integrand(m, s0) + 4.0 * action_integrand(m, sm) + action_integrand(m, s1));
    }
    act.S = S;

    const CotangentState& fin = sol.variational.flow.final;
    act.grad_z.resize(2 * d);
    act.grad_z.head(d) = fin.p;
    act.grad_z.tail(d) = fin.q;
    act.grad_z0.resize(2 * d);
    act.grad_z0.head(d) = -sol.p0;
    act.grad_z0.tail(d) = -sol.q0;

    auto [hess, vv] = action_hessian(m, sol);
    act.hess_z = hess;
    act.vanvleck = vv;
    return act;
}

double hj_residual(const MetricModel& m, double t, const Vec& x0, const Vec& y0,
                   const Vec& x, const Vec& y, double h_fd, const BvpOptions& opts) {
    if (!(h_fd > 1e-12)) throw DegenerateTime("hj_residual: t-step below 1e-12");
    if (!(t - 2 * h_fd > 0)) throw DegenerateTime("hj_residual: stencil leaves t > 0");

    auto S_at = [&](double tt) {
        BvpSolution s = solve_bvp(m, t + tt, x0, y0, x, y, opts);
        return two_point_action(m, s).S;
    };
    double dSdt = (S_at(-2 * h_fd) - 8 * S_at(-h_fd) + 8 * S_at(h_fd) - S_at(2 * h_fd)) /
                  (12 * h_fd);

    BvpSolution center = solve_bvp(m, t, x0, y0, x, y, opts);
    const CotangentState& fin = center.variational.flow.final;
    CotangentState probe = {x, y, fin.q, fin.p};
    double H = hamiltonian(m, probe);
    return std::abs(dSdt + H) / (1.0 + std::abs(H));
}

double lagrangian_functional(const MetricModel& m, const SampledCurve& curve, double t,
                             const LagrangianOptions& opts) {
    const size_t n = curve.times.size();
    if (n < 5 || curve.x.size() != n || curve.y.size() != n)
        throw ConfigError("lagrangian_functional: need >= 5 aligned samples");
    const int d = int(curve.x[0].size());
    const double dt = curve.times[1] - curve.times[0];
    for (size_t i = 1; i < n; ++i)
        if (std::abs(curve.times[i] - curve.times[i - 1] - dt) > 1e-9 * t)
            throw ConfigError("lagrangian_functional: non-uniform grid");

    auto deriv = [&](const std::vector<Vec>& f, size_t i) -> Vec {
        if (i >= 2 && i + 2 < n)
            return (f[i - 2] - 8 * f[i - 1] + 8 * f[i + 1] - f[i + 2]) / (12 * dt);
        if (i == 0)
            return (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * dt);
        if (i == 1)
            return (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * dt);
        if (i == n - 2)
            return (3 * f[n - 1] + 10 * f[n - 2] - 18 * f[n - 3] + 6 * f[n - 4] -
                    f[n - 5]) /
                   (12 * dt);
        return (25 * f[n - 1] - 48 * f[n - 2] + 36 * f[n - 3] - 16 * f[n - 4] +
                3 * f[n - 5]) /
               (12 * dt);
    };

    std::vector<double> integrand(n);
    for (size_t i = 0; i < n; ++i) {
        MetricJet jet = m.jet(curve.x[i]);
        Vec xdot = deriv(curve.x, i), ydot = deriv(curve.y, i);
        double cviol = (xdot + jet.G * curve.y[i]).lpNorm<Eigen::Infinity>();
        if (cviol > opts.constraint_tol)
            throw ConstraintViolated("curve leaves x' = -G y by " + std::to_string(cviol));
        Vec w = ydot;
        for (int k = 0; k < d; ++k) w[k] -= 0.5 * curve.y[i].dot(jet.dG[k] * curve.y[i]);
        integrand[i] = 0.5 * w.dot(jet.G * w);
    }

    // composite Simpson; trapezoid on a trailing odd interval
    double I = 0;
    size_t i = 0;
    for (; i + 2 < n; i += 2)
        I += dt / 3.0 * (integrand[i] + 4 * integrand[i + 1] + integrand[i + 2]);
    if (i + 1 < n) I += 0.5 * dt * (integrand[i] + integrand[i + 1]);
    return I;
}

ActionPoint evaluate_action_fast(const MetricModel& m, double t, const Vec& x0,
                                 const Vec& y0, const Vec& x, const Vec& y,
                                 const BvpOptions& opts) {
    if (!(t > 0)) throw DegenerateTime("evaluate_action_fast needs t > 0");
    const int d = int(x0.size());
    const int n = 4 * d;

    CotangentState free0 = CotangentState::zero(d);
    free0.x = x0;
    free0.y = y0;
    FlowResult ff = integrate_flow(m, free0, t, opts.flow);
    auto [q0, p0] = leading_guess(t, ff.final.x, ff.final.y, x, y);

    const double J_floor = 0.5 * std::pow(t, 4.0 * d) / std::pow(12.0, d);
    Vec target(2 * d);
    target.head(d) = x;
    target.tail(d) = y;

    auto shoot = [&](const Vec& qq, const Vec& pp) {
        CotangentState s = {x0, y0, qq, pp};
        return variational_flow_zeta(m, s, t, opts.flow);
    };
    ZetaVariational var = shoot(q0, p0);
    auto mismatch = [&](const ZetaVariational& v) {
        Vec e(2 * d);
        e.head(d) = v.final.x;
        e.tail(d) = v.final.y;
        return Vec(e - target);
    };
    Vec r = mismatch(var);
    double rnorm = r.norm();
    int iter = 0;
    while (rnorm > opts.tol && iter < opts.max_iter) {
        if (!(std::abs(var.J) > std::max(1e-300, J_floor)))
            throw SingularJacobian("evaluate_action_fast: |J| below threshold");
        Vec delta = var.dXY_dzeta.partialPivLu().solve(-r);
        double lambda = 1.0;
        bool accepted = false;
        for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
            ZetaVariational trial;
            try {
                trial = shoot(q0 + lambda * delta.head(d), p0 + lambda * delta.tail(d));
            } catch (const BlowUp&) {
                lambda *= 0.5;
                continue;
            }
            Vec rt = mismatch(trial);
            if (rt.norm() < rnorm * (1.0 - 0.25 * lambda) || rt.norm() < opts.tol) {
                q0 += lambda * delta.head(d);
                p0 += lambda * delta.tail(d);
                var = std::move(trial);
                r = rt;
                rnorm = rt.norm();
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        ++iter;
        if (!accepted)
            throw NoConvergence("line search stalled at residual " + std::to_string(rnorm));
    }
    if (rnorm > opts.tol)
        throw NoConvergence("residual " + std::to_string(rnorm) + " after " +
                            std::to_string(iter) + " iterations");
    if (!(std::abs(var.J) > std::max(1e-300, J_floor)))
        throw SingularJacobian("evaluate_action_fast: converged |J| below threshold");

    ActionPoint out;
    out.J = var.J;
    out.residual = rnorm;
    out.iterations = iter;
    double S = 0;
    for (const auto& step : var.dense.dense()) {
        double t0 = step.t0, hh = step.h;
        CotangentState s0 = CotangentState::unpack(step.eval(t0).head(n));
        CotangentState sm = CotangentState::unpack(step.eval(t0 + 0.5 * hh).head(n));
        CotangentState s1 = CotangentState::unpack(step.eval(t0 + hh).head(n));
        S += hh / 6.0 * (action_integrand(m, s0) + 4.0 * action_integrand(m, sm) +
                         action_integrand(m, s1));
    }
    out.S = S;
    return out;
}

double weierstrass_excess(const MetricModel& m, const Vec& x, const Vec& y, const Vec& q1,
                          const Vec& p1, const Vec& q2, const Vec& p2) {
    (void)y;
    (void)p1;
    (void)p2;
    Mat g = m.metric_at(x);
    Vec dq = q1 - q2;
    return 0.5 * dq.dot(g * dq);
}

double quadratic_approx(double t, const Vec& x, const Vec& y, const Vec& x0, const Vec& y0) {
    if (!(t > 0)) throw DegenerateTime("quadratic_approx needs t > 0");
    Vec dx = x - x0;
    return 6.0 / (t * t * t) * dx.squaredNorm() + 6.0 / (t * t) * dx.dot(y + y0) +
           2.0 / t * (y.squaredNorm() + y.dot(y0) + y0.squaredNorm());
}

}  // namespace sgf
