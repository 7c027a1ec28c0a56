#include "sgf/bvp.hpp"

#include <random>

namespace sgf {

std::pair<Vec, Vec> leading_guess(double t, const Vec& x_free, const Vec& y_free,
                                  const Vec& x, const Vec& y) {
    if (!(t > 1e-12)) throw DegenerateTime("leading_guess needs t above machine scale");
    Vec dx = x - x_free, dy = y - y_free;
    Vec q0 = -6.0 / (t * t) * dx - 2.0 / t * dy;
    Vec p0 = 12.0 / (t * t * t) * dx + 6.0 / (t * t) * dy;
    return {q0, p0};
}

BvpSolution solve_bvp(const MetricModel& m, double t, const Vec& x0, const Vec& y0,
                      const Vec& x, const Vec& y, const BvpOptions& opts) {
    if (!(t > 0)) throw DegenerateTime("solve_bvp needs t > 0");
    const int d = int(x0.size());

    FlowOptions fopt = opts.flow;
    CotangentState free0 = CotangentState::zero(d);
    free0.x = x0;
    free0.y = y0;
    FlowResult free_flow = integrate_flow(m, free0, t, fopt);

    auto [q0, p0] = leading_guess(t, free_flow.final.x, free_flow.final.y, x, y);

    // |J| is tested against half its flat-model value t^{4d}/12^d, which keeps
    // the test meaningful as t -> 0.
    const double J_floor = 0.5 * std::pow(t, 4.0 * d) / std::pow(12.0, d);

    auto shoot = [&](const Vec& qq, const Vec& pp) {
        CotangentState s = {x0, y0, qq, pp};
        return variational_flow(m, s, t, fopt);
    };

    Vec target(2 * d);
    target.head(d) = x;
    target.tail(d) = y;

    VariationalResult var = shoot(q0, p0);
    Vec endpoint(2 * d);
    endpoint.head(d) = var.flow.final.x;
    endpoint.tail(d) = var.flow.final.y;
    Vec r = endpoint - target;
    double rnorm = r.norm();

    std::vector<double> history{rnorm};
    int iter = 0;
    while (rnorm > opts.tol && iter < opts.max_iter) {
        Mat Jz = var.jac.block(0, 2 * d, 2 * d, 2 * d);  // d(X,Y)/d(q0,p0)
        double detJ = Jz.determinant();
        if (!(std::abs(detJ) > std::max(1e-300, J_floor)))
            throw SingularJacobian("|J|=" + std::to_string(detJ) + " below threshold");
        Vec delta = Jz.partialPivLu().solve(-r);

        double lambda = 1.0;
        bool accepted = false;
        for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
            Vec qn = q0 + lambda * delta.head(d);
            Vec pn = p0 + lambda * delta.tail(d);
            VariationalResult trial;
            try {
                trial = shoot(qn, pn);
            } catch (const BlowUp&) {
                lambda *= 0.5;
                continue;
            }
            Vec en(2 * d);
            en.head(d) = trial.flow.final.x;
            en.tail(d) = trial.flow.final.y;
            double rn = (en - target).norm();
            if (rn < rnorm * (1.0 - 0.25 * lambda) || rn < opts.tol) {
                q0 = qn;
                p0 = pn;
                var = std::move(trial);
                r = en - target;
                rnorm = rn;
                history.push_back(rnorm);
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

    BvpSolution sol;
    sol.t = t;
    sol.x0 = x0;
    sol.y0 = y0;
    sol.x = x;
    sol.y = y;
    sol.q0 = q0;
    sol.p0 = p0;
    sol.residual = rnorm;
    sol.iterations = iter;
    sol.residual_history = std::move(history);
    sol.variational = std::move(var);

    double detJ = sol.variational.J;
    if (!(std::abs(detJ) > std::max(1e-300, J_floor)))
        throw SingularJacobian("converged solve has |J| below threshold");
    return sol;
}

namespace {

Vec ball_sample(std::mt19937_64& rng, int d, double radius) {
    std::normal_distribution<double> gauss(0, 1);
    std::uniform_real_distribution<double> unif(0, 1);
    Vec u(d);
    for (int i = 0; i < d; ++i) u[i] = gauss(rng);
    u.normalize();
    return radius * std::pow(unif(rng), 1.0 / d) * u;
}

}  // namespace

DiffeoReport diffeo_check(const MetricModel& m, double t, const Vec& x0, const Vec& y0,
                          double c, int n_samples, std::uint64_t seed, double probe_r,
                          const BvpOptions& opts) {
    const int d = int(x0.size());
    DiffeoReport rep;
    rep.n_samples = n_samples;
    rep.min_abs_J = std::numeric_limits<double>::infinity();
    std::mt19937_64 rng(seed);

    const double rq = c * c / (t * t), rp = c * c * c / (t * t * t);
    for (int s = 0; s < n_samples; ++s) {
        Vec q0 = ball_sample(rng, d, rq);
        Vec p0 = ball_sample(rng, d, rp);
        try {
            CotangentState st = {x0, y0, q0, p0};
            VariationalResult var = variational_flow(m, st, t, opts.flow);
            rep.min_abs_J = std::min(rep.min_abs_J, std::abs(var.J));
            BvpSolution back = solve_bvp(m, t, x0, y0, var.flow.final.x, var.flow.final.y, opts);
            double err = std::sqrt((back.q0 - q0).squaredNorm() + (back.p0 - p0).squaredNorm());
            rep.max_roundtrip_error = std::max(rep.max_roundtrip_error, err);
        } catch (const Error&) {
            ++rep.failed_samples;
        }
    }

    // coverage: largest r such that boundary probes of B_r(x~) x B_{r/t}(y~)
    // solve back into the momentum polydisk (the radius is measured, not
    // fixed a priori; p0 binds it at the c^3/t^3 scale).
    CotangentState free0 = CotangentState::zero(d);
    free0.x = x0;
    free0.y = y0;
    FlowResult ff = integrate_flow(m, free0, t, opts.flow);
    auto covered = [&](double r) {
        for (int a = 0; a < 2 * d; ++a)
            for (double sx : {-1.0, 1.0}) {
                Vec xt = ff.final.x, yt = ff.final.y;
                xt[a % d] += sx * r;
                yt[(a + 1) % d] += sx * r / t;
                try {
                    BvpSolution sol = solve_bvp(m, t, x0, y0, xt, yt, opts);
                    if (sol.q0.norm() > rq * (1 + 1e-9) || sol.p0.norm() > rp * (1 + 1e-9))
                        return false;
                } catch (const Error&) {
                    return false;
                }
            }
        return true;
    };
    double lo = 0.0, hi = probe_r > 0 ? probe_r : c * c;
    if (covered(hi)) {
        lo = hi;
    } else {
        for (int it = 0; it < 8; ++it) {
            double mid = 0.5 * (lo + hi);
            if (covered(mid)) lo = mid; else hi = mid;
        }
    }
    rep.probe_r = lo;
    rep.polydisk_covered = lo > 0;
    return rep;
}

}  // namespace sgf
