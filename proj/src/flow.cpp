#include "sgf/flow.hpp"

#include <algorithm>

namespace sgf {

Vec CotangentState::pack() const {
    const int d = dim();
    Vec v(4 * d);
    v.segment(0, d) = x;
    v.segment(d, d) = y;
    v.segment(2 * d, d) = q;
    v.segment(3 * d, d) = p;
    return v;
}

CotangentState CotangentState::unpack(const Vec& v) {
    const int d = int(v.size()) / 4;
    return {v.segment(0, d), v.segment(d, d), v.segment(2 * d, d), v.segment(3 * d, d)};
}

double hamiltonian(const MetricModel& m, const CotangentState& s) {
    MetricJet jet = m.jet(s.x);
    const int d = s.dim();
    double H = 0.5 * s.q.dot(jet.g * s.q) - s.p.dot(jet.G * s.y);
    for (int i = 0; i < d; ++i) H += 0.5 * s.q[i] * s.y.dot(jet.dG[i] * s.y);
    return H;
}

namespace {

// Shared evaluation of the vector field from a jet.
void rhs_from_jet(const MetricJet& jet, const CotangentState& s, CotangentState& out) {
    const int d = s.dim();
    out.x = -(jet.G * s.y);
    out.y = jet.g * s.q;
    for (int i = 0; i < d; ++i) out.y[i] += 0.5 * s.y.dot(jet.dG[i] * s.y);
    out.q = jet.G * s.p;
    for (int m2 = 0; m2 < d; ++m2) out.q -= s.q[m2] * (jet.dG[m2] * s.y);
    out.p = Vec::Zero(d);
    for (int i = 0; i < d; ++i) {
        double v = -0.5 * s.q.dot(jet.dg[i] * s.q) + s.p.dot(jet.dG[i] * s.y);
        for (int m2 = 0; m2 < d; ++m2) v -= 0.5 * s.q[m2] * s.y.dot(jet.d2G[m2][i] * s.y);
        out.p[i] = v;
    }
}

}  // namespace

CotangentState hamiltonian_rhs(const MetricModel& m, const CotangentState& s) {
    MetricJet jet = m.jet(s.x);
    CotangentState out = CotangentState::zero(s.dim());
    rhs_from_jet(jet, s, out);
    return out;
}

Mat hamiltonian_rhs_jacobian(const MetricModel& m, const CotangentState& s) {
    const int d = s.dim();
    MetricJet jet = m.jet(s.x);
    if (!jet.has_third)
        throw UnsupportedVariant("variational flow needs third metric jets");
    Mat J = Mat::Zero(4 * d, 4 * d);
    auto X = [&](int i) { return i; };
    auto Y = [&](int i) { return d + i; };
    auto Q = [&](int i) { return 2 * d + i; };
    auto P = [&](int i) { return 3 * d + i; };

    for (int i = 0; i < d; ++i) {
        // xdot_i = -(G y)_i
        for (int k = 0; k < d; ++k) J(X(i), X(k)) = -(jet.dG[k] * s.y)[i];
        for (int j = 0; j < d; ++j) J(X(i), Y(j)) = -jet.G(i, j);

        // ydot_i = (g q)_i + 1/2 y^T dG[i] y
        for (int mm = 0; mm < d; ++mm)
            J(Y(i), X(mm)) = (jet.dg[mm] * s.q)[i] + 0.5 * s.y.dot(jet.d2G[i][mm] * s.y);
        for (int mm = 0; mm < d; ++mm) J(Y(i), Y(mm)) = (jet.dG[i] * s.y)[mm];
        for (int j = 0; j < d; ++j) J(Y(i), Q(j)) = jet.g(i, j);

        // qdot_i = (G p)_i - sum_m q_m (dG[m] y)_i
        for (int nn = 0; nn < d; ++nn) {
            double v = (jet.dG[nn] * s.p)[i];
            for (int mm = 0; mm < d; ++mm) v -= s.q[mm] * (jet.d2G[mm][nn] * s.y)[i];
            J(Q(i), X(nn)) = v;
        }
        for (int k = 0; k < d; ++k) {
            double v = 0;
            for (int mm = 0; mm < d; ++mm) v -= s.q[mm] * jet.dG[mm](i, k);
            J(Q(i), Y(k)) = v;
        }
        for (int mm = 0; mm < d; ++mm) J(Q(i), Q(mm)) = -(jet.dG[mm] * s.y)[i];
        for (int j = 0; j < d; ++j) J(Q(i), P(j)) = jet.G(i, j);

        // pdot_i = -1/2 q^T dg[i] q + p^T dG[i] y - 1/2 sum_m q_m y^T d2G[m][i] y
        for (int nn = 0; nn < d; ++nn) {
            double v = -0.5 * s.q.dot(jet.d2g[i][nn] * s.q) + s.p.dot(jet.d2G[i][nn] * s.y);
            for (int mm = 0; mm < d; ++mm)
                v -= 0.5 * s.q[mm] * s.y.dot(jet.d3G[mm][i][nn] * s.y);
            J(P(i), X(nn)) = v;
        }
        for (int k = 0; k < d; ++k) {
            double v = (jet.dG[i] * s.p)[k];
            for (int mm = 0; mm < d; ++mm) v -= s.q[mm] * (jet.d2G[mm][i] * s.y)[k];
            J(P(i), Y(k)) = v;
        }
        for (int mm = 0; mm < d; ++mm)
            J(P(i), Q(mm)) = -(jet.dg[i] * s.q)[mm] - 0.5 * s.y.dot(jet.d2G[mm][i] * s.y);
        for (int j = 0; j < d; ++j) J(P(i), P(j)) = (jet.dG[i] * s.y)[j];
    }
    return J;
}

FlowResult integrate_flow(const MetricModel& m, const CotangentState& s0, double t,
                          const FlowOptions& opts) {
    if (!(t > 0)) throw DegenerateTime("integrate_flow needs t > 0");
    const int d = s0.dim();
    auto f = [&m, d](double, const Vec& v, Vec& dv) {
        CotangentState s = CotangentState::unpack(v);
        MetricJet jet = m.jet(s.x);
        CotangentState ds = CotangentState::zero(d);
        rhs_from_jet(jet, s, ds);
        dv = ds.pack();
    };
    OdeOptions oo;
    oo.rtol = opts.rtol;
    oo.atol = opts.atol;
    oo.blowup_norm = opts.blowup_norm;

    FlowResult res;
    res.dense = integrate_ode(f, s0.pack(), t, oo);
    res.final = CotangentState::unpack(res.dense.final_state());
    res.steps = res.dense.steps();

    double H0 = hamiltonian(m, s0);
    res.energy_drift = 0;
    res.times.push_back(0.0);
    res.trajectory.push_back(s0);
    for (const auto& ds : res.dense.dense()) {
        double te = ds.t0 + ds.h;
        CotangentState se = CotangentState::unpack(ds.eval(te));
        res.energy_drift = std::max(res.energy_drift, std::abs(hamiltonian(m, se) - H0));
        res.times.push_back(te);
        res.trajectory.push_back(se);
    }
    for (double ts : opts.sample_times) {
        if (ts <= 0 || ts >= t) continue;
        res.times.push_back(ts);
        res.trajectory.push_back(CotangentState::unpack(res.dense.at(ts)));
    }
    return res;
}

VariationalResult variational_flow(const MetricModel& m, const CotangentState& s0, double t,
                                   const FlowOptions& opts) {
    if (!(t > 0)) throw DegenerateTime("variational_flow needs t > 0");
    const int d = s0.dim();
    const int n = 4 * d;
    auto f = [&m, d, n](double, const Vec& v, Vec& dv) {
        CotangentState s = CotangentState::unpack(v.head(n));
        MetricJet jet = m.jet(s.x);
        CotangentState ds = CotangentState::zero(d);
        rhs_from_jet(jet, s, ds);
        Mat M = Eigen::Map<const Mat>(v.data() + n, n, n);
        Mat dM = hamiltonian_rhs_jacobian(m, s) * M;
        dv.resize(n + n * n);
        dv.head(n) = ds.pack();
        Eigen::Map<Mat>(dv.data() + n, n, n) = dM;
    };
    Vec v0(n + n * n);
    v0.head(n) = s0.pack();
    Eigen::Map<Mat>(v0.data() + n, n, n) = Mat::Identity(n, n);

    OdeOptions oo;
    oo.rtol = opts.rtol;
    oo.atol = opts.atol;
    oo.blowup_norm = std::max(opts.blowup_norm, 1e9);  // jacobian entries may be large

    VariationalResult res;
    res.dense = integrate_ode(f, v0, t, oo);

    FlowOptions fo = opts;
    res.flow.final = CotangentState::unpack(res.dense.final_state().head(n));
    res.flow.steps = res.dense.steps();
    double H0 = hamiltonian(m, s0);
    for (const auto& ds : res.dense.dense()) {
        double te = ds.t0 + ds.h;
        CotangentState se = CotangentState::unpack(ds.eval(te).head(n));
        res.flow.energy_drift =
            std::max(res.flow.energy_drift, std::abs(hamiltonian(m, se) - H0));
        res.flow.times.push_back(te);
        res.flow.trajectory.push_back(se);
    }

    res.jac = Eigen::Map<const Mat>(res.dense.final_state().data() + n, n, n);
    res.J = res.jac.block(0, 2 * d, 2 * d, 2 * d).determinant();
    return res;
}

ZetaVariational variational_flow_zeta(const MetricModel& m, const CotangentState& s0,
                                      double t, const FlowOptions& opts) {
    if (!(t > 0)) throw DegenerateTime("variational_flow_zeta needs t > 0");
    const int d = s0.dim();
    const int n = 4 * d;
    auto f = [&m, d, n](double, const Vec& v, Vec& dv) {
        CotangentState s = CotangentState::unpack(v.head(n));
        MetricJet jet = m.jet(s.x);
        CotangentState ds = CotangentState::zero(d);
        rhs_from_jet(jet, s, ds);
        Mat M = Eigen::Map<const Mat>(v.data() + n, n, 2 * d);
        Mat dM = hamiltonian_rhs_jacobian(m, s) * M;
        dv.resize(n + 2 * d * n);
        dv.head(n) = ds.pack();
        Eigen::Map<Mat>(dv.data() + n, n, 2 * d) = dM;
    };
    Vec v0(n + 2 * d * n);
    v0.head(n) = s0.pack();
    Mat m0 = Mat::Zero(n, 2 * d);
    m0.block(2 * d, 0, 2 * d, 2 * d) = Mat::Identity(2 * d, 2 * d);
    Eigen::Map<Mat>(v0.data() + n, n, 2 * d) = m0;

    OdeOptions oo;
    oo.rtol = opts.rtol;
    oo.atol = opts.atol;
    oo.blowup_norm = std::max(opts.blowup_norm, 1e9);

    ZetaVariational res;
    res.dense = integrate_ode(f, v0, t, oo);
    res.final = CotangentState::unpack(res.dense.final_state().head(n));
    Mat M = Eigen::Map<const Mat>(res.dense.final_state().data() + n, n, 2 * d);
    res.dXY_dzeta = M.topRows(2 * d);
    res.J = res.dXY_dzeta.determinant();
    return res;
}

ScalingReport check_scaling_hypothesis(const MetricModel& m, const Vec& x0, double c,
                                       const std::vector<double>& t_grid,
                                       const FlowOptions& opts) {
    for (size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] < t_grid[i - 1]) || !(t_grid[i] > 0))
            throw ConfigError("t_grid must be positive and strictly decreasing");
    const int d = int(x0.size());
    ScalingReport rep;
    rep.t_grid = t_grid;

    const double tmax = t_grid.front();
    std::vector<double> nXp, nXq, nYp, nYq;

    // boundary samples: a fixed direction set scaled per t
    std::vector<Vec> dirs;
    for (int a = 0; a < 4; ++a) {
        Vec u = Vec::Zero(d);
        u[a % d] = (a < 2) ? 1.0 : -1.0;
        dirs.push_back(u);
    }

    for (double t : t_grid) {
        // derivative magnitudes at zeta = 0, fixed y0 of Hypothesis-H size at tmax
        CotangentState s0 = CotangentState::zero(d);
        s0.x = x0;
        s0.y = Vec::Constant(d, c / tmax / std::sqrt(double(d)));
        try {
            auto var = variational_flow(m, s0, t, opts);
            const Mat& full = var.jac;
            nXp.push_back(full.block(0, 3 * d, d, d).norm());
            nXq.push_back(full.block(0, 2 * d, d, d).norm());
            nYp.push_back(full.block(d, 3 * d, d, d).norm());
            nYq.push_back(full.block(d, 2 * d, d, d).norm());
        } catch (const BlowUp&) {
            ++rep.blown_up;
            nXp.push_back(0); nXq.push_back(0); nYp.push_back(0); nYq.push_back(0);
        }

        // short-time bounds on polydisk-boundary samples
        for (const Vec& u : dirs) {
            CotangentState s = CotangentState::zero(d);
            s.x = x0;
            s.y = (c / t) * u;
            s.q = (c * c / (t * t)) * u;
            s.p = (c * c * c / (t * t * t)) * u;
            try {
                FlowResult fr = integrate_flow(m, s, t, opts);
                double denom_x = t * (1 + c / t);
                double denom_y = t * (1 + c * c / (t * t));
                double denom_q = t * (1 + c * c * c / (t * t * t));
                double denom_p = t * (1 + std::pow(c, 4) / std::pow(t, 4));
                rep.k_x = std::max(rep.k_x, (fr.final.x - s.x).norm() / denom_x);
                rep.k_y = std::max(rep.k_y, (fr.final.y - s.y).norm() / denom_y);
                rep.k_q = std::max(rep.k_q, (fr.final.q - s.q).norm() / denom_q);
                rep.k_p = std::max(rep.k_p, (fr.final.p - s.p).norm() / denom_p);
            } catch (const BlowUp&) {
                ++rep.blown_up;
            }
        }
    }

    std::vector<double> ts(t_grid.begin(), t_grid.end());
    rep.slope_dX_dp0 = loglog_fit(ts, nXp).second;
    rep.slope_dX_dq0 = loglog_fit(ts, nXq).second;
    rep.slope_dY_dp0 = loglog_fit(ts, nYp).second;
    rep.slope_dY_dq0 = loglog_fit(ts, nYq).second;
    return rep;
}

}  // namespace sgf
