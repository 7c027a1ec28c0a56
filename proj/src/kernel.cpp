#include "sgf/kernel.hpp"

namespace sgf {

WkbKernel::WkbKernel(Mode mode, double h, MetricModel metric, Vec x0, Vec y0,
                     BvpOptions solver)
    : mode_(mode), h_(h), metric_(std::move(metric)), x0_(std::move(x0)),
      y0_(std::move(y0)), solver_(solver) {
    if (!(h_ > 0)) throw ConfigError("kernel needs h > 0");
    if (mode_ == Mode::series) {
        if (metric_.kind() == MetricModel::Kind::QuadraticNormal && x0_.norm() != 0)
            throw ConfigError("series mode expands in normal coordinates at x0 = 0");
        sigma_ = sigma_series(metric_, 1);
        auto [a, p] = psi_series(metric_, 2);
        alpha_ = a;
        psi_ = p;
    }
}

double WkbKernel::normalization() const {
    return std::pow(std::sqrt(12.0) / (2 * kPi * h_), metric_.dim());
}

std::pair<Vec, Vec> WkbKernel::free_flow(double t) const {
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = free_cache_.find(t);
        if (it != free_cache_.end()) return it->second;
    }
    CotangentState s0 = CotangentState::zero(metric_.dim());
    s0.x = x0_;
    s0.y = y0_;
    FlowResult fr = integrate_flow(metric_, s0, t, solver_.flow);
    auto val = std::make_pair(fr.final.x, fr.final.y);
    std::lock_guard<std::mutex> lock(mu_);
    free_cache_[t] = val;
    return val;
}

WkbKernel::Parts WkbKernel::evaluate_parts(double t, const Vec& x, const Vec& y) const {
    if (!(t > 0)) throw DegenerateTime("kernel evaluation needs t > 0");
    const int d = metric_.dim();
    Parts parts;
    if (mode_ == Mode::bvp) {
        ActionPoint pt = evaluate_action_fast(metric_, t, x0_, y0_, x, y, solver_);
        parts.S = pt.S;
        parts.phi = 1.0 / std::sqrt(std::abs(pt.J));
        parts.u = std::pow(2 * kPi * h_, -d) * parts.phi * std::exp(-parts.S / h_);
    } else {
        auto [xf, yf] = free_flow(t);
        Untransformed u = untransform(sigma_, psi_, alpha_, metric_.tensor(), t, x, y, y0_,
                                      xf, yf);
        parts.S = u.S;
        parts.phi = u.phi;
        parts.u = normalization() * parts.phi * std::exp(-parts.S / h_);
    }
    return parts;
}

double WkbKernel::evaluate(double t, const Vec& x, const Vec& y) const {
    return evaluate_parts(t, x, y).u;
}

double evaluate_kernel(const WkbKernel& k, double t, const Vec& x, const Vec& y) {
    return k.evaluate(t, x, y);
}

AmplitudeReport amplitude_equivalence(const MetricModel& m, const BvpSolution& sol,
                                      double t_start, int n_samples,
                                      const FlowOptions& opts) {
    if (!(t_start > 0)) throw DegenerateTime("amplitude comparison needs t_start > 0");
    if (!(t_start < sol.t)) throw ConfigError("t_start must lie inside (0, t)");
    const int d = int(sol.x0.size());
    const int n = 4 * d;

    // state = [flow state | d(state)/d(q0,p0) | phi]; S_yy from the matrix
    // block identity at the current time.
    auto rhs = [&](double, const Vec& v, Vec& dv) {
        CotangentState s = CotangentState::unpack(v.head(n));
        Mat M = Eigen::Map<const Mat>(v.data() + n, n, 2 * d);
        Mat full_jac = hamiltonian_rhs_jacobian(m, s);
        Mat dM = full_jac * M;
        dv.resize(v.size());
        dv.head(n) = hamiltonian_rhs(m, s).pack();
        Eigen::Map<Mat>(dv.data() + n, n, 2 * d) = dM;

        double dphi = 0;
        if (v.size() > size_t(n + 2 * d * n)) {
            Mat Mxy = M.topRows(2 * d);
            Mat W(2 * d, 2 * d);
            W.topRows(d) = M.bottomRows(d);          // dP/dzeta
            W.bottomRows(d) = M.middleRows(2 * d, d);  // dQ/dzeta
            Mat hess = W * Mxy.inverse();
            Mat Syy = hess.bottomRightCorner(d, d);
            Mat g = m.jet(s.x).g;
            dphi = -0.5 * v[n + 2 * d * n] * (g * Syy).trace();
        }
        if (v.size() > size_t(n + 2 * d * n)) dv[n + 2 * d * n] = dphi;
    };

    OdeOptions oo;
    oo.rtol = opts.rtol;
    oo.atol = opts.atol;
    oo.blowup_norm = 1e12;

    // phase 1: accumulate the zeta-Jacobian from 0 to t_start
    Vec v0(n + 2 * d * n);
    v0.head(n) = sol.initial_state().pack();
    Mat id0 = Mat::Zero(n, 2 * d);
    id0.block(2 * d, 0, 2 * d, 2 * d) = Mat::Identity(2 * d, 2 * d);
    Eigen::Map<Mat>(v0.data() + n, n, 2 * d) = id0;
    OdeSolution ph1 = integrate_ode(rhs, v0, t_start, oo);

    // phase 2: attach phi, normalized to |J|^{-1/2} at t_start
    Vec v1(n + 2 * d * n + 1);
    v1.head(n + 2 * d * n) = ph1.final_state();
    Mat M1 = Eigen::Map<const Mat>(ph1.final_state().data() + n, n, 2 * d);
    double J1 = M1.topRows(2 * d).determinant();
    if (!(std::abs(J1) > 1e-300)) throw SingularJacobian("degenerate start in amplitude run");
    v1[n + 2 * d * n] = 1.0 / std::sqrt(std::abs(J1));

    auto rhs2 = [&](double tt, const Vec& v, Vec& dv) { rhs(tt + t_start, v, dv); };
    OdeSolution ph2 = integrate_ode(rhs2, v1, sol.t - t_start, oo);

    AmplitudeReport rep;
    for (int i = 0; i < n_samples; ++i) {
        double tau = t_start + (sol.t - t_start) * i / double(n_samples - 1);
        Vec v = ph2.at(tau - t_start);
        Mat M = Eigen::Map<const Mat>(v.data() + n, n, 2 * d);
        double J = M.topRows(2 * d).determinant();
        double phi = v[n + 2 * d * n];
        double ratio = phi * std::sqrt(std::abs(J));
        rep.times.push_back(tau);
        rep.ratio.push_back(ratio);
        rep.max_ratio_deviation = std::max(rep.max_ratio_deviation, std::abs(ratio - 1.0));
    }
    return rep;
}

namespace {

// quintic smoothstep: 1 inside, 0 outside, C^2 across the layer
double bump_radial(double s, double eps) {
    if (s <= 1.0 - eps) return 1.0;
    if (s >= 1.0) return 0.0;
    double u = (1.0 - s) / eps;  // 0 at the outer edge, 1 at the plateau
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

}  // namespace

double cutoff_value(const CutoffSpec& spec, double t, const Vec& x, const Vec& y,
                    const Vec& x0, const Vec& y0) {
    double sx = (x - x0).norm() / spec.r;
    double sy = (y - y0).norm() * t / spec.r;
    return bump_radial(sx, spec.eps) * bump_radial(sy, spec.eps);
}

double apply_cutoff(const WkbKernel& k, const CutoffSpec& spec, double t, const Vec& x,
                    const Vec& y) {
    double chi = cutoff_value(spec, t, x, y, k.x0(), k.y0());
    if (chi == 0.0) return 0.0;
    return chi * k.evaluate(t, x, y);
}

double pde_residual(const WkbKernel& k, double t, const Vec& x, const Vec& y,
                    const FdSteps& fd) {
    const int d = k.metric().dim();
    const double h = k.h();

    auto eval = [&](double tt, const Vec& xx, const Vec& yy) {
        try {
            return k.evaluate(tt, xx, yy);
        } catch (const Error& e) {
            throw StencilOutOfDomain(std::string("kernel evaluation failed: ") + e.what());
        }
    };

    const double dt = fd.dt_rel * t;
    const double dx = fd.dx_rel * std::sqrt(h * t * t * t / 3.0);
    const double dy = fd.dy_rel * std::sqrt(h * t);

    // 4th-order first derivative and second derivative stencils with one
    // Richardson level (step and 2*step).
    auto d1 = [](auto f, double s) {
        double a = (f(-2 * s) - 8 * f(-s) + 8 * f(s) - f(2 * s)) / (12 * s);
        double b = (f(-4 * s) - 8 * f(-2 * s) + 8 * f(2 * s) - f(4 * s)) / (24 * s);
        return (16 * a - b) / 15.0;
    };
    auto d2c = [](auto f, double s) {
        double f0 = f(0.0);
        double a = (-f(-2 * s) + 16 * f(-s) - 30 * f0 + 16 * f(s) - f(2 * s)) / (12 * s * s);
        double b = (-f(-4 * s) + 16 * f(-2 * s) - 30 * f0 + 16 * f(2 * s) - f(4 * s)) /
                   (48 * s * s);
        return (16 * a - b) / 15.0;
    };

    double u0 = eval(t, x, y);
    if (!(u0 > 0)) throw StencilOutOfDomain("kernel not positive at stencil center");

    double ut = d1([&](double s) { return eval(t + s, x, y); }, dt);

    MetricJet jet = k.metric().jet(x);

    // diffusion: tr(g d^2_y u)
    double diff = 0;
    for (int i = 0; i < d; ++i)
        diff += jet.g(i, i) * d2c(
                    [&](double s) {
                        Vec yy = y;
                        yy[i] += s;
                        return eval(t, x, yy);
                    },
                    dy);
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            if (jet.g(i, j) == 0) continue;
            auto cross = [&](double s) {
                auto fs = [&](double si, double sj) {
                    Vec yy = y;
                    yy[i] += si;
                    yy[j] += sj;
                    return eval(t, x, yy);
                };
                return (fs(s, s) - fs(s, -s) - fs(-s, s) + fs(-s, -s)) / (4 * s * s);
            };
            double a = cross(dy), b = cross(2 * dy);
            diff += 2 * jet.g(i, j) * (4 * a - b) / 3.0;
        }

    // transport: (G y, d_x u) and (d_x(G y, y), d_y u)
    double conv_x = 0;
    Vec Gy = jet.G * y;
    for (int i = 0; i < d; ++i) {
        if (Gy[i] == 0) continue;
        conv_x += Gy[i] * d1(
                      [&](double s) {
                          Vec xx = x;
                          xx[i] += s;
                          return eval(t, xx, y);
                      },
                      dx);
    }
    double conv_y = 0;
    for (int i = 0; i < d; ++i) {
        double coef = y.dot(jet.dG[i] * y);
        if (coef == 0) continue;
        conv_y += coef * d1(
                      [&](double s) {
                          Vec yy = y;
                          yy[i] += s;
                          return eval(t, x, yy);
                      },
                      dy);
    }

    double residual = h * ut - 0.5 * h * h * diff - h * conv_x + 0.5 * h * conv_y;
    return residual / u0;
}

MassEstimate normalization_check(const WkbKernel& k, double t, int nodes_per_dim,
                                 const CutoffSpec* cutoff) {
    const int d = k.metric().dim();
    const double h = k.h();
    auto [xf, yf] = k.free_flow(t);

    double sx = std::sqrt(h * t * t * t / 3.0), sy = std::sqrt(h * t);
    std::vector<std::vector<double>> nodes(2 * d), weights(2 * d);
    for (int i = 0; i < d; ++i) {
        gauss_legendre(nodes_per_dim, xf[i] - 8 * sx, xf[i] + 8 * sx, nodes[i], weights[i]);
        gauss_legendre(nodes_per_dim, yf[i] - 8 * sy, yf[i] + 8 * sy, nodes[d + i],
                       weights[d + i]);
    }

    MassEstimate est;
    std::vector<int> idx(2 * d, 0);
    Vec x(d), y(d);
    double boundary = 0;
    while (true) {
        double w = 1;
        bool edge = false;
        for (int i = 0; i < 2 * d; ++i) {
            w *= weights[i][idx[i]];
            if (idx[i] == 0 || idx[i] == nodes_per_dim - 1) edge = true;
        }
        for (int i = 0; i < d; ++i) {
            x[i] = nodes[i][idx[i]];
            y[i] = nodes[d + i][idx[d + i]];
        }
        double chi = cutoff ? cutoff_value(*cutoff, t, x, y, xf, yf) : 1.0;
        double u = 0;
        if (chi > 0) {
            try {
                u = chi * k.evaluate(t, x, y);
            } catch (const Error&) {
                u = 0;  // unreachable targets carry negligible mass
            }
        }
        if (!std::isfinite(u)) throw QuadratureFailure("non-finite kernel value in mass sum");
        est.mass += w * u;
        if (edge) boundary += std::abs(w * u);

        int i = 0;
        for (; i < 2 * d; ++i) {
            if (++idx[i] < nodes_per_dim) break;
            idx[i] = 0;
        }
        if (i == 2 * d) break;
    }
    est.boundary_estimate = boundary;
    if (boundary > 1e-6)
        throw TruncationTooTight("boundary contribution " + std::to_string(boundary));
    return est;
}

}  // namespace sgf
