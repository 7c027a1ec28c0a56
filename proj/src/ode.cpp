#include "sgf/ode.hpp"

#include <algorithm>

namespace sgf {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// dense-output weights
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

}  // namespace

Vec OdeSolution::at(double t) const {
    if (steps_.empty()) throw StepFailure("empty solution");
    if (t <= steps_.front().t0) return steps_.front().eval(steps_.front().t0);
    if (t >= tfinal_) return yfinal_;
    // binary search for the step containing t
    size_t lo = 0, hi = steps_.size() - 1;
    while (lo < hi) {
        size_t mid = (lo + hi + 1) / 2;
        if (steps_[mid].t0 <= t) lo = mid; else hi = mid - 1;
    }
    return steps_[lo].eval(t);
}

OdeSolution integrate_ode(const std::function<void(double, const Vec&, Vec&)>& f,
                          const Vec& y0, double T, const OdeOptions& opts) {
    const int n = int(y0.size());
    OdeSolution sol;
    Vec y = y0, ynew(n), yerr(n), ysti(n);
    Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);

    double t = 0.0;
    f(t, y, k1);

    double h = opts.initial_step;
    if (h <= 0) {
        double dnf = 0, dny = 0;
        for (int i = 0; i < n; ++i) {
            double sk = opts.atol + opts.rtol * std::abs(y[i]);
            dnf += (k1[i] / sk) * (k1[i] / sk);
            dny += (y[i] / sk) * (y[i] / sk);
        }
        h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * std::sqrt(dny / dnf);
        h = std::min(h, T);
    }

    double facold = 1e-4;
    const double beta = 0.04, safe = 0.9, fac1 = 0.2, fac2 = 10.0;
    bool last = false;

    for (long step = 0; step < opts.max_steps; ++step) {
        if (t + h >= T) {
            h = T - t;
            last = true;
        }

        f(t + c2 * h, y + h * (a21 * k1), k2);
        f(t + c3 * h, y + h * (a31 * k1 + a32 * k2), k3);
        f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3), k4);
        f(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), k5);
        ysti = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        f(t + h, ysti, k6);
        ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        f(t + h, ynew, k7);
        yerr = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        double err = 0;
        for (int i = 0; i < n; ++i) {
            double sk = opts.atol + opts.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            err += (yerr[i] / sk) * (yerr[i] / sk);
        }
        err = std::sqrt(err / n);

        double fac11 = std::pow(err, 0.2 - beta * 0.75);
        double fac = fac11 / std::pow(facold, beta);
        fac = std::max(1.0 / fac2, std::min(1.0 / fac1, fac / safe));
        double hnew = h / fac;

        if (err <= 1.0) {
            facold = std::max(err, 1e-4);
            DenseStep ds;
            ds.t0 = t;
            ds.h = h;
            ds.r1 = y;
            ds.r2 = ynew - y;
            ds.r3 = h * k1 - ds.r2;
            ds.r4 = ds.r2 - h * k7 - ds.r3;
            ds.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
            sol.steps_.push_back(std::move(ds));

            t += h;
            y = ynew;
            k1 = k7;  // FSAL
            ++sol.nsteps_;

            if (y.lpNorm<Eigen::Infinity>() > opts.blowup_norm)
                throw BlowUp("state norm exceeded " + std::to_string(opts.blowup_norm) +
                             " at t=" + std::to_string(t));
            if (last) {
                sol.yfinal_ = y;
                sol.tfinal_ = t;
                return sol;
            }
            h = hnew;
        } else {
            h = h / std::min(1.0 / fac1, fac11 / safe);
            last = false;
            if (h < 1e-14 * std::max(1.0, T))
                throw StepFailure("step size underflow at t=" + std::to_string(t));
        }
    }
    throw StepFailure("maximum step count exceeded");
}

}  // namespace sgf
