#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "sgf/common.hpp"
#include "sgf/errors.hpp"

namespace sgf {

struct OdeOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double initial_step = 0.0;  // 0 = automatic
    long max_steps = 2000000;
    double blowup_norm = 1e6;   // BlowUp when the state infinity-norm exceeds this
};

/// One accepted Dormand-Prince step with its continuous extension.
struct DenseStep {
    double t0 = 0, h = 0;
    Vec r1, r2, r3, r4, r5;  // interpolation polynomial coefficients

    Vec eval(double t) const {
        double th = (t - t0) / h, th1 = 1.0 - th;
        return r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
    }
};

/// Adaptive DOPRI5(4) solution on [0, T], queryable at any interior time.
class OdeSolution {
public:
    const Vec& final_state() const { return yfinal_; }
    double final_time() const { return tfinal_; }
    long steps() const { return nsteps_; }
    const std::vector<DenseStep>& dense() const { return steps_; }

    Vec at(double t) const;

private:
    friend OdeSolution integrate_ode(const std::function<void(double, const Vec&, Vec&)>&,
                                     const Vec&, double, const OdeOptions&);
    std::vector<DenseStep> steps_;
    Vec yfinal_;
    double tfinal_ = 0;
    long nsteps_ = 0;
};

/// Integrates dy/dt = f(t, y) from y(0) = y0 to time T.
/// Throws StepFailure when the tolerance is unreachable and BlowUp when the
/// state norm exceeds opts.blowup_norm.
OdeSolution integrate_ode(const std::function<void(double, const Vec&, Vec&)>& f,
                          const Vec& y0, double T, const OdeOptions& opts);

}  // namespace sgf
