#pragma once

#include <map>
#include <memory>
#include <mutex>

#include "sgf/action.hpp"
#include "sgf/wkb.hpp"

namespace sgf {

/// WKB heat-kernel approximation around a base point (x0, y0).
///
/// bvp mode:    u = (2 pi h)^{-d} |J|^{-1/2} exp(-S/h) with S, J from the
///              two-point solve (the reference kernel; exact in flat charts).
/// series mode: u = (sqrt(12)/(2 pi h))^d t^{-2d} (psi_0 + t^2 psi_2)
///              exp(-(Sigma_{-1}/t + t Sigma_1)/h) at the rescaled point.
class WkbKernel {
public:
    enum class Mode { bvp, series };

    WkbKernel(Mode mode, double h, MetricModel metric, Vec x0, Vec y0,
              BvpOptions solver = {});

    Mode mode() const { return mode_; }
    double h() const { return h_; }
    const MetricModel& metric() const { return metric_; }
    const Vec& x0() const { return x0_; }
    const Vec& y0() const { return y0_; }
    double normalization() const;  // C = (sqrt(12)/(2 pi h))^d (series mode)

    double evaluate(double t, const Vec& x, const Vec& y) const;

    /// S and amplitude pieces at a point (for CSV output and diagnostics).
    struct Parts {
        double u = 0, S = 0, phi = 0;
    };
    Parts evaluate_parts(double t, const Vec& x, const Vec& y) const;

    /// Free flow endpoint at time t (cached).
    std::pair<Vec, Vec> free_flow(double t) const;

private:
    Mode mode_;
    double h_;
    MetricModel metric_;
    Vec x0_, y0_;
    BvpOptions solver_;
    // series context
    PolySeries sigma_, psi_;
    Rational alpha_ = 0;
    mutable std::mutex mu_;
    mutable std::map<double, std::pair<Vec, Vec>> free_cache_;
};

double evaluate_kernel(const WkbKernel& k, double t, const Vec& x, const Vec& y);

struct AmplitudeReport {
    double max_ratio_deviation = 0;  // max |phi sqrt(|J|) - 1| over samples
    std::vector<double> times;
    std::vector<double> ratio;
};

/// Integrates the transport ODE phi' = -1/2 phi tr(g(x) S_yy) along the
/// characteristic of sol, normalized to |J|^{-1/2} at t_start, and reports
/// how far the ratio phi / |J|^{-1/2} drifts from 1.
AmplitudeReport amplitude_equivalence(const MetricModel& m, const BvpSolution& sol,
                                      double t_start, int n_samples = 24,
                                      const FlowOptions& opts = {});

/// C^2 bump cutoff on B_r(x0) x B_{r/t}(y0): quintic smoothstep in the radial
/// coordinate of each factor, identically 1 on the inner (1-eps) polydisk.
struct CutoffSpec {
    double r = 0.25;
    double eps = 0.3;  // boundary-layer fraction of the radius
};

double cutoff_value(const CutoffSpec& spec, double t, const Vec& x, const Vec& y,
                    const Vec& x0, const Vec& y0);

double apply_cutoff(const WkbKernel& k, const CutoffSpec& spec, double t, const Vec& x,
                    const Vec& y);

struct FdSteps {
    double dt_rel = 1e-4;  // relative to t
    double dx_rel = 1e-3;  // relative to sqrt(h t^3 / 3)
    double dy_rel = 1e-3;  // relative to sqrt(h t)
};

/// Relative residual of the kinetic operator
/// [h d_t - h^2/2 tr(g d_y^2) - h (G y, d_x) + h/2 (d_x(G y, y), d_y)] u / u
/// with Richardson-extrapolated central differences.
double pde_residual(const WkbKernel& k, double t, const Vec& x, const Vec& y,
                    const FdSteps& fd = {});

struct MassEstimate {
    double mass = 0;
    double boundary_estimate = 0;
};

/// Total mass of the kernel over (x, y) by tensorized Gauss-Legendre
/// quadrature on mean +- 8 sigma boxes.  TruncationTooTight when the
/// boundary contribution estimate exceeds 1e-6.  When a cutoff is supplied
/// the localized kernel u^D = chi u is integrated instead, which is the
/// globally well-defined object for series-mode evaluation outside the
/// expansion's validity region.
MassEstimate normalization_check(const WkbKernel& k, double t, int nodes_per_dim = 48,
                                 const CutoffSpec* cutoff = nullptr);

}  // namespace sgf
