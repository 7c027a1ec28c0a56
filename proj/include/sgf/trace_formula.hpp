#pragma once

#include "sgf/kernel.hpp"

namespace sgf {

struct TraceOptions {
    int y_nodes = 32;        // inner Gauss-Legendre nodes per y dimension
    int x_nodes = 6;         // per x dimension (curved charts)
    double x_half_width = 0.5;  // curved chart box [-a, a]^d
    std::vector<double> x_box;  // optional per-dimension half-widths
    int threads = 1;
    BvpOptions solver;
};

/// Contractible-sector (m = 0) diagonal integral of the bvp-mode kernel:
///   integral over the chart of u(t, x, y, x, y) dy dx.
/// The full wrapped-torus diagonal sum diverges in the winding count (every
/// flat winding sector contributes equally), so only the local sector is
/// computed.
struct TraceEstimate {
    double value = 0;
    double leading = 0;       // vol_M (2 pi h t^3)^{-d/2}
    double correction = 0;    // value - leading
    double y_tail_bound = 0;  // magnitude of the outermost y-ring contribution
    double t = 0, h = 0;
};

TraceEstimate local_trace(const MetricModel& m, double vol_M, double t, double h,
                          const TraceOptions& opts = {});

struct CurvatureProbe {
    std::vector<double> t_grid;
    std::vector<double> ratio_minus_one;  // value/leading - 1 per t
    double c = 0, beta = 0;               // fit ratio-1 ~ c t^beta
    double scalar_curvature = 0;
};

/// Correction of local_trace relative to the flat leading term over a
/// t-grid, computed against a zero-tensor control on the same quadrature
/// nodes (cancels the shared discretization error), then fitted to a power
/// law.  Report-only probe of the trace expansion's first curvature
/// correction.  The default chart box is deliberately non-square: on a
/// symmetric box the tensor-linear part of the response integrates to zero
/// in the unimodular gauge and only the quadratic volume effect remains.
CurvatureProbe curvature_probe(const MetricModel& m, const std::vector<double>& t_grid,
                               double h, const TraceOptions& opts = {});

}  // namespace sgf
