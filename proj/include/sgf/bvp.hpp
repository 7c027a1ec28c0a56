#pragma once

#include <cstdint>

#include "sgf/flow.hpp"

namespace sgf {

struct BvpOptions {
    FlowOptions flow;
    double tol = 1e-10;       // endpoint mismatch norm
    int max_iter = 30;
    int max_backtracks = 8;
};

/// Result of the two-point solve (x0,y0) -> (x,y) in time t.
struct BvpSolution {
    double t = 0;
    Vec x0, y0, x, y;
    Vec q0, p0;
    double residual = 0;
    int iterations = 0;
    std::vector<double> residual_history;  // endpoint mismatch per iterate
    VariationalResult variational;  // at the solution

    CotangentState initial_state() const { return {x0, y0, q0, p0}; }
};

/// Inverts the leading-order map x = xf - t^2 q0 / 2 - t^3 p0 / 6,
/// y = yf + t q0 + t^2 p0 / 2 around the free flow (xf, yf).
/// Per dimension the inverse matrix is [[-6/t^2, -2/t], [12/t^3, 6/t^2]].
std::pair<Vec, Vec> leading_guess(double t, const Vec& x_free, const Vec& y_free,
                                  const Vec& x, const Vec& y);

BvpSolution solve_bvp(const MetricModel& m, double t, const Vec& x0, const Vec& y0,
                      const Vec& x, const Vec& y, const BvpOptions& opts = {});

struct DiffeoReport {
    double max_roundtrip_error = 0;
    double min_abs_J = 0;
    int failed_samples = 0;
    int n_samples = 0;
    bool polydisk_covered = false;  // probe polydisk B_r x B_{r/t} reachable
    double probe_r = 0;
};

/// Samples momenta on the scaled polydisk B_{c^2/t^2} x B_{c^3/t^3}, maps them
/// through the flow and solves back.  Coverage of B_r(x~) x B_{r/t}(y~) is
/// probed by bisecting for the largest boundary-solvable radius.
DiffeoReport diffeo_check(const MetricModel& m, double t, const Vec& x0, const Vec& y0,
                          double c, int n_samples, std::uint64_t seed, double probe_r = 0.0,
                          const BvpOptions& opts = {});

}  // namespace sgf
