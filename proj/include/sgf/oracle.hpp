#pragma once

#include <cstdint>

#include "sgf/flow.hpp"

namespace sgf {

/// Exact transition density of the flat system dX = -Y dt, dY = sqrt(h) dW:
/// per-dimension Gaussian with mean (x0 - y0 t, y0) and covariance
/// h [[t^3/3, -t^2/2], [-t^2/2, t]].
double exact_flat_kernel(double t, double h, const Vec& x, const Vec& y, const Vec& x0,
                         const Vec& y0);

/// Per-dimension inverse covariance (1/h) [[12/t^3, 6/t^2], [6/t^2, 4/t]] in
/// displacement coordinates (x - x0 + y0 t, y - y0).
Eigen::Matrix2d flat_inverse_covariance(double t, double h);

struct SdeConfig {
    std::int64_t n_paths = 0;
    double dt = 0;
    std::uint64_t seed = 0;
    int threads = 1;
    double max_out_of_chart_fraction = 1e-3;
};

/// Endpoint samples of the stochastic geodesic flow, stored column-major per
/// coordinate.
struct SampleSet {
    int d = 0;
    std::int64_t n = 0;
    double t = 0, h = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<double>> X, Y;  // X[i][path], Y[i][path]
    std::int64_t out_of_chart = 0;
};

/// Euler-Maruyama for dX = -G(X) Y dt, dY = 1/2 d_x(G(X)Y, Y) dt
///                        + sqrt(h) L(X) dW with L L^T = g(X).
/// The drift field is divergence-free, so the forward equation of this SDE is
/// exactly the kinetic operator the WKB kernel approximates.  Deterministic
/// for fixed seed regardless of thread count.
SampleSet simulate_sde(const MetricModel& m, const Vec& x0, const Vec& y0, double t, double h,
                       const SdeConfig& cfg);

/// Phase-space drift at (x, y); exposed for the divergence-free check.
void sde_drift(const MetricModel& m, const Vec& x, const Vec& y, Vec& bx, Vec& by);

struct DensityEstimate {
    double value = 0;
    double stderr_ = 0;
    std::vector<double> bandwidth;
};

/// Product-Gaussian KDE bandwidths: scale * sigma_i * (4/((D+2)n))^(1/(D+4))
/// with D = 2d (anisotropic Silverman).
std::vector<double> silverman_bandwidth(const SampleSet& s, double scale = 1.0);

/// KDE value at z = (x, y) with batch-means standard error (16 batches).
DensityEstimate mc_density(const SampleSet& s, const Vec& x, const Vec& y,
                           const std::vector<double>& bandwidth, int threads = 1);

/// Wrapped flat kernel on a circle of circumference ell (x wrapped, y free):
/// sum over winding images |m| <= m_max.  Returns the value and the magnitude
/// of the last winding term as a truncation bound.
std::pair<double, double> flat_torus_kernel(double ell, double t, double h, const Vec& x,
                                            const Vec& y, const Vec& x0, const Vec& y0,
                                            int m_max);

}  // namespace sgf
