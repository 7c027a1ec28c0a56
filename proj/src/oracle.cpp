#include "sgf/oracle.hpp"

#include <atomic>
#include <cmath>

#include "sgf/rng.hpp"

namespace sgf {

Eigen::Matrix2d flat_inverse_covariance(double t, double h) {
    Eigen::Matrix2d w;
    w << 12.0 / (t * t * t), 6.0 / (t * t), 6.0 / (t * t), 4.0 / t;
    return w / h;
}

double exact_flat_kernel(double t, double h, const Vec& x, const Vec& y, const Vec& x0,
                         const Vec& y0) {
    const int d = int(x.size());
    const double det_cov = h * h * std::pow(t, 4.0) / 12.0;  // per dimension
    Eigen::Matrix2d W = flat_inverse_covariance(t, h);
    double logu = -d * std::log(2 * kPi) - 0.5 * d * std::log(det_cov);
    for (int i = 0; i < d; ++i) {
        double dx = x[i] - x0[i] + y0[i] * t;
        double dy = y[i] - y0[i];
        logu -= 0.5 * (W(0, 0) * dx * dx + 2 * W(0, 1) * dx * dy + W(1, 1) * dy * dy);
    }
    return std::exp(logu);
}

void sde_drift(const MetricModel& m, const Vec& x, const Vec& y, Vec& bx, Vec& by) {
    MetricJet jet = m.jet(x);
    const int d = int(x.size());
    bx = -(jet.G * y);
    by.resize(d);
    for (int i = 0; i < d; ++i) by[i] = 0.5 * y.dot(jet.dG[i] * y);
}

namespace {

constexpr int kMaxDim = 4;

// lower Cholesky of a small SPD matrix in row-major stack storage
inline bool chol_small(int d, const double* g, double* L) {
    for (int i = 0; i < d * d; ++i) L[i] = 0;
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = g[i * d + j];
            for (int k = 0; k < j; ++k) s -= L[i * d + k] * L[j * d + k];
            if (i == j) {
                if (!(s > 0)) return false;
                L[i * d + i] = std::sqrt(s);
            } else {
                L[i * d + j] = s / L[j * d + j];
            }
        }
    }
    return true;
}

// solve (L L^T) v = y
inline void chol_solve(int d, const double* L, const double* y, double* v) {
    double tmp[kMaxDim];
    for (int i = 0; i < d; ++i) {
        double s = y[i];
        for (int k = 0; k < i; ++k) s -= L[i * d + k] * tmp[k];
        tmp[i] = s / L[i * d + i];
    }
    for (int i = d - 1; i >= 0; --i) {
        double s = tmp[i];
        for (int k = i + 1; k < d; ++k) s -= L[k * d + i] * v[k];
        v[i] = s / L[i * d + i];
    }
}

}  // namespace

SampleSet simulate_sde(const MetricModel& m, const Vec& x0, const Vec& y0, double t, double h,
                       const SdeConfig& cfg) {
    const int d = int(x0.size());
    if (cfg.n_paths < 1) throw ConfigError("simulate_sde needs n_paths >= 1");
    if (!(cfg.dt > 0) || cfg.dt > t / 10.0 + 1e-15)
        throw ConfigError("simulate_sde needs 0 < dt <= t/10");
    const int nsteps = int(std::llround(t / cfg.dt));
    const double dt = t / nsteps;
    const double sq = std::sqrt(h * dt);

    SampleSet out;
    out.d = d;
    out.n = cfg.n_paths;
    out.t = t;
    out.h = h;
    out.seed = cfg.seed;
    out.X.assign(d, std::vector<double>(cfg.n_paths));
    out.Y.assign(d, std::vector<double>(cfg.n_paths));

    const bool flat = m.kind() == MetricModel::Kind::Flat;
    const QuadTensor& c = m.tensor();
    const double radius = m.validity_radius();
    std::atomic<std::int64_t> out_of_chart{0};

    if (d > 4) throw ConfigError("simulate_sde supports d <= 4");

    parallel_for(cfg.n_paths, cfg.threads, [&](std::int64_t b, std::int64_t e) {
        double x[kMaxDim], y[kMaxDim], v[kMaxDim], xi[kMaxDim];
        double g[kMaxDim * kMaxDim], L[kMaxDim * kMaxDim];
        const double r2 = radius * radius;
        std::int64_t local_ooc = 0;
        for (std::int64_t path = b; path < e; ++path) {
            for (int i = 0; i < d; ++i) {
                x[i] = x0[i];
                y[i] = y0[i];
            }
            bool escaped = false;
            for (int step = 0; step < nsteps && !escaped; ++step) {
                for (int blk = 0; 2 * blk < d; ++blk) {
                    auto [g1, g2] =
                        Philox4x32::gaussians(cfg.seed, std::uint64_t(path),
                                              std::uint32_t(step), std::uint32_t(blk));
                    xi[2 * blk] = g1;
                    if (2 * blk + 1 < d) xi[2 * blk + 1] = g2;
                }
                if (flat) {
                    // dX = -Y dt, dY = sqrt(h) dW
                    for (int i = 0; i < d; ++i) {
                        x[i] -= y[i] * dt;
                        y[i] += sq * xi[i];
                    }
                    continue;
                }
                // g(x) = I + 1/2 c x x, exact for the quadratic model
                for (int i = 0; i < d; ++i)
                    for (int j = 0; j < d; ++j) {
                        double s = 0;
                        for (int k = 0; k < d; ++k)
                            for (int l = 0; l < d; ++l) s += c(i, j, k, l) * x[k] * x[l];
                        g[i * d + j] = (i == j ? 1.0 : 0.0) + 0.5 * s;
                    }
                if (!chol_small(d, g, L)) {
                    escaped = true;
                    ++local_ooc;
                    break;
                }
                chol_solve(d, L, y, v);  // v = G y
                // update with state evaluated before the step
                for (int i = 0; i < d; ++i) {
                    // y-drift_i = 1/2 y^T dG[i] y = -1/2 v^T dg[i] v
                    double s = 0;
                    for (int j = 0; j < d; ++j)
                        for (int k = 0; k < d; ++k) {
                            double dg = 0;
                            for (int l = 0; l < d; ++l) dg += c(j, k, i, l) * x[l];
                            s += v[j] * dg * v[k];
                        }
                    double noise_i = 0;
                    for (int k = 0; k <= i; ++k) noise_i += L[i * d + k] * xi[k];
                    y[i] += -0.5 * s * dt + sq * noise_i;
                }
                double xn2 = 0;
                for (int i = 0; i < d; ++i) {
                    x[i] -= v[i] * dt;
                    xn2 += x[i] * x[i];
                }
                if (xn2 > r2) {
                    escaped = true;
                    ++local_ooc;
                }
            }
            for (int i = 0; i < d; ++i) {
                out.X[i][path] = x[i];
                out.Y[i][path] = y[i];
            }
        }
        out_of_chart += local_ooc;
    });

    out.out_of_chart = out_of_chart.load();
    if (out.out_of_chart > cfg.max_out_of_chart_fraction * cfg.n_paths)
        throw PathOutOfChart(std::to_string(out.out_of_chart) + " of " +
                             std::to_string(cfg.n_paths) + " paths left the chart");
    return out;
}

std::vector<double> silverman_bandwidth(const SampleSet& s, double scale) {
    const int D = 2 * s.d;
    const double factor = std::pow(4.0 / ((D + 2) * double(s.n)), 1.0 / (D + 4));
    std::vector<double> bw(D);
    auto sd = [&](const std::vector<double>& col) {
        double mean = 0;
        for (double v : col) mean += v;
        mean /= double(col.size());
        double var = 0;
        for (double v : col) var += (v - mean) * (v - mean);
        return std::sqrt(var / double(col.size() - 1));
    };
    for (int i = 0; i < s.d; ++i) bw[i] = scale * factor * sd(s.X[i]);
    for (int i = 0; i < s.d; ++i) bw[s.d + i] = scale * factor * sd(s.Y[i]);
    return bw;
}

DensityEstimate mc_density(const SampleSet& s, const Vec& x, const Vec& y,
                           const std::vector<double>& bandwidth, int threads) {
    if (s.n < 10000) throw InsufficientSamples("mc_density needs >= 1e4 samples");
    const int d = s.d;
    const int nbatch = 16;
    std::vector<double> batch_sum(nbatch, 0.0);

    double norm = 1.0;
    for (int i = 0; i < 2 * d; ++i) norm /= bandwidth[i] * std::sqrt(2 * kPi);

    // batches are contiguous path ranges, each summed sequentially, so the
    // result is independent of the thread count
    parallel_for(nbatch, threads, [&](std::int64_t bb, std::int64_t be) {
        for (std::int64_t batch = bb; batch < be; ++batch) {
            std::int64_t lo = batch * s.n / nbatch, hi = (batch + 1) * s.n / nbatch;
            double acc = 0;
            for (std::int64_t p = lo; p < hi; ++p) {
                double e = 0;
                for (int i = 0; i < d; ++i) {
                    double zx = (s.X[i][p] - x[i]) / bandwidth[i];
                    double zy = (s.Y[i][p] - y[i]) / bandwidth[d + i];
                    e += zx * zx + zy * zy;
                }
                acc += std::exp(-0.5 * e);
            }
            batch_sum[batch] = acc;
        }
    });

    std::vector<double> bmeans(nbatch);
    double total = 0;
    for (int b = 0; b < nbatch; ++b) {
        std::int64_t lo = b * s.n / nbatch, hi = (b + 1) * s.n / nbatch;
        bmeans[b] = norm * batch_sum[b] / double(hi - lo);
        total += batch_sum[b];
    }
    DensityEstimate est;
    est.value = norm * total / double(s.n);
    est.bandwidth = bandwidth;
    double var = 0;
    for (double v : bmeans) var += (v - est.value) * (v - est.value);
    var /= (nbatch - 1);
    est.stderr_ = std::sqrt(var / nbatch);
    return est;
}

std::pair<double, double> flat_torus_kernel(double ell, double t, double h, const Vec& x,
                                            const Vec& y, const Vec& x0, const Vec& y0,
                                            int m_max) {
    if (m_max < 3) throw ConfigError("flat_torus_kernel needs m_max >= 3");
    double total = 0, last = 0;
    for (int m = -m_max; m <= m_max; ++m) {
        Vec xs = x;
        xs[0] += m * ell;
        double v = exact_flat_kernel(t, h, xs, y, x0, y0);
        total += v;
        if (std::abs(m) == m_max) last = std::max(last, v);
    }
    return {total, last};
}

}  // namespace sgf
