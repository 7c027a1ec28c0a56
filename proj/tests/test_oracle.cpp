#include <doctest.h>

#include <random>

#include "sgf/oracle.hpp"
#include "sgf/rng.hpp"

using namespace sgf;

namespace {

Vec v1(double a) {
    Vec v(1);
    v << a;
    return v;
}

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST_CASE("philox known-answer vectors") {
    auto r0 = Philox4x32::block(0, {0, 0, 0, 0});
    CHECK(r0[0] == 0x6627e8d5u);
    CHECK(r0[1] == 0xe169c58du);
    CHECK(r0[2] == 0xbc57ac4cu);
    CHECK(r0[3] == 0x9b00dbd8u);

    auto r1 = Philox4x32::block(0xffffffffffffffffull,
                                {0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu});
    CHECK(r1[0] == 0x408f276du);
    CHECK(r1[1] == 0x41c83b0eu);
    CHECK(r1[2] == 0xa20bc7c6u);
    CHECK(r1[3] == 0x6d5451fdu);

    auto r2 = Philox4x32::block(0x299f31d0a4093822ull,
                                {0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u});
    CHECK(r2[0] == 0xd16cfe09u);
    CHECK(r2[1] == 0x94fdccebu);
    CHECK(r2[2] == 0x5001e420u);
    CHECK(r2[3] == 0x24126ea1u);
}

TEST_CASE("exact flat kernel") {
    CHECK(exact_flat_kernel(1.0, 1.0, v1(0), v1(0), v1(0), v1(0)) ==
          doctest::Approx(std::sqrt(12.0) / (2 * kPi)).epsilon(1e-12));
    CHECK(exact_flat_kernel(1.0, 1.0, v1(0), v1(0), v1(0), v1(0)) ==
          doctest::Approx(0.551329).epsilon(1e-5));

    Eigen::Matrix2d W = flat_inverse_covariance(0.5, 1.0);
    CHECK(W(0, 0) == doctest::Approx(96.0));
    CHECK(W(0, 1) == doctest::Approx(24.0));
    CHECK(W(1, 1) == doctest::Approx(8.0));

    // integrates to one (Gauss-Legendre over an 8-sigma box)
    double t = 0.7, h = 0.8;
    double sx = std::sqrt(h * t * t * t / 3), sy = std::sqrt(h * t);
    std::vector<double> nx, wx, ny, wy;
    gauss_legendre(60, -0.3 - 0.7 * t - 8 * sx, -0.3 - 0.7 * t + 8 * sx, nx, wx);
    gauss_legendre(60, 0.7 - 8 * sy, 0.7 + 8 * sy, ny, wy);
    double mass = 0;
    for (size_t i = 0; i < nx.size(); ++i)
        for (size_t j = 0; j < ny.size(); ++j)
            mass += wx[i] * wy[j] *
                    exact_flat_kernel(t, h, v1(nx[i]), v1(ny[j]), v1(-0.3), v1(0.7));
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("sde moments match the flat kernel") {
    SdeConfig cfg;
    cfg.n_paths = 200000;
    cfg.dt = 1.0 / 200;
    cfg.seed = 2024;
    cfg.threads = 2;
    SampleSet s = simulate_sde(MetricModel::flat(1), v1(0), v1(0), 1.0, 1.0, cfg);

    double mx = 0, my = 0;
    for (std::int64_t p = 0; p < s.n; ++p) {
        mx += s.X[0][p];
        my += s.Y[0][p];
    }
    mx /= double(s.n);
    my /= double(s.n);
    double cxx = 0, cxy = 0, cyy = 0;
    for (std::int64_t p = 0; p < s.n; ++p) {
        cxx += (s.X[0][p] - mx) * (s.X[0][p] - mx);
        cxy += (s.X[0][p] - mx) * (s.Y[0][p] - my);
        cyy += (s.Y[0][p] - my) * (s.Y[0][p] - my);
    }
    cxx /= double(s.n);
    cxy /= double(s.n);
    cyy /= double(s.n);

    double se = 3.0 / std::sqrt(double(s.n));
    CHECK(std::abs(mx) < se);
    CHECK(std::abs(my) < se);
    CHECK(std::abs(cxx - 1.0 / 3) < 3 * se);
    CHECK(std::abs(cxy + 0.5) < 3 * se);
    CHECK(std::abs(cyy - 1.0) < 3 * se);
}

TEST_CASE("h = 0 reduces to the deterministic flow") {
    MetricModel kap = MetricModel::quadratic(2, kappa_tensor(0.25));
    SdeConfig cfg;
    cfg.n_paths = 1;
    cfg.dt = 0.3 / 600;
    cfg.seed = 5;
    SampleSet s = simulate_sde(kap, v2(0, 0), v2(0.5, 0.2), 0.3, 0.0, cfg);
    CotangentState s0 = CotangentState::zero(2);
    s0.y = v2(0.5, 0.2);
    FlowResult fr = integrate_flow(kap, s0, 0.3);
    CHECK(std::abs(s.X[0][0] - fr.final.x[0]) < 10 * cfg.dt);
    CHECK(std::abs(s.X[1][0] - fr.final.x[1]) < 10 * cfg.dt);
    CHECK(std::abs(s.Y[0][0] - fr.final.y[0]) < 10 * cfg.dt);
    CHECK(std::abs(s.Y[1][0] - fr.final.y[1]) < 10 * cfg.dt);
}

TEST_CASE("worker count does not change the sample set") {
    SdeConfig a;
    a.n_paths = 5000;
    a.dt = 0.5 / 50;
    a.seed = 77;
    a.threads = 1;
    SdeConfig b = a;
    b.threads = 2;
    MetricModel kap = MetricModel::quadratic(2, kappa_tensor(0.25));
    SampleSet sa = simulate_sde(kap, v2(0, 0), v2(0.3, 0.1), 0.5, 0.5, a);
    SampleSet sb = simulate_sde(kap, v2(0, 0), v2(0.3, 0.1), 0.5, 0.5, b);
    for (int i = 0; i < 2; ++i) {
        CHECK(sa.X[i] == sb.X[i]);
        CHECK(sa.Y[i] == sb.Y[i]);
    }
}

TEST_CASE("kde against the exact kernel") {
    SdeConfig cfg;
    cfg.n_paths = 400000;
    cfg.dt = 1.0 / 200;
    cfg.seed = 99;
    cfg.threads = 2;
    SampleSet s = simulate_sde(MetricModel::flat(1), v1(0), v1(0), 1.0, 1.0, cfg);
    auto bw = silverman_bandwidth(s, 0.4);
    DensityEstimate est = mc_density(s, v1(0), v1(0), bw, 2);
    double exact = exact_flat_kernel(1.0, 1.0, v1(0), v1(0), v1(0), v1(0));
    CHECK(std::abs(est.value - exact) < 3 * est.stderr_);

    // stderr shrinks roughly like 1/sqrt(2) when n doubles
    SdeConfig half = cfg;
    half.n_paths = 200000;
    SampleSet s2 = simulate_sde(MetricModel::flat(1), v1(0), v1(0), 1.0, 1.0, half);
    DensityEstimate est2 = mc_density(s2, v1(0), v1(0), silverman_bandwidth(s2, 0.4), 2);
    double ratio = est2.stderr_ / est.stderr_;
    CHECK(ratio > std::sqrt(2.0) * 0.7);
    CHECK(ratio < std::sqrt(2.0) * 1.4);

    // deep tail: value ~ 0 with stderr at least comparable
    DensityEstimate tail = mc_density(s, v1(-10), v1(10), bw, 1);
    CHECK(tail.value <= tail.stderr_ * 1.0 + 1e-300);

    CHECK_THROWS_AS(mc_density(SampleSet{}, v1(0), v1(0), bw, 1), InsufficientSamples);
}

TEST_CASE("divergence-free drift") {
    MetricModel kap = MetricModel::quadratic(2, kappa_tensor(0.25));
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (int rep = 0; rep < 10; ++rep) {
        Vec x = v2(u(rng), u(rng)), y = v2(3 * u(rng), 3 * u(rng));
        double div = 0;
        const double step = 1e-5;
        for (int i = 0; i < 2; ++i) {
            Vec bxp { }, byp { }, bxm { }, bym { };
            Vec xp = x, xm = x;
            xp[i] += step;
            xm[i] -= step;
            sde_drift(kap, xp, y, bxp, byp);
            sde_drift(kap, xm, y, bxm, bym);
            div += (bxp[i] - bxm[i]) / (2 * step);
            Vec yp = y, ym = y;
            yp[i] += step;
            ym[i] -= step;
            sde_drift(kap, x, yp, bxp, byp);
            sde_drift(kap, x, ym, bxm, bym);
            div += (byp[i] - bym[i]) / (2 * step);
        }
        CHECK(std::abs(div) <= 1e-10 * (1 + y.squaredNorm()));
    }
}

TEST_CASE("wrapped torus kernel") {
    // large circumference limit reproduces the plane kernel
    auto [v_big, tail_big] =
        flat_torus_kernel(50.0, 0.5, 1.0, v1(0.1), v1(0.2), v1(0), v1(0), 5);
    CHECK(v_big == doctest::Approx(exact_flat_kernel(0.5, 1.0, v1(0.1), v1(0.2), v1(0),
                                                     v1(0))).epsilon(1e-12));

    // periodicity in x
    double ell = 2 * kPi;
    auto [va, ta] = flat_torus_kernel(ell, 0.5, 1.0, v1(0.3), v1(0.1), v1(0), v1(0), 8);
    auto [vb, tb] = flat_torus_kernel(ell, 0.5, 1.0, v1(0.3 + ell), v1(0.1), v1(0), v1(0), 8);
    CHECK(va == doctest::Approx(vb).epsilon(1e-12));

    // m = 0 dominates at small t; the |m| = 1 images are tiny
    double m0 = exact_flat_kernel(0.5, 1.0, v1(0), v1(0), v1(0), v1(0));
    auto [vsum, tl] = flat_torus_kernel(ell, 0.5, 1.0, v1(0), v1(0), v1(0), v1(0), 4);
    double img = exact_flat_kernel(0.5, 1.0, v1(ell), v1(0), v1(0), v1(0));
    CHECK(vsum >= m0);
    CHECK((vsum - m0) / m0 < 1e-10);
    CHECK(img / m0 < 1e-10);
    CHECK_THROWS_AS(flat_torus_kernel(ell, 0.5, 1.0, v1(0), v1(0), v1(0), v1(0), 2),
                    ConfigError);
}
