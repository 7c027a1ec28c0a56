#include <doctest.h>

#include "sgf/geometry.hpp"

using namespace sgf;

namespace {

Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

// central-difference oracles on metric_at
Mat fd_dg(const MetricModel& m, const Vec& x, int k, double step) {
    Vec xp = x, xm = x;
    xp[k] += step;
    xm[k] -= step;
    Mat c1 = (m.metric_at(xp) - m.metric_at(xm)) / (2 * step);
    xp[k] += step;
    xm[k] -= step;
    Mat c2 = (m.metric_at(xp) - m.metric_at(xm)) / (4 * step);
    return (4 * c1 - c2) / 3.0;  // 4th order
}

}  // namespace

TEST_CASE("flat metric jets vanish") {
    MetricModel m = MetricModel::flat(1);
    Vec x(1);
    x << 0.3;
    MetricJet jet = m.jet(x);
    CHECK(jet.g(0, 0) == 1.0);
    CHECK(jet.G(0, 0) == 1.0);
    CHECK(jet.dg[0].norm() == 0.0);
    CHECK(jet.dG[0].norm() == 0.0);
    CHECK(jet.d2G[0][0].norm() == 0.0);
}

TEST_CASE("quadratic normal metric values at x=(0.1,0)") {
    MetricModel m = MetricModel::quadratic(2, kappa_tensor(0.25));
    Mat g = m.metric_at(vec2(0.1, 0.0));
    // g11 = 1 + 1/2 (-2 kappa) x1^2 = 0.9975, g22 = 1.0025
    CHECK(g(0, 0) == doctest::Approx(0.9975).epsilon(1e-14));
    CHECK(g(1, 1) == doctest::Approx(1.0025).epsilon(1e-14));
    CHECK(g(0, 1) == 0.0);
}

TEST_CASE("analytic jets match finite differences") {
    MetricModel m = MetricModel::quadratic(2, kappa_tensor(0.25));
    Vec x = vec2(0.1, -0.07);
    MetricJet jet = m.jet(x);

    CHECK((jet.g * jet.G - Mat::Identity(2, 2)).norm() < 1e-12);

    for (int k = 0; k < 2; ++k) {
        Mat fd = fd_dg(m, x, k, 1e-3);
        CHECK((jet.dg[k] - fd).norm() < 1e-6 * (1 + fd.norm()));
    }
    // dG by differencing the inverse
    for (int k = 0; k < 2; ++k) {
        Vec xp = x, xm = x;
        xp[k] += 1e-4;
        xm[k] -= 1e-4;
        Mat fd = (m.jet(xp).G - m.jet(xm).G) / (2e-4);
        CHECK((jet.dG[k] - fd).norm() < 1e-6);
    }
    // d2G and d3G by differencing dG
    for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) {
            Vec xp = x, xm = x;
            xp[l] += 1e-4;
            xm[l] -= 1e-4;
            Mat fd = (m.jet(xp).dG[k] - m.jet(xm).dG[k]) / (2e-4);
            CHECK((jet.d2G[k][l] - fd).norm() < 1e-6);
            for (int n = 0; n < 2; ++n) {
                Vec xp2 = x, xm2 = x;
                xp2[n] += 1e-4;
                xm2[n] -= 1e-4;
                Mat fd3 = (m.jet(xp2).d2G[k][l] - m.jet(xm2).d2G[k][l]) / (2e-4);
                CHECK((jet.d3G[k][l][n] - fd3).norm() < 1e-5);
            }
        }
}

TEST_CASE("jet symmetry in the derivative indices") {
    MetricModel m = MetricModel::quadratic(2, kappa_tensor(0.4));
    MetricJet jet = m.jet(vec2(0.12, 0.05));
    for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) {
            CHECK((jet.d2G[k][l] - jet.d2G[l][k]).norm() < 1e-14);
            CHECK((jet.d2G[k][l] - jet.d2G[k][l].transpose()).norm() < 1e-14);
        }
}

TEST_CASE("zero tensor behaves like flat") {
    MetricModel flat = MetricModel::flat(2);
    MetricModel zero = MetricModel::quadratic(2, QuadTensor(2));
    Vec x = vec2(0.2, -0.1);
    MetricJet a = flat.jet(x), b = zero.jet(x);
    CHECK((a.g - b.g).norm() == 0.0);
    CHECK((a.G - b.G).norm() == 0.0);
    CHECK(b.dG[0].norm() == 0.0);
    CHECK(scalar_curvature(zero) == 0.0);
}

TEST_CASE("validate_normal_coords") {
    SUBCASE("zero tensor: all residuals vanish") {
        ValidationReport rep = validate_normal_coords(MetricModel::quadratic(2, QuadTensor(2)));
        CHECK(rep.sym_lower_residual == 0.0);
        CHECK(rep.trace_free_residual == 0.0);
    }
    SUBCASE("kappa model: trace-free, quartic det deviation") {
        ValidationReport rep =
            validate_normal_coords(MetricModel::quadratic(2, kappa_tensor(0.25)));
        CHECK(rep.trace_free_residual == 0.0);
        CHECK(rep.det_fit_exponent >= 3.5);
    }
    SUBCASE("constructed trace violation is reported") {
        QuadTensor c(2);
        c.set(0, 0, 1, 1, 1.0);
        ValidationReport rep = validate_normal_coords(MetricModel::quadratic(2, c));
        CHECK(rep.trace_free_residual == doctest::Approx(1.0));
    }
}

TEST_CASE("scalar curvature") {
    CHECK(scalar_curvature(MetricModel::quadratic(2, kappa_tensor(0.25))) ==
          doctest::Approx(-1.0).epsilon(1e-15));
    // linearity under tensor scaling
    CHECK(scalar_curvature(MetricModel::quadratic(2, kappa_tensor(0.25).scaled(3.0))) ==
          doctest::Approx(-3.0).epsilon(1e-15));
    CHECK(scalar_curvature(MetricModel::flat(2)) == 0.0);
    CHECK_THROWS_AS(scalar_curvature(MetricModel::extension(
                        1, [](const Vec&) { return MetricJet{}; }, 1.0)),
                    UnsupportedVariant);
}

TEST_CASE("chart guards") {
    MetricModel m = MetricModel::quadratic(2, kappa_tensor(0.25));
    CHECK(m.validity_radius() > 0.5);
    Vec far = vec2(10.0, 0.0);
    CHECK_THROWS_AS(m.metric_at(far), OutOfChart);
}
