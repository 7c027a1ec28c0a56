#include <doctest.h>

#include "sgf/kernel.hpp"
#include "sgf/oracle.hpp"

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

BvpOptions tight() {
    BvpOptions o;
    o.tol = 1e-12;
    o.flow.rtol = 1e-12;
    o.flow.atol = 1e-14;
    return o;
}

}  // namespace

TEST_CASE("flat kernel values, both modes") {
    MetricModel flat = MetricModel::flat(1);
    WkbKernel kb(WkbKernel::Mode::bvp, 1.0, flat, v1(0), v1(0), tight());
    WkbKernel ks(WkbKernel::Mode::series, 1.0, flat, v1(0), v1(0), tight());

    double peak = std::sqrt(12.0) / (2 * kPi);
    CHECK(kb.evaluate(1.0, v1(0), v1(0)) == doctest::Approx(peak).epsilon(1e-9));
    CHECK(ks.evaluate(1.0, v1(0), v1(0)) == doctest::Approx(peak).epsilon(1e-12));

    double off = peak * std::exp(-0.5);
    CHECK(kb.evaluate(1.0, v1(-0.5), v1(1.0)) == doctest::Approx(off).epsilon(1e-9));
    CHECK(off == doctest::Approx(0.334405).epsilon(1e-5));

    // modes agree to 1e-10 in the flat case
    for (double t : {0.3, 1.0})
        for (double xx : {-0.4, 0.2})
            for (double yy : {-0.3, 0.6}) {
                double a = kb.evaluate(t, v1(xx), v1(yy));
                double b = ks.evaluate(t, v1(xx), v1(yy));
                CHECK(std::abs(a - b) / a < 1e-10);
            }

    // and both match the exact Kolmogorov kernel
    CHECK(kb.evaluate(0.7, v1(-0.2), v1(0.4)) ==
          doctest::Approx(exact_flat_kernel(0.7, 1.0, v1(-0.2), v1(0.4), v1(0), v1(0)))
              .epsilon(1e-9));
}

TEST_CASE("flat diagonal decay: u(t,z,z) = C t^{-2d} exp(-6|y|^2/(h t))") {
    double h = 0.7, t = 0.4;
    MetricModel flat = MetricModel::flat(1);
    Vec y0 = v1(0.5);
    WkbKernel kb(WkbKernel::Mode::bvp, h, flat, v1(0.1), y0, tight());
    double expect = std::sqrt(12.0) / (2 * kPi * h) / (t * t) *
                    std::exp(-6.0 * 0.25 / (h * t));
    CHECK(kb.evaluate(t, v1(0.1), y0) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("mode agreement on the curved model") {
    MetricModel kap = MetricModel::quadratic(2, kappa_tensor(0.25));
    double h = 0.5, t = 0.2;
    Vec x0 = v2(0, 0), y0 = v2(0.4, 0.2);
    WkbKernel kb(WkbKernel::Mode::bvp, h, kap, x0, y0, tight());
    WkbKernel ks(WkbKernel::Mode::series, h, kap, x0, y0, tight());
    auto [xf, yf] = kb.free_flow(t);
    Vec x = xf + v2(0.02, -0.01), y = yf + v2(0.1, 0.05);
    double ub = kb.evaluate(t, x, y), us = ks.evaluate(t, x, y);
    CHECK(ub > 0);
    CHECK(std::abs(us - ub) / ub < 0.5 * (t + h * t));  // O(t + h t) agreement
}

TEST_CASE("amplitude equivalence along characteristics") {
    SUBCASE("flat") {
        MetricModel flat = MetricModel::flat(1);
        BvpSolution sol = solve_bvp(flat, 1.0, v1(0), v1(0), v1(-0.4), v1(0.9), tight());
        FlowOptions fo;
        fo.rtol = 1e-12;
        fo.atol = 1e-14;
        AmplitudeReport rep = amplitude_equivalence(flat, sol, 0.1, 24, fo);
        CHECK(rep.max_ratio_deviation <= 1e-8);
    }
    SUBCASE("kappa model") {
        MetricModel kap = MetricModel::quadratic(2, kappa_tensor(0.25));
        CotangentState s0 = CotangentState::zero(2);
        s0.y = v2(0.5, 0.2);
        FlowResult ff = integrate_flow(kap, s0, 0.4);
        BvpSolution sol = solve_bvp(kap, 0.4, v2(0, 0), s0.y, ff.final.x + v2(0.03, -0.02),
                                    ff.final.y + v2(0.15, 0.1), tight());
        FlowOptions fo;
        fo.rtol = 1e-10;
        fo.atol = 1e-12;
        AmplitudeReport rep = amplitude_equivalence(kap, sol, 0.1, 24, fo);
        CHECK(rep.max_ratio_deviation <= 1e-5);
    }
    SUBCASE("degenerate start is rejected") {
        MetricModel flat = MetricModel::flat(1);
        BvpSolution sol = solve_bvp(flat, 1.0, v1(0), v1(0), v1(-0.4), v1(0.9), tight());
        CHECK_THROWS_AS(amplitude_equivalence(flat, sol, 0.0), DegenerateTime);
    }
}

TEST_CASE("cutoff bump") {
    MetricModel flat = MetricModel::flat(1);
    WkbKernel k(WkbKernel::Mode::series, 1.0, flat, v1(0), v1(0), tight());
    CutoffSpec spec;
    spec.r = 0.25;
    spec.eps = 0.3;
    double t = 0.5;
    // inner plateau: bit-exact multiplication by 1
    CHECK(apply_cutoff(k, spec, t, v1(0.01), v1(0.02)) == k.evaluate(t, v1(0.01), v1(0.02)));
    // outside
    CHECK(apply_cutoff(k, spec, t, v1(0.3), v1(0)) == 0.0);
    CHECK(apply_cutoff(k, spec, t, v1(0), v1(0.6)) == 0.0);  // |y| > r/t = 0.5
    // boundary layer: strictly between
    double chi = cutoff_value(spec, t, v1(0.22), v1(0), v1(0), v1(0));
    CHECK(chi > 0.0);
    CHECK(chi < 1.0);
}

TEST_CASE("pde residual: flat bvp kernel solves the equation") {
    MetricModel flat = MetricModel::flat(1);
    WkbKernel kb(WkbKernel::Mode::bvp, 1.0, flat, v1(0), v1(0), tight());
    double r = pde_residual(kb, 0.5, v1(-0.1), v1(0.3));
    CHECK(std::abs(r) <= 1e-5);

    // halving the steps moves the (tiny) estimate by a bounded factor
    FdSteps fd;
    fd.dt_rel = 5e-5;
    fd.dx_rel = 5e-4;
    fd.dy_rel = 5e-4;
    double r2 = pde_residual(kb, 0.5, v1(-0.1), v1(0.3), fd);
    CHECK(std::abs(r2) <= 1e-5);
}

TEST_CASE("pde residual scales as h^2 for the series kernel") {
    MetricModel kap = MetricModel::quadratic(2, kappa_tensor(0.25));
    Vec x0 = v2(0, 0), y0 = v2(0, 0);
    const double t = 0.2;
    std::vector<double> hs{0.4, 0.2, 0.1, 0.05}, res;
    for (double hh : hs) {
        WkbKernel ks(WkbKernel::Mode::series, hh, kap, x0, y0, tight());
        auto [xf, yf] = ks.free_flow(t);
        double r = pde_residual(ks, t, xf + v2(0.05 * t, -0.03 * t), yf + v2(0.04, 0.05));
        res.push_back(std::abs(r));
    }
    double slope = loglog_fit(hs, res).second;
    CHECK(std::abs(slope - 2.0) <= 0.2);
}

TEST_CASE("normalization: flat mass is 1") {
    MetricModel flat = MetricModel::flat(1);
    for (double t : {0.5, 1.0}) {
        WkbKernel kb(WkbKernel::Mode::bvp, 1.0, flat, v1(0.2), v1(-0.3), tight());
        MassEstimate est = normalization_check(kb, t, 56);
        CHECK(est.mass == doctest::Approx(1.0).epsilon(1e-8));
    }
    // mass invariant under y0 -> -y0
    WkbKernel ka(WkbKernel::Mode::bvp, 0.8, flat, v1(0), v1(0.4), tight());
    WkbKernel kc(WkbKernel::Mode::bvp, 0.8, flat, v1(0), v1(-0.4), tight());
    CHECK(normalization_check(ka, 0.6, 56).mass ==
          doctest::Approx(normalization_check(kc, 0.6, 56).mass).epsilon(1e-10));
}

TEST_CASE("normalization: curved mass has an O(ht) defect") {
    // the localized kernel u^D is the globally defined object; the raw
    // series blows up far outside its validity polydisk
    MetricModel kap = MetricModel::quadratic(2, kappa_tensor(0.25));
    WkbKernel ks(WkbKernel::Mode::series, 0.5, kap, v2(0, 0), v2(0.3, 0.1), tight());
    CutoffSpec spec;
    spec.r = 0.4;
    spec.eps = 0.3;
    MassEstimate est = normalization_check(ks, 0.2, 30, &spec);
    CHECK(std::abs(est.mass - 1.0) <= 2e-2);
}
