#include <doctest.h>

#include "sgf/action.hpp"
#include "sgf/wkb.hpp"

using namespace sgf;

TEST_CASE("exactly-zero residuals for the solved hierarchy") {
    for (int d : {1, 2}) {
        const WkbExpansion& e = wkb_expansion(d);
        for (const auto& [k, p] : e.hj_residual_coeffs()) {
            INFO("HJ order ", k);
            CHECK(p.is_zero());
        }
        for (const auto& [k, p] : e.transport_residual_coeffs()) {
            INFO("transport order ", k);
            CHECK(p.is_zero());
        }
    }
}

TEST_CASE("alpha = 2d") {
    CHECK(wkb_expansion(1).alpha() == Rational(2));
    CHECK(wkb_expansion(2).alpha() == Rational(4));
}

TEST_CASE("structure of the series") {
    const WkbExpansion& e = wkb_expansion(2);
    const VarTable& vt = e.vars();
    std::vector<int> all = vt.xi_y_vars();
    for (int i = 0; i < 2; ++i) all.push_back(vt.y0(i));

    CHECK(e.sigma().at(0).is_zero());
    CHECK(e.psi().at(1).is_zero());
    CHECK(e.psi().at(0).constant_term() == Rational(1));

    // Sigma_1 homogeneous of degree 4 in (xi, y, y0); psi_2 of degree <= 2
    CHECK(e.sigma().at(1).is_homogeneous(all, 4));
    CHECK(e.psi().at(2).degree_over(all) <= 2);

    // linearity in the tensor: every term carries exactly one tensor entry
    std::vector<int> tvars;
    for (int v = 6; v < vt.nvars(); ++v) tvars.push_back(v);
    CHECK(e.sigma().at(1).is_homogeneous(tvars, 1));
    CHECK(e.psi().at(2).is_homogeneous(tvars, 1));
}

TEST_CASE("flat tensor kills the corrections; scaling doubles them") {
    const WkbExpansion& e = wkb_expansion(2);
    const VarTable& vt = e.vars();
    CHECK(bind_tensor(e.sigma().at(1), vt, QuadTensor(2)).is_zero());
    CHECK(bind_tensor(e.psi().at(2), vt, QuadTensor(2)).is_zero());

    Poly s1 = bind_tensor(e.sigma().at(1), vt, kappa_tensor(0.25));
    Poly s2 = bind_tensor(e.sigma().at(1), vt, kappa_tensor(0.5));
    CHECK((s2 - s1.scaled(2)).is_zero());
    Poly p1 = bind_tensor(e.psi().at(2), vt, kappa_tensor(0.25));
    Poly p2 = bind_tensor(e.psi().at(2), vt, kappa_tensor(0.5));
    CHECK((p2 - p1.scaled(2)).is_zero());
}

TEST_CASE("series accessors clamp and bind per model") {
    MetricModel flat = MetricModel::flat(1);
    PolySeries s = sigma_series(flat, 1);
    CHECK(s.at(1).is_zero());
    auto [alpha, psi] = psi_series(flat, 2);
    CHECK(alpha == Rational(2));
    CHECK(psi.at(2).is_zero());
    CHECK_THROWS_AS(sigma_series(MetricModel::extension(
                        1, [](const Vec&) { return MetricJet{}; }, 1.0), 1),
                    UnsupportedVariant);
}

TEST_CASE("untransform: flat closed form") {
    MetricModel flat = MetricModel::flat(1);
    PolySeries sig = sigma_series(flat, 1);
    auto [alpha, psi] = psi_series(flat, 2);
    Vec x(1), y(1), y0(1), xf(1), yf(1);
    x << -0.5;
    y << 1.0;
    y0 << 0.0;
    xf << 0.0;
    yf << 0.0;
    Untransformed u =
        untransform(sig, psi, alpha, QuadTensor(1), 1.0, x, y, y0, xf, yf);
    CHECK(u.S == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(u.phi == doctest::Approx(1.0).epsilon(1e-14));  // t^{-2d} at t=1

    Untransformed u2 =
        untransform(sig, psi, alpha, QuadTensor(1), 0.5, x, y, y0, xf, yf);
    CHECK(u2.phi == doctest::Approx(std::pow(0.5, -2.0)).epsilon(1e-14));
}

TEST_CASE("series vs bvp action: order >= 1.5 once Sigma_1 is included") {
    MetricModel kap = MetricModel::quadratic(2, kappa_tensor(0.25));
    const WkbExpansion& e = wkb_expansion(2);
    const VarTable& vt = e.vars();
    Vec y0(2), xihat(2), what(2);
    y0 << 0.5, 0.2;
    xihat << 0.3, -0.2;
    what << 0.25, 0.15;
    BvpOptions opts;
    opts.tol = 1e-12;
    opts.flow.rtol = 1e-12;
    opts.flow.atol = 1e-14;

    std::vector<double> ts{0.4, 0.2, 0.1, 0.05}, err0, err1, ampdev;
    for (double t : ts) {
        CotangentState s0 = CotangentState::zero(2);
        s0.y = y0;
        FlowResult ff = integrate_flow(kap, s0, t, opts.flow);
        Vec x = ff.final.x + t * xihat;
        Vec y = ff.final.y + what;
        BvpSolution sol = solve_bvp(kap, t, Vec::Zero(2), y0, x, y, opts);
        double S = two_point_action(kap, sol).S;
        std::vector<double> vals = vt.values(xihat, what, y0, kap.tensor());
        double sm1 = e.sigma().at(-1).eval(vals);
        double s1 = e.sigma().at(1).eval(vals);
        err0.push_back(std::abs(S - sm1 / t));
        err1.push_back(std::abs(S - (sm1 / t + t * s1)));

        double psi2 = e.psi().at(2).eval(vals);
        double amp_series = std::pow(t, -4.0) * (1 + t * t * psi2) * 12.0;
        double amp_bvp = 1.0 / std::sqrt(std::abs(sol.variational.J));
        ampdev.push_back(std::abs(amp_series / amp_bvp - 1.0));
    }
    CHECK(loglog_fit(ts, err0).second >= 0.9);
    CHECK(loglog_fit(ts, err1).second >= 1.5);
    // with the wrong psi_2 multiplier this fit drops to 2
    CHECK(loglog_fit(ts, ampdev).second >= 2.5);
}

TEST_CASE("liouville normalization: t^{2d} |J|^{-1/2} -> 12^{d/2}") {
    SUBCASE("flat: exact identity") {
        MetricModel flat = MetricModel::flat(1);
        for (double t : {0.1, 0.5, 1.0}) {
            CotangentState s0 = CotangentState::zero(1);
            s0.y[0] = 0.3;
            VariationalResult v = variational_flow(flat, s0, t);
            CHECK(t * t / std::sqrt(std::abs(v.J)) ==
                  doctest::Approx(std::sqrt(12.0)).epsilon(1e-10));
        }
    }
    SUBCASE("curved: O(t) deviation") {
        MetricModel kap = MetricModel::quadratic(2, kappa_tensor(0.25));
        std::vector<double> ts{0.4, 0.2, 0.1, 0.05}, dev;
        for (double t : ts) {
            CotangentState s0 = CotangentState::zero(2);
            s0.y << 0.5, 0.2;
            VariationalResult v = variational_flow(kap, s0, t);
            dev.push_back(std::abs(std::pow(t, 4.0) / std::sqrt(std::abs(v.J)) / 12.0 - 1.0));
        }
        CHECK(dev.back() < 0.02);
        CHECK(loglog_fit(ts, dev).second >= 0.8);
    }
}

TEST_CASE("reference fixture diff is reported, not asserted") {
    const WkbExpansion& e = wkb_expansion(2);
    const VarTable& vt = e.vars();
    QuadTensor tens = kappa_tensor(0.25);
    Poly diff1 = bind_tensor(e.sigma().at(1), vt, tens) -
                 expand_reference(sigma1_reference(), vt, tens);
    Poly diff2 = bind_tensor(e.psi().at(2), vt, tens) -
                 expand_reference(psi2_reference(), vt, tens);
    MESSAGE("sigma1 published-table diff terms: ", diff1.term_count(),
            " (defining-equation residual is authoritative)");
    MESSAGE("psi2 published-table diff terms: ", diff2.term_count());
    // the tables exist and expand to something nontrivial for this model
    CHECK(!expand_reference(sigma1_reference(), vt, tens).is_zero());
}
