#include <doctest.h>

#include "sgf/poly.hpp"
#include "sgf/wkb.hpp"

using namespace sgf;

TEST_CASE("rational polynomial arithmetic") {
    VarTable vt(1);
    Poly x = vt.xi_p(0), y = vt.yv_p(0);
    Poly p = (x + y) * (x - y);
    Poly q = x * x - y * y;
    CHECK((p - q).is_zero());

    Poly dp = p.derivative(vt.xi(0));
    CHECK((dp - x.scaled(2)).is_zero());

    CHECK(p.eval({2.0, 3.0, 0.0, 0.0}) == doctest::Approx(-5.0));
    CHECK(p.is_homogeneous(vt.xi_y_vars(), 2));
}

TEST_CASE("resonance operator eigenvalues are {1,2}") {
    auto [l1, l2] = ResonanceOperator::eigenvalues();
    CHECK(l1 == Rational(1));
    CHECK(l2 == Rational(2));
    // characteristic polynomial of [[-1,-1],[6,4]]: l^2 - 3l + 2
    CHECK(l1 + l2 == Rational(3));
    CHECK(l1 * l2 == Rational(2));
}

TEST_CASE("resonance solve: hand-checked d=1 example") {
    // lambda = 1, rhs = xi^2  ->  u = 4/5 xi^2 + 3/10 xi y + 1/30 y^2
    VarTable vt(1);
    Poly rhs = vt.xi_p(0) * vt.xi_p(0);
    Poly u = solve_linear_resonance({Rational(1)}, rhs, vt);

    Poly expect = (vt.xi_p(0) * vt.xi_p(0)).scaled(Rational(4, 5)) +
                  (vt.xi_p(0) * vt.yv_p(0)).scaled(Rational(3, 10)) +
                  (vt.yv_p(0) * vt.yv_p(0)).scaled(Rational(1, 30));
    CHECK((u - expect).is_zero());

    // residual of the defining equation is exactly zero
    Poly resid = u;  // lambda u
    Poly op = (-vt.xi_p(0) - vt.yv_p(0)) * u.derivative(vt.xi(0)) +
              (vt.xi_p(0).scaled(6) + vt.yv_p(0).scaled(4)) * u.derivative(vt.yv(0));
    resid += op;
    resid -= rhs;
    CHECK(resid.is_zero());
}

TEST_CASE("resonance solve: zero input, guards") {
    VarTable vt(2);
    CHECK(solve_linear_resonance({Rational(1)}, Poly(vt.nvars()), vt).is_zero());
    Poly mixed = vt.xi_p(0) + vt.xi_p(0) * vt.xi_p(1);
    CHECK_THROWS_AS(solve_linear_resonance({Rational(1)}, mixed, vt),
                    NonHomogeneousInput);
    CHECK_THROWS_AS(
        solve_linear_resonance({Rational(0)}, Poly::constant(vt.nvars(), 1), vt),
        ResonantMode);
    // the decomposing variant accepts mixed degrees
    CHECK(!solve_resonance({Rational(1)}, mixed, vt).is_zero());
}

TEST_CASE("sigma_minus1: exact scalars and quadratic form") {
    VarTable vt(2);
    SigmaMinusOne s = sigma_minus1(vt);
    CHECK(s.A == Rational(12));
    CHECK(s.B == Rational(6));
    CHECK(s.C == Rational(4));

    Poly expect(vt.nvars());
    for (int i = 0; i < 2; ++i) {
        expect += (vt.xi_p(i) * vt.xi_p(i)).scaled(6);
        expect += (vt.xi_p(i) * vt.yv_p(i)).scaled(6);
        expect += (vt.yv_p(i) * vt.yv_p(i)).scaled(2);
    }
    CHECK((s.form - expect).is_zero());

    // value at (xi, y) = (1, 0) in d=1
    VarTable v1(1);
    SigmaMinusOne s1 = sigma_minus1(v1);
    CHECK(s1.form.eval({1.0, 0.0, 0.0, 0.0}) == doctest::Approx(6.0));
}

TEST_CASE("truncated Laurent series algebra") {
    VarTable vt(1);
    TSeries a(vt.nvars(), 3);
    a.set_coeff(-1, Poly::constant(vt.nvars(), 1));
    a.set_coeff(1, vt.xi_p(0));
    TSeries b = a * a;
    CHECK(b.coeff(-2).constant_term() == Rational(1));
    CHECK((b.coeff(0) - vt.xi_p(0).scaled(2)).is_zero());
    CHECK((b.coeff(2) - vt.xi_p(0) * vt.xi_p(0)).is_zero());

    TSeries da = a.dt();
    CHECK(da.coeff(-2).constant_term() == Rational(-1));
    CHECK((da.coeff(0) - vt.xi_p(0)).is_zero());
}
