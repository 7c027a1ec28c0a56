#include "sgf/wkb.hpp"

#include <cmath>
#include <mutex>
#include <sstream>

namespace sgf {

namespace {

using TSVec = std::vector<TSeries>;
using TSMat = std::vector<std::vector<TSeries>>;

Rational rational_from_double(double v) {
    if (v == 0) return 0;
    int e = 0;
    double m = std::frexp(v, &e);  // v = m * 2^e, 0.5 <= |m| < 1
    long long mi = static_cast<long long>(std::ldexp(m, 53));
    Rational r(mi);
    int shift = 53 - e;
    boost::multiprecision::cpp_int den = 1;
    if (shift >= 0) {
        den <<= shift;
        return Rational(boost::multiprecision::cpp_int(mi), den);
    }
    boost::multiprecision::cpp_int num(mi);
    num <<= -shift;
    return Rational(num, 1);
}

}  // namespace

VarTable::VarTable(int d) : d_(d) {
    npairs_ = d * (d + 1) / 2;
    nvars_ = 3 * d + npairs_ * npairs_;
    names_.resize(nvars_);
    for (int i = 0; i < d; ++i) {
        names_[xi(i)] = "xi" + std::to_string(i + 1);
        names_[yv(i)] = "y" + std::to_string(i + 1);
        names_[y0(i)] = "y0_" + std::to_string(i + 1);
        xi_y_.push_back(xi(i));
    }
    for (int i = 0; i < d; ++i) xi_y_.push_back(yv(i));
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j)
            for (int k = 0; k < d; ++k)
                for (int l = k; l < d; ++l) {
                    std::ostringstream os;
                    os << "g(" << i + 1 << "," << j + 1 << "|" << k + 1 << "," << l + 1 << ")";
                    names_[tens(i, j, k, l)] = os.str();
                }
}

int VarTable::tens(int i, int j, int k, int l) const {
    if (i > j) std::swap(i, j);
    if (k > l) std::swap(k, l);
    auto pidx = [&](int a, int b) { return a * d_ - a * (a - 1) / 2 + (b - a); };
    return 3 * d_ + pidx(i, j) * npairs_ + pidx(k, l);
}

std::vector<double> VarTable::values(const Vec& xi_v, const Vec& y_v, const Vec& y0_v,
                                     const QuadTensor& tensor) const {
    std::vector<double> vals(nvars_, 0.0);
    for (int i = 0; i < d_; ++i) {
        vals[xi(i)] = xi_v[i];
        vals[yv(i)] = y_v[i];
        vals[y0(i)] = y0_v[i];
    }
    if (tensor.dim() == d_)
        for (int i = 0; i < d_; ++i)
            for (int j = i; j < d_; ++j)
                for (int k = 0; k < d_; ++k)
                    for (int l = k; l < d_; ++l) vals[tens(i, j, k, l)] = tensor(i, j, k, l);
    return vals;
}

// ---------------------------------------------------------------------------
// symbolic metric pieces
// ---------------------------------------------------------------------------

namespace {

TSeries ts_zero(const VarTable& vt, int trunc) { return TSeries(vt.nvars(), trunc); }

TSeries ts_const(const VarTable& vt, int trunc, const Poly& p, int order = 0) {
    return TSeries::constant(vt.nvars(), trunc, p, order);
}

// g_ij(x(t)) = delta_ij + 1/2 c_ij^{kl} x_k(t) x_l(t), exact for the model.
TSMat metric_of(const VarTable& vt, const TSVec& x, int trunc) {
    const int d = vt.dim();
    TSMat g(d, std::vector<TSeries>(d, ts_zero(vt, trunc)));
    for (int i = 0; i < d; ++i) {
        g[i][i] = ts_const(vt, trunc, Poly::constant(vt.nvars(), 1));
        for (int j = 0; j < d; ++j) {
            TSeries corr = ts_zero(vt, trunc);
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l) {
                    TSeries xx = x[k] * x[l];
                    corr = corr + xx.apply([&](const Poly& p) {
                        return (p * vt.tens_p(i, j, k, l)).scaled(Rational(1, 2));
                    });
                }
            g[i][j] = g[i][j] + corr;
        }
    }
    return g;
}

// (d g / dx^i)_{jk} evaluated along x(t): c_{jk}^{il} x_l(t).
TSMat dg_dir(const VarTable& vt, int i, const TSVec& x, int trunc) {
    const int d = vt.dim();
    TSMat m(d, std::vector<TSeries>(d, ts_zero(vt, trunc)));
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
            TSeries s = ts_zero(vt, trunc);
            for (int l = 0; l < d; ++l)
                s = s + x[l].apply([&](const Poly& p) { return p * vt.tens_p(j, k, i, l); });
            m[j][k] = s;
        }
    return m;
}

TSMat mat_mul(const TSMat& a, const TSMat& b) {
    const int d = int(a.size());
    TSMat r(d, std::vector<TSeries>(d, TSeries(a[0][0].nvars(), a[0][0].trunc())));
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            TSeries s(a[0][0].nvars(), a[0][0].trunc());
            for (int k = 0; k < d; ++k) s = s + a[i][k] * b[k][j];
            r[i][j] = s;
        }
    return r;
}

// Neumann inverse of g = I + A with A = O(t); terminates by truncation.
TSMat inverse_of(const VarTable& vt, const TSMat& g, int trunc) {
    const int d = vt.dim();
    TSMat A(d, std::vector<TSeries>(d, ts_zero(vt, trunc)));
    int minord = trunc + 1;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            A[i][j] = g[i][j];
            if (i == j)
                A[i][j] = A[i][j] - ts_const(vt, trunc, Poly::constant(vt.nvars(), 1));
            if (!A[i][j].is_zero()) minord = std::min(minord, A[i][j].min_order());
        }
    TSMat G(d, std::vector<TSeries>(d, ts_zero(vt, trunc)));
    for (int i = 0; i < d; ++i)
        G[i][i] = ts_const(vt, trunc, Poly::constant(vt.nvars(), 1));
    if (minord > trunc) return G;  // A vanishes to truncation order
    if (minord < 1) throw NonHomogeneousInput("metric correction must vanish at t=0");

    TSMat term = A;
    int sign = -1;
    for (int m = 1; m * minord <= trunc; ++m) {
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                G[i][j] = (sign > 0) ? G[i][j] + term[i][j] : G[i][j] - term[i][j];
        term = mat_mul(term, A);
        sign = -sign;
    }
    return G;
}

// Gamma_i = d G / dx^i along x(t), via dG = -G (dg) G.
TSMat gamma_dir(const VarTable& vt, int i, const TSVec& x, const TSMat& G, int trunc) {
    TSMat dg = dg_dir(vt, i, x, trunc);
    TSMat m = mat_mul(mat_mul(G, dg), G);
    for (auto& row : m)
        for (auto& e : row) e = e.scaled(-1);
    return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// resonance solver
// ---------------------------------------------------------------------------

namespace {

// all monomials of total degree q over the 2d (xi, y) variables
void enumerate_monomials(int nslots, int q, std::vector<std::vector<int>>& out,
                         std::vector<int>& cur, int slot) {
    if (slot == nslots - 1) {
        cur[slot] = q;
        out.push_back(cur);
        return;
    }
    for (int e = q; e >= 0; --e) {
        cur[slot] = e;
        enumerate_monomials(nslots, q - e, out, cur, slot + 1);
    }
}

}  // namespace

Poly solve_linear_resonance(const ResonanceOperator& op, const Poly& rhs, const VarTable& vt) {
    if (rhs.is_zero()) return Poly(vt.nvars());
    const int d = vt.dim();
    const auto& xy = vt.xi_y_vars();
    auto parts = rhs.homogeneous_parts(xy);
    if (parts.size() != 1)
        throw NonHomogeneousInput("rhs mixes (xi,y) degrees; decompose first");
    const int q = parts.begin()->first;

    if (q == 0) {
        if (op.lambda == 0) throw ResonantMode("constant mode with lambda = 0");
        return rhs.scaled(1 / op.lambda);
    }

    // basis of (xi, y)-monomials of degree q
    std::vector<std::vector<int>> expv;
    std::vector<int> cur(2 * d, 0);
    enumerate_monomials(2 * d, q, expv, cur, 0);
    const int nb = int(expv.size());
    std::map<std::vector<int>, int> index;
    for (int i = 0; i < nb; ++i) index[expv[i]] = i;

    // operator matrix on that basis: column j holds L[basis_j]
    std::vector<std::vector<Rational>> M(nb, std::vector<Rational>(nb, 0));
    for (int j = 0; j < nb; ++j) {
        const auto& e = expv[j];
        Rational diag = op.lambda;
        for (int i = 0; i < d; ++i) diag += -Rational(e[i]) + 4 * Rational(e[d + i]);
        M[j][j] += diag;
        for (int i = 0; i < d; ++i) {
            if (e[i] > 0) {  // -y_i d/dxi_i
                auto f = e;
                f[i] -= 1;
                f[d + i] += 1;
                M[index[f]][j] += -Rational(e[i]);
            }
            if (e[d + i] > 0) {  // +6 xi_i d/dy_i
                auto f = e;
                f[d + i] -= 1;
                f[i] += 1;
                M[index[f]][j] += 6 * Rational(e[d + i]);
            }
        }
    }

    // split rhs terms into basis slot x parameter polynomial
    std::vector<Poly> b(nb, Poly(vt.nvars()));
    for (const auto& [mon, c] : rhs.terms()) {
        std::vector<int> key(2 * d, 0);
        Monomial rest = mon;
        for (int i = 0; i < d; ++i) {
            key[i] = mon.e[vt.xi(i)];
            key[d + i] = mon.e[vt.yv(i)];
            rest.e[vt.xi(i)] = 0;
            rest.e[vt.yv(i)] = 0;
        }
        b[index.at(key)].add_term(rest, c);
    }

    // exact Gaussian elimination; rhs entries are parameter polynomials
    std::vector<int> perm(nb);
    for (int i = 0; i < nb; ++i) perm[i] = i;
    for (int col = 0; col < nb; ++col) {
        int piv = -1;
        for (int r2 = col; r2 < nb; ++r2)
            if (M[perm[r2]][col] != 0) {
                piv = r2;
                break;
            }
        if (piv < 0) throw ResonantMode("singular resonance operator at degree " +
                                        std::to_string(q));
        std::swap(perm[col], perm[piv]);
        const Rational pv = M[perm[col]][col];
        for (int r2 = col + 1; r2 < nb; ++r2) {
            int rr = perm[r2];
            if (M[rr][col] == 0) continue;
            Rational f = M[rr][col] / pv;
            for (int c2 = col; c2 < nb; ++c2) M[rr][c2] -= f * M[perm[col]][c2];
            b[rr] -= b[perm[col]].scaled(f);
        }
    }
    std::vector<Poly> u(nb, Poly(vt.nvars()));
    for (int col = nb - 1; col >= 0; --col) {
        Poly acc = b[perm[col]];
        for (int c2 = col + 1; c2 < nb; ++c2)
            acc -= u[c2].scaled(M[perm[col]][c2]);
        u[col] = acc.scaled(1 / M[perm[col]][col]);
    }

    Poly result(vt.nvars());
    for (int j = 0; j < nb; ++j) {
        if (u[j].is_zero()) continue;
        Monomial mon(vt.nvars());
        for (int i = 0; i < d; ++i) {
            mon.e[vt.xi(i)] = std::uint8_t(expv[j][i]);
            mon.e[vt.yv(i)] = std::uint8_t(expv[j][d + i]);
        }
        Poly basis(vt.nvars());
        basis.add_term(mon, 1);
        result += basis * u[j];
    }
    return result;
}

Poly solve_resonance(const ResonanceOperator& op, const Poly& rhs, const VarTable& vt) {
    Poly out(vt.nvars());
    for (const auto& [deg, part] : rhs.homogeneous_parts(vt.xi_y_vars()))
        out += solve_linear_resonance(op, part, vt);
    return out;
}

// ---------------------------------------------------------------------------
// Sigma_{-1}
// ---------------------------------------------------------------------------

namespace {

// exact square root of a nonnegative rational if it exists
bool exact_sqrt(const Rational& r, Rational& root) {
    using boost::multiprecision::cpp_int;
    cpp_int n = boost::multiprecision::numerator(r);
    cpp_int d = boost::multiprecision::denominator(r);
    if (n < 0) return false;
    cpp_int sn = boost::multiprecision::sqrt(n);
    cpp_int sd = boost::multiprecision::sqrt(d);
    if (sn * sn != n || sd * sd != d) return false;
    root = Rational(sn, sd);
    return true;
}

}  // namespace

SigmaMinusOne sigma_minus1(const VarTable& vt) {
    // Quadratic ansatz per dimension: A/2 xi^2 + B xi y + C/2 y^2 inserted in
    // -S - (y+xi) dS/dxi + 1/2 (dS/dy)^2 = 0 gives
    //   B^2 = 3A,  BC = A + 2B,  C^2 = C + 2B.
    // Eliminating: B = (C^2 - C)/2, A = B(C - 2), so C^2 - 7C + 12 = 0.
    Rational disc = Rational(49) - Rational(48);
    Rational sq;
    if (!exact_sqrt(disc, sq)) throw ResonantMode("sigma_minus1: discriminant not rational");
    SigmaMinusOne best;
    bool found = false;
    for (const Rational& c : {(Rational(7) + sq) / 2, (Rational(7) - sq) / 2}) {
        Rational b = (c * c - c) / 2;
        Rational a = b * (c - 2);
        // consistency with the eliminated equation
        if (b * b != 3 * a || b * c != a + 2 * b || c * c != c + 2 * b) continue;
        // positive definiteness of [[a, b], [b, c]]
        if (a > 0 && a * c - b * b > 0) {
            best.A = a;
            best.B = b;
            best.C = c;
            found = true;
        }
    }
    if (!found) throw ResonantMode("sigma_minus1: no positive definite root");

    Poly form(vt.nvars());
    for (int i = 0; i < vt.dim(); ++i) {
        form += (vt.xi_p(i) * vt.xi_p(i)).scaled(best.A / 2);
        form += (vt.xi_p(i) * vt.yv_p(i)).scaled(best.B);
        form += (vt.yv_p(i) * vt.yv_p(i)).scaled(best.C / 2);
    }
    best.form = form;
    return best;
}

// ---------------------------------------------------------------------------
// WkbExpansion
// ---------------------------------------------------------------------------

WkbExpansion::WkbExpansion(int d, int sigma_max, int psi_max)
    : d_(d), sigma_max_(sigma_max), psi_max_(psi_max),
      vt_(std::make_shared<VarTable>(d)) {
    const VarTable& vt = *vt_;
    const int ff_trunc = std::max(sigma_max, psi_max) + 4;

    // symbolic free geodesic flow from (0, y0): x' = -G(x) y, y' as below
    xfree_.assign(d, ts_zero(vt, ff_trunc));
    yfree_.clear();
    for (int i = 0; i < d; ++i) yfree_.push_back(ts_const(vt, ff_trunc, vt.y0_p(i)));
    for (int it = 0; it < ff_trunc + 2; ++it) {
        TSMat g = metric_of(vt, xfree_, ff_trunc);
        TSMat G = inverse_of(vt, g, ff_trunc);
        TSVec rx(d, ts_zero(vt, ff_trunc)), ry(d, ts_zero(vt, ff_trunc));
        for (int i = 0; i < d; ++i) {
            TSeries s = ts_zero(vt, ff_trunc);
            for (int j = 0; j < d; ++j) s = s + G[i][j] * yfree_[j];
            rx[i] = s.scaled(-1);
        }
        for (int i = 0; i < d; ++i) {
            TSMat Gi = gamma_dir(vt, i, xfree_, G, ff_trunc);
            TSeries s = ts_zero(vt, ff_trunc);
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k) s = s + Gi[j][k] * yfree_[j] * yfree_[k];
            ry[i] = s.scaled(Rational(1, 2));
        }
        TSVec nx(d, ts_zero(vt, ff_trunc)), ny(d, ts_zero(vt, ff_trunc));
        for (int i = 0; i < d; ++i) {
            TSeries ix = rx[i];
            nx[i] = TSeries(vt.nvars(), ff_trunc);
            nx[i] = ix.integrate();
            ny[i] = ts_const(vt, ff_trunc, vt.y0_p(i)) + ry[i].integrate();
        }
        xfree_ = nx;
        yfree_ = ny;
    }

    // phase hierarchy
    SigmaMinusOne s1 = sigma_minus1(vt);
    TSeries sig(vt.nvars(), sigma_max_ + 1);
    sig.set_coeff(-1, s1.form);
    {
        TSeries R = assemble_hj(sig, -2);
        if (!R.coeff(-2).is_zero())
            throw ResonantMode("leading-order phase equation not satisfied");
    }
    for (int m = -1; m < sigma_max_; ++m) {
        TSeries R = assemble_hj(sig, m);
        Poly F = R.coeff(m);
        ResonanceOperator op{Rational(m + 1)};
        Poly next = solve_resonance(op, -F, vt);
        if (!next.is_zero()) sig.set_coeff(m + 1, next);
    }
    {
        TSeries R = assemble_hj(sig, sigma_max_ - 1);
        for (int k = -2; k <= sigma_max_ - 1; ++k)
            if (!R.coeff(k).is_zero())
                throw ResonantMode("phase hierarchy residual nonzero at order " +
                                   std::to_string(k));
    }
    sigma_.dim = d;
    sigma_.vars = vt_;
    for (int k = -1; k <= sigma_max_; ++k) sigma_.orders[k] = sig.coeff(k);

    // amplitude hierarchy
    TSeries sig_full(vt.nvars(), psi_max_ + 2);
    for (const auto& [k, p] : sigma_.orders) sig_full.set_coeff(k, p);

    TSeries psi(vt.nvars(), psi_max_ + 1);
    psi.set_coeff(0, Poly::constant(vt.nvars(), 1));

    // alpha from the t^{-1} balance: alpha = 1/2 tr(g(x) d^2 Sigma/dy^2) |_{t^{-1}}
    {
        TSVec x(d, ts_zero(vt, 1));
        for (int i = 0; i < d; ++i) {
            TSeries xi_i = ts_zero(vt, 1);
            xi_i.set_coeff(1, vt.xi_p(i));
            x[i] = xfree_[i] + xi_i;
        }
        TSMat g = metric_of(vt, x, 1);
        TSeries acc(vt.nvars(), 1);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                TSeries d2 = sig_full.apply([&](const Poly& p) {
                    return p.derivative(vt.yv(i)).derivative(vt.yv(j));
                });
                acc = acc + g[i][j] * d2;
            }
        Poly a = acc.coeff(-1).scaled(Rational(1, 2));
        if (a.degree_over(vt.xi_y_vars()) > 0)
            throw ResonantMode("alpha balance is not constant");
        alpha_ = a.constant_term();
    }

    for (int m = 0; m < psi_max_; ++m) {
        TSeries R = assemble_transport(psi, sig_full, alpha_, m);
        Poly F = R.coeff(m);
        ResonanceOperator op{Rational(m + 1)};
        Poly next = solve_resonance(op, -F, vt);
        if (!next.is_zero()) psi.set_coeff(m + 1, next);
    }
    {
        TSeries R = assemble_transport(psi, sig_full, alpha_, psi_max_ - 1);
        for (int k = -1; k <= psi_max_ - 1; ++k)
            if (!R.coeff(k).is_zero())
                throw ResonantMode("transport hierarchy residual nonzero at order " +
                                   std::to_string(k));
    }
    psi_.dim = d;
    psi_.vars = vt_;
    for (int k = 0; k <= psi_max_; ++k) psi_.orders[k] = psi.coeff(k);
}

TSeries WkbExpansion::sigma_as_series(int trunc) const {
    TSeries s(vt_->nvars(), trunc);
    for (const auto& [k, p] : sigma_.orders) s.set_coeff(k, p);
    return s;
}

TSeries WkbExpansion::psi_as_series(int trunc) const {
    TSeries s(vt_->nvars(), trunc);
    for (const auto& [k, p] : psi_.orders) s.set_coeff(k, p);
    return s;
}

TSeries WkbExpansion::assemble_hj(const TSeries& sigma_series, int trunc) const {
    const VarTable& vt = *vt_;
    const int d = d_;
    // geometric pieces need a couple orders more than the residual
    const int gt = trunc + 3;

    TSVec x(d, ts_zero(vt, gt));
    TSVec ytot(d, ts_zero(vt, gt));
    TSVec xf(d, ts_zero(vt, gt)), yf(d, ts_zero(vt, gt));
    for (int i = 0; i < d; ++i) {
        TSeries xi_i = ts_zero(vt, gt);
        xi_i.set_coeff(1, vt.xi_p(i));
        for (const auto& [k, p] : xfree_[i].coeffs())
            if (k <= gt) xf[i].set_coeff(k, p);
        for (const auto& [k, p] : yfree_[i].coeffs())
            if (k <= gt) yf[i].set_coeff(k, p);
        x[i] = xf[i] + xi_i;
        ytot[i] = yf[i] + ts_const(vt, gt, vt.yv_p(i));
    }

    TSMat g_x = metric_of(vt, x, gt);
    TSMat G_x = inverse_of(vt, g_x, gt);
    TSMat g_xf = metric_of(vt, xf, gt);
    TSMat G_xf = inverse_of(vt, g_xf, gt);

    TSVec B(d, ts_zero(vt, gt)), GD(d, ts_zero(vt, gt));
    for (int i = 0; i < d; ++i) {
        TSeries s = ts_const(vt, gt, vt.xi_p(i));
        for (int j = 0; j < d; ++j) s = s + G_x[i][j] * ytot[j] - G_xf[i][j] * yf[j];
        B[i] = s;

        TSMat Gi_x = gamma_dir(vt, i, x, G_x, gt);
        TSMat Gi_xf = gamma_dir(vt, i, xf, G_xf, gt);
        TSeries sd = ts_zero(vt, gt);
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                sd = sd + Gi_x[j][k] * ytot[j] * ytot[k] - Gi_xf[j][k] * yf[j] * yf[k];
        GD[i] = sd;
    }

    TSeries sig(vt.nvars(), gt);
    for (const auto& [k, p] : sigma_series.coeffs())
        if (k <= gt) sig.set_coeff(k, p);

    TSeries R = sig.dt();
    for (int i = 0; i < d; ++i) {
        TSeries dSx = sig.apply([&](const Poly& p) { return p.derivative(vt.xi(i)); });
        TSeries dSy = sig.apply([&](const Poly& p) { return p.derivative(vt.yv(i)); });
        R = R - (B[i] * dSx).shifted(-1);
        R = R + (GD[i] * dSy).scaled(Rational(1, 2));
        for (int j = 0; j < d; ++j) {
            TSeries dSyj = sig.apply([&](const Poly& p) { return p.derivative(vt.yv(j)); });
            R = R + (g_x[i][j] * dSy * dSyj).scaled(Rational(1, 2));
        }
    }
    TSeries out(vt.nvars(), trunc);
    for (const auto& [k, p] : R.coeffs())
        if (k <= trunc) out.set_coeff(k, p);
    return out;
}

TSeries WkbExpansion::assemble_transport(const TSeries& psi_series, const TSeries& sigma_series,
                                         const Rational& alpha, int trunc) const {
    const VarTable& vt = *vt_;
    const int d = d_;
    const int gt = trunc + 3;

    TSVec x(d, ts_zero(vt, gt));
    TSVec ytot(d, ts_zero(vt, gt));
    TSVec xf(d, ts_zero(vt, gt)), yf(d, ts_zero(vt, gt));
    for (int i = 0; i < d; ++i) {
        TSeries xi_i = ts_zero(vt, gt);
        xi_i.set_coeff(1, vt.xi_p(i));
        for (const auto& [k, p] : xfree_[i].coeffs())
            if (k <= gt) xf[i].set_coeff(k, p);
        for (const auto& [k, p] : yfree_[i].coeffs())
            if (k <= gt) yf[i].set_coeff(k, p);
        x[i] = xf[i] + xi_i;
        ytot[i] = yf[i] + ts_const(vt, gt, vt.yv_p(i));
    }
    TSMat g_x = metric_of(vt, x, gt);
    TSMat G_x = inverse_of(vt, g_x, gt);
    TSMat g_xf = metric_of(vt, xf, gt);
    TSMat G_xf = inverse_of(vt, g_xf, gt);

    TSVec B(d, ts_zero(vt, gt)), GD(d, ts_zero(vt, gt));
    for (int i = 0; i < d; ++i) {
        TSeries s = ts_const(vt, gt, vt.xi_p(i));
        for (int j = 0; j < d; ++j) s = s + G_x[i][j] * ytot[j] - G_xf[i][j] * yf[j];
        B[i] = s;
        TSMat Gi_x = gamma_dir(vt, i, x, G_x, gt);
        TSMat Gi_xf = gamma_dir(vt, i, xf, G_xf, gt);
        TSeries sd = ts_zero(vt, gt);
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                sd = sd + Gi_x[j][k] * ytot[j] * ytot[k] - Gi_xf[j][k] * yf[j] * yf[k];
        GD[i] = sd;
    }

    TSeries sig(vt.nvars(), gt);
    for (const auto& [k, p] : sigma_series.coeffs())
        if (k <= gt) sig.set_coeff(k, p);
    TSeries psi(vt.nvars(), gt);
    for (const auto& [k, p] : psi_series.coeffs())
        if (k <= gt) psi.set_coeff(k, p);

    TSeries R = psi.dt() - psi.scaled(alpha).shifted(-1);
    for (int i = 0; i < d; ++i) {
        TSeries dPx = psi.apply([&](const Poly& p) { return p.derivative(vt.xi(i)); });
        TSeries dPy = psi.apply([&](const Poly& p) { return p.derivative(vt.yv(i)); });
        R = R - (B[i] * dPx).shifted(-1);
        R = R + (GD[i] * dPy).scaled(Rational(1, 2));
        for (int j = 0; j < d; ++j) {
            TSeries dSyj = sig.apply([&](const Poly& p) { return p.derivative(vt.yv(j)); });
            R = R + g_x[i][j] * dSyj * dPy;
            TSeries d2S = sig.apply([&](const Poly& p) {
                return p.derivative(vt.yv(i)).derivative(vt.yv(j));
            });
            R = R + (g_x[i][j] * d2S * psi).scaled(Rational(1, 2));
        }
    }
    TSeries out(vt.nvars(), trunc);
    for (const auto& [k, p] : R.coeffs())
        if (k <= trunc) out.set_coeff(k, p);
    return out;
}

std::map<int, Poly> WkbExpansion::hj_residual_coeffs() const {
    TSeries R = assemble_hj(sigma_as_series(sigma_max_ + 1), sigma_max_ - 1);
    std::map<int, Poly> out;
    for (int k = -2; k <= sigma_max_ - 1; ++k) out[k] = R.coeff(k);
    return out;
}

std::map<int, Poly> WkbExpansion::transport_residual_coeffs() const {
    TSeries R = assemble_transport(psi_as_series(psi_max_ + 1),
                                   sigma_as_series(psi_max_ + 2), alpha_, psi_max_ - 1);
    std::map<int, Poly> out;
    for (int k = -1; k <= psi_max_ - 1; ++k) out[k] = R.coeff(k);
    return out;
}

const WkbExpansion& wkb_expansion(int d) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<WkbExpansion>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(d);
    if (it == cache.end())
        it = cache.emplace(d, std::make_unique<WkbExpansion>(d, 1, 2)).first;
    return *it->second;
}

// ---------------------------------------------------------------------------
// binding and evaluation
// ---------------------------------------------------------------------------

Poly bind_tensor(const Poly& p, const VarTable& vt, const QuadTensor& tensor) {
    const int d = vt.dim();
    std::vector<Rational> tv(vt.nvars(), 0);
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j)
            for (int k = 0; k < d; ++k)
                for (int l = k; l < d; ++l)
                    tv[vt.tens(i, j, k, l)] =
                        tensor.dim() == d ? rational_from_double(tensor(i, j, k, l)) : 0;
    Poly out(vt.nvars());
    for (const auto& [mon, c] : p.terms()) {
        Rational factor = c;
        Monomial rest = mon;
        for (int v = 3 * d; v < vt.nvars(); ++v) {
            for (int e = 0; e < mon.e[v]; ++e) factor *= tv[v];
            rest.e[v] = 0;
        }
        if (factor != 0) out.add_term(rest, factor);
    }
    return out;
}

namespace {

void check_series_model(const MetricModel& m) {
    if (m.kind() == MetricModel::Kind::Extension)
        throw UnsupportedVariant("series expansion needs Flat or QuadraticNormal");
}

}  // namespace

PolySeries sigma_series(const MetricModel& m, int max_order) {
    check_series_model(m);
    const WkbExpansion* cached = max_order <= 1 ? &wkb_expansion(m.dim()) : nullptr;
    std::unique_ptr<WkbExpansion> local;
    if (!cached) {
        local = std::make_unique<WkbExpansion>(m.dim(), max_order, 2);
        cached = local.get();
    }
    PolySeries out = cached->sigma();
    if (m.kind() == MetricModel::Kind::Flat)
        for (auto& [k, p] : out.orders) p = bind_tensor(p, cached->vars(), QuadTensor(m.dim()));
    while (!out.orders.empty() && out.orders.rbegin()->first > max_order)
        out.orders.erase(std::prev(out.orders.end()));
    return out;
}

std::pair<Rational, PolySeries> psi_series(const MetricModel& m, int max_order) {
    check_series_model(m);
    const WkbExpansion* cached = max_order <= 2 ? &wkb_expansion(m.dim()) : nullptr;
    std::unique_ptr<WkbExpansion> local;
    if (!cached) {
        local = std::make_unique<WkbExpansion>(m.dim(), std::max(1, max_order - 1), max_order);
        cached = local.get();
    }
    PolySeries out = cached->psi();
    if (m.kind() == MetricModel::Kind::Flat)
        for (auto& [k, p] : out.orders) p = bind_tensor(p, cached->vars(), QuadTensor(m.dim()));
    while (!out.orders.empty() && out.orders.rbegin()->first > max_order)
        out.orders.erase(std::prev(out.orders.end()));
    return {cached->alpha(), out};
}

Untransformed untransform(const PolySeries& sigma, const PolySeries& psi, const Rational& alpha,
                          const QuadTensor& tensor, double t, const Vec& x, const Vec& y,
                          const Vec& y0, const Vec& x_free, const Vec& y_free) {
    if (!(t > 1e-12)) throw DegenerateTime("untransform needs t above machine scale");
    const VarTable& vt = *sigma.vars;
    Untransformed u;
    u.xi = (x - x_free) / t;
    u.w = y - y_free;
    std::vector<double> vals = vt.values(u.xi, u.w, y0, tensor);

    u.S = 0;
    for (const auto& [k, p] : sigma.orders) u.S += std::pow(t, k) * p.eval(vals);
    double psum = 0;
    for (const auto& [k, p] : psi.orders) psum += std::pow(t, k) * p.eval(vals);
    u.phi = std::pow(t, -alpha.convert_to<double>()) * psum;
    return u;
}

}  // namespace sgf
