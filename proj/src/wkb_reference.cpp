#include "sgf/wkb.hpp"

namespace sgf {

// Reference coefficient tables for the order-t phase term and the order-t^2
// amplitude term, transcribed from a previously published symbolic-algebra
// computation.  Used for diff reports only; the defining-equation residual is
// the authority.  Abstract index slots: 0=i, 1=j, 2=k, 3=l; factor kinds:
// 0 = xi, 1 = y, 2 = y0.

namespace {

ReferenceTerm term(const Rational& c, std::array<int, 4> t,
                   std::vector<std::pair<int, int>> f) {
    return ReferenceTerm{c, t, std::move(f)};
}

constexpr int XI = 0, YV = 1, Y0 = 2;
constexpr int I = 0, J = 1, K = 2, L = 3;

}  // namespace

const std::vector<ReferenceTerm>& sigma1_reference() {
    static const std::vector<ReferenceTerm> table = {
        term(Rational(-14, 15), {I, J, K, L}, {{Y0, K}, {Y0, L}, {YV, I}, {YV, J}}),
        term(Rational(-59, 20), {I, J, K, L}, {{Y0, K}, {Y0, L}, {XI, I}, {YV, J}}),
        term(Rational(3, 5),    {I, J, K, L}, {{Y0, K}, {Y0, L}, {XI, I}, {XI, J}}),
        term(Rational(-2, 15),  {I, J, K, L}, {{Y0, J}, {Y0, L}, {YV, I}, {YV, K}}),
        term(Rational(7, 5),    {I, J, K, L}, {{Y0, J}, {Y0, L}, {XI, I}, {YV, K}}),
        term(Rational(24, 5),   {I, J, K, L}, {{Y0, J}, {Y0, L}, {XI, I}, {XI, K}}),
        term(Rational(1, 15),   {I, J, K, L}, {{Y0, I}, {Y0, J}, {YV, L}, {YV, K}}),
        term(Rational(11, 20),  {I, J, K, L}, {{Y0, I}, {Y0, J}, {XI, K}, {YV, L}}),
        term(Rational(3, 5),    {I, J, K, L}, {{Y0, I}, {Y0, J}, {XI, K}, {XI, L}}),
        term(Rational(7, 10),   {I, J, K, L}, {{Y0, L}, {XI, I}, {YV, K}, {YV, J}}),
        term(Rational(-9, 10),  {I, J, K, L}, {{Y0, L}, {XI, I}, {XI, J}, {YV, K}}),
        term(Rational(-3, 2),   {I, J, K, L}, {{Y0, L}, {XI, I}, {XI, J}, {XI, K}}),
        term(Rational(-1, 5),   {I, J, K, L}, {{Y0, J}, {XI, I}, {YV, L}, {YV, K}}),
        term(Rational(-6, 5),   {I, J, K, L}, {{Y0, J}, {XI, I}, {XI, K}, {YV, L}}),
        term(Rational(-3),      {I, J, K, L}, {{Y0, J}, {XI, I}, {XI, K}, {XI, L}}),
        term(Rational(-3, 56),  {I, J, K, L}, {{XI, I}, {YV, L}, {YV, K}, {YV, J}}),
        term(Rational(1, 7),    {I, J, K, L}, {{XI, I}, {XI, J}, {YV, L}, {YV, K}}),
        term(Rational(5, 7),    {I, J, K, L}, {{XI, I}, {XI, J}, {XI, K}, {YV, L}}),
        term(Rational(1),       {I, J, K, L}, {{XI, I}, {XI, J}, {XI, K}, {XI, L}}),
    };
    return table;
}

const std::vector<ReferenceTerm>& psi2_reference() {
    // The published display nests a common bracket
    //   Br_k = 7/10 g_{ij}^{ik} y0_j - 1/5 g_{kj}^{ii} y0_j
    //          - 3/56 (g_{ki}^{ij} + g_{ki}^{ji} + g_{kj}^{ii}) y_j - g_{ii}^{kl} y0_l
    // multiplied by (1/6) y_k and (5/6) xi_k; expanded here term by term.
    static const std::vector<ReferenceTerm> table = [] {
        std::vector<ReferenceTerm> v;
        // + 3/56 (g_{ki}^{ij} + g_{ki}^{ji} + g_{kj}^{ii}) xi_k xi_j
        v.push_back(term(Rational(3, 56), {K, I, I, J}, {{XI, K}, {XI, J}}));
        v.push_back(term(Rational(3, 56), {K, I, J, I}, {{XI, K}, {XI, J}}));
        v.push_back(term(Rational(3, 56), {K, J, I, I}, {{XI, K}, {XI, J}}));
        // bracket times 1/6 y_k and 5/6 xi_k
        for (auto [w, kind] : {std::pair<Rational, int>{Rational(1, 6), YV},
                               std::pair<Rational, int>{Rational(5, 6), XI}}) {
            v.push_back(term(w * Rational(7, 10), {I, J, I, K}, {{Y0, J}, {kind, K}}));
            v.push_back(term(w * Rational(-1, 5), {K, J, I, I}, {{Y0, J}, {kind, K}}));
            v.push_back(term(w * Rational(-3, 56), {K, I, I, J}, {{YV, J}, {kind, K}}));
            v.push_back(term(w * Rational(-3, 56), {K, I, J, I}, {{YV, J}, {kind, K}}));
            v.push_back(term(w * Rational(-3, 56), {K, J, I, I}, {{YV, J}, {kind, K}}));
            v.push_back(term(w * Rational(-1), {I, I, K, L}, {{Y0, L}, {kind, K}}));
        }
        // - 1/6 g_{ii}^{kl} y0_k y_l - 5/6 g_{ii}^{kl} y0_k xi_l
        v.push_back(term(Rational(-1, 6), {I, I, K, L}, {{Y0, K}, {YV, L}}));
        v.push_back(term(Rational(-5, 6), {I, I, K, L}, {{Y0, K}, {XI, L}}));
        // quadratic tail
        v.push_back(term(Rational(1, 210), {I, J, I, K}, {{YV, K}, {YV, J}}));
        v.push_back(term(Rational(3, 140), {I, J, I, K}, {{XI, J}, {YV, K}}));
        v.push_back(term(Rational(4, 35), {I, J, I, K}, {{XI, J}, {XI, K}}));
        v.push_back(term(Rational(1, 30), {I, I, K, L}, {{YV, L}, {YV, K}}));
        v.push_back(term(Rational(3, 20), {I, I, K, L}, {{XI, K}, {YV, L}}));
        v.push_back(term(Rational(4, 5), {I, I, K, L}, {{XI, K}, {XI, L}}));
        v.push_back(term(Rational(-1, 30), {I, I, K, L}, {{Y0, K}, {Y0, L}}));
        v.push_back(term(Rational(1, 15), {I, J, I, K}, {{Y0, J}, {Y0, K}}));
        v.push_back(term(Rational(-1, 30), {K, J, I, I}, {{Y0, K}, {Y0, J}}));
        return v;
    }();
    return table;
}

Poly expand_reference(const std::vector<ReferenceTerm>& terms, const VarTable& vt,
                      const QuadTensor& tensor) {
    const int d = vt.dim();
    Poly out(vt.nvars());
    std::array<int, 4> idx{};
    for (const auto& tm : terms) {
        for (idx[0] = 0; idx[0] < d; ++idx[0])
            for (idx[1] = 0; idx[1] < d; ++idx[1])
                for (idx[2] = 0; idx[2] < d; ++idx[2])
                    for (idx[3] = 0; idx[3] < d; ++idx[3]) {
                        double tv = tensor(idx[tm.tensor_idx[0]], idx[tm.tensor_idx[1]],
                                           idx[tm.tensor_idx[2]], idx[tm.tensor_idx[3]]);
                        if (tv == 0) continue;
                        Monomial mon(vt.nvars());
                        for (const auto& [kind, slot] : tm.factors) {
                            int var = kind == 0   ? vt.xi(idx[slot])
                                      : kind == 1 ? vt.yv(idx[slot])
                                                  : vt.y0(idx[slot]);
                            mon.e[var] += 1;
                        }
                        // exact: tensor values are dyadic rationals in practice
                        Rational c = tm.coeff;
                        int e2;
                        double mant = std::frexp(tv, &e2);
                        long long mi = static_cast<long long>(std::ldexp(mant, 53));
                        Rational rv(mi);
                        if (53 - e2 >= 0)
                            rv /= Rational(boost::multiprecision::cpp_int(1) << (53 - e2));
                        else
                            rv *= Rational(boost::multiprecision::cpp_int(1) << (e2 - 53));
                        out.add_term(mon, c * rv);
                    }
    }
    return out;
}

}  // namespace sgf
