#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sgf/errors.hpp"

namespace sgf {

using Rational = boost::multiprecision::cpp_rational;

/// Exponent vector over a fixed variable universe.
struct Monomial {
    std::vector<std::uint8_t> e;

    explicit Monomial(int nvars = 0) : e(nvars, 0) {}
    int total_degree() const {
        int s = 0;
        for (auto v : e) s += v;
        return s;
    }
    int degree_over(const std::vector<int>& vars) const {
        int s = 0;
        for (int v : vars) s += e[v];
        return s;
    }
    bool operator<(const Monomial& o) const { return e < o.e; }
    bool operator==(const Monomial& o) const { return e == o.e; }
};

/// Sparse multivariate polynomial with exact rational coefficients.
class Poly {
public:
    explicit Poly(int nvars = 0) : nvars_(nvars) {}

    static Poly constant(int nvars, const Rational& c) {
        Poly p(nvars);
        if (c != 0) p.terms_[Monomial(nvars)] = c;
        return p;
    }
    static Poly variable(int nvars, int var, const Rational& c = 1) {
        Poly p(nvars);
        Monomial m(nvars);
        m.e[var] = 1;
        if (c != 0) p.terms_[m] = c;
        return p;
    }

    int nvars() const { return nvars_; }
    bool is_zero() const { return terms_.empty(); }
    size_t term_count() const { return terms_.size(); }
    const std::map<Monomial, Rational>& terms() const { return terms_; }

    void add_term(const Monomial& m, const Rational& c) {
        if (c == 0) return;
        auto it = terms_.find(m);
        if (it == terms_.end()) {
            terms_.emplace(m, c);
        } else {
            it->second += c;
            if (it->second == 0) terms_.erase(it);
        }
    }

    Poly& operator+=(const Poly& o);
    Poly& operator-=(const Poly& o);
    Poly operator+(const Poly& o) const;
    Poly operator-(const Poly& o) const;
    Poly operator-() const;
    Poly operator*(const Poly& o) const;
    Poly scaled(const Rational& c) const;

    Poly derivative(int var) const;

    /// Total degree over a variable subset (max over terms); -1 when zero.
    int degree_over(const std::vector<int>& vars) const;

    /// Splits by homogeneous degree over a variable subset.
    std::map<int, Poly> homogeneous_parts(const std::vector<int>& vars) const;

    /// True iff every term is homogeneous of the given degree over vars.
    bool is_homogeneous(const std::vector<int>& vars, int degree) const;

    /// Rational coefficient of the constant monomial.
    Rational constant_term() const;

    double eval(const std::vector<double>& values) const;

    /// Exact evaluation at rational points.
    Rational eval_exact(const std::vector<Rational>& values) const;

    std::string str(const std::vector<std::string>& names) const;

private:
    int nvars_;
    std::map<Monomial, Rational> terms_;
};

/// Laurent series in t, truncated above t^trunc; coefficients are Poly.
class TSeries {
public:
    TSeries(int nvars, int trunc) : nvars_(nvars), trunc_(trunc) {}

    static TSeries constant(int nvars, int trunc, const Poly& p, int order = 0) {
        TSeries s(nvars, trunc);
        if (!p.is_zero() && order <= trunc) s.c_[order] = p;
        return s;
    }

    int trunc() const { return trunc_; }
    int nvars() const { return nvars_; }
    const std::map<int, Poly>& coeffs() const { return c_; }

    Poly coeff(int order) const {
        auto it = c_.find(order);
        return it == c_.end() ? Poly(nvars_) : it->second;
    }
    void set_coeff(int order, const Poly& p) {
        if (order > trunc_) return;
        if (p.is_zero()) c_.erase(order); else c_[order] = p;
    }
    int min_order() const { return c_.empty() ? trunc_ + 1 : c_.begin()->first; }
    bool is_zero() const { return c_.empty(); }

    TSeries operator+(const TSeries& o) const;
    TSeries operator-(const TSeries& o) const;
    TSeries operator*(const TSeries& o) const;
    TSeries scaled(const Rational& r) const;
    TSeries scaled_poly(const Poly& p) const;
    TSeries shifted(int k) const;       // multiply by t^k
    TSeries dt() const;                  // d/dt
    TSeries integrate() const;           // definite integral from 0, term-wise
    TSeries apply(const std::function<Poly(const Poly&)>& f) const;

private:
    int nvars_, trunc_;
    std::map<int, Poly> c_;
};

}  // namespace sgf
