#include "sgf/poly.hpp"

#include <functional>
#include <sstream>

namespace sgf {

Poly& Poly::operator+=(const Poly& o) {
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
}

Poly& Poly::operator-=(const Poly& o) {
    for (const auto& [m, c] : o.terms_) add_term(m, -c);
    return *this;
}

Poly Poly::operator+(const Poly& o) const {
    Poly r = *this;
    r += o;
    return r;
}

Poly Poly::operator-(const Poly& o) const {
    Poly r = *this;
    r -= o;
    return r;
}

Poly Poly::operator-() const {
    Poly r(nvars_);
    for (const auto& [m, c] : terms_) r.terms_[m] = -c;
    return r;
}

Poly Poly::operator*(const Poly& o) const {
    Poly r(nvars_);
    for (const auto& [ma, ca] : terms_)
        for (const auto& [mb, cb] : o.terms_) {
            Monomial m(nvars_);
            for (int i = 0; i < nvars_; ++i) m.e[i] = std::uint8_t(ma.e[i] + mb.e[i]);
            r.add_term(m, ca * cb);
        }
    return r;
}

Poly Poly::scaled(const Rational& c) const {
    Poly r(nvars_);
    if (c == 0) return r;
    for (const auto& [m, v] : terms_) r.terms_[m] = v * c;
    return r;
}

Poly Poly::derivative(int var) const {
    Poly r(nvars_);
    for (const auto& [m, c] : terms_) {
        if (m.e[var] == 0) continue;
        Monomial n = m;
        n.e[var] -= 1;
        r.add_term(n, c * m.e[var]);
    }
    return r;
}

int Poly::degree_over(const std::vector<int>& vars) const {
    int deg = -1;
    for (const auto& [m, c] : terms_) deg = std::max(deg, m.degree_over(vars));
    return deg;
}

std::map<int, Poly> Poly::homogeneous_parts(const std::vector<int>& vars) const {
    std::map<int, Poly> parts;
    for (const auto& [m, c] : terms_) {
        int deg = m.degree_over(vars);
        auto it = parts.find(deg);
        if (it == parts.end()) {
            Poly p(nvars_);
            p.add_term(m, c);
            parts.emplace(deg, std::move(p));
        } else {
            it->second.add_term(m, c);
        }
    }
    return parts;
}

bool Poly::is_homogeneous(const std::vector<int>& vars, int degree) const {
    for (const auto& [m, c] : terms_)
        if (m.degree_over(vars) != degree) return false;
    return true;
}

Rational Poly::constant_term() const {
    auto it = terms_.find(Monomial(nvars_));
    return it == terms_.end() ? Rational(0) : it->second;
}

double Poly::eval(const std::vector<double>& values) const {
    double s = 0;
    for (const auto& [m, c] : terms_) {
        double t = c.convert_to<double>();
        for (int i = 0; i < nvars_; ++i)
            for (int k = 0; k < m.e[i]; ++k) t *= values[i];
        s += t;
    }
    return s;
}

Rational Poly::eval_exact(const std::vector<Rational>& values) const {
    Rational s = 0;
    for (const auto& [m, c] : terms_) {
        Rational t = c;
        for (int i = 0; i < nvars_; ++i)
            for (int k = 0; k < m.e[i]; ++k) t *= values[i];
        s += t;
    }
    return s;
}

std::string Poly::str(const std::vector<std::string>& names) const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [m, c] : terms_) {
        if (!first) os << " + ";
        first = false;
        os << c.str();
        for (int i = 0; i < nvars_; ++i)
            if (m.e[i] > 0) {
                os << "*" << names[i];
                if (m.e[i] > 1) os << "^" << int(m.e[i]);
            }
    }
    return os.str();
}

TSeries TSeries::operator+(const TSeries& o) const {
    TSeries r(nvars_, std::min(trunc_, o.trunc_));
    for (const auto& [k, p] : c_)
        if (k <= r.trunc_) r.c_[k] = p;
    for (const auto& [k, p] : o.c_) {
        if (k > r.trunc_) continue;
        auto it = r.c_.find(k);
        if (it == r.c_.end()) r.c_[k] = p;
        else {
            it->second += p;
            if (it->second.is_zero()) r.c_.erase(it);
        }
    }
    return r;
}

TSeries TSeries::operator-(const TSeries& o) const { return *this + o.scaled(-1); }

TSeries TSeries::operator*(const TSeries& o) const {
    TSeries r(nvars_, std::min(trunc_, o.trunc_));
    for (const auto& [ka, pa] : c_)
        for (const auto& [kb, pb] : o.c_) {
            int k = ka + kb;
            if (k > r.trunc_) continue;
            Poly prod = pa * pb;
            auto it = r.c_.find(k);
            if (it == r.c_.end()) r.c_[k] = std::move(prod);
            else {
                it->second += prod;
                if (it->second.is_zero()) r.c_.erase(it);
            }
        }
    return r;
}

TSeries TSeries::scaled(const Rational& v) const {
    TSeries r(nvars_, trunc_);
    if (v == 0) return r;
    for (const auto& [k, p] : c_) r.c_[k] = p.scaled(v);
    return r;
}

TSeries TSeries::scaled_poly(const Poly& q) const {
    TSeries r(nvars_, trunc_);
    if (q.is_zero()) return r;
    for (const auto& [k, p] : c_) {
        Poly prod = p * q;
        if (!prod.is_zero()) r.c_[k] = std::move(prod);
    }
    return r;
}

TSeries TSeries::shifted(int s) const {
    TSeries r(nvars_, trunc_);
    for (const auto& [k, p] : c_)
        if (k + s <= trunc_) r.c_[k + s] = p;
    return r;
}

TSeries TSeries::dt() const {
    TSeries r(nvars_, trunc_ - 1);
    for (const auto& [k, p] : c_) {
        if (k == 0) continue;
        if (k - 1 <= r.trunc_) r.c_[k - 1] = p.scaled(k);
    }
    return r;
}

TSeries TSeries::integrate() const {
    TSeries r(nvars_, trunc_ + 1);
    for (const auto& [k, p] : c_) {
        if (k == -1) throw NonHomogeneousInput("cannot integrate a 1/t term");
        if (k + 1 <= r.trunc_) r.c_[k + 1] = p.scaled(Rational(1, k + 1));
    }
    return r;
}

TSeries TSeries::apply(const std::function<Poly(const Poly&)>& f) const {
    TSeries r(nvars_, trunc_);
    for (const auto& [k, p] : c_) {
        Poly q = f(p);
        if (!q.is_zero()) r.c_[k] = std::move(q);
    }
    return r;
}

}  // namespace sgf
