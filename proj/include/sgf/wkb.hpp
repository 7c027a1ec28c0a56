#pragma once

#include <array>
#include <memory>

#include "sgf/geometry.hpp"
#include "sgf/poly.hpp"

namespace sgf {

/// Variable universe of the rescaled expansion for dimension d:
/// xi_i (rescaled position), y_i (shifted tangent variable), y0_i (initial
/// momentum parameters) and the independent entries of the metric tensor
/// c_{ij}^{kl} (canonicalized to i<=j, k<=l).
class VarTable {
public:
    explicit VarTable(int d);

    int dim() const { return d_; }
    int nvars() const { return nvars_; }
    int xi(int i) const { return i; }
    int yv(int i) const { return d_ + i; }
    int y0(int i) const { return 2 * d_ + i; }
    int tens(int i, int j, int k, int l) const;
    const std::vector<std::string>& names() const { return names_; }
    const std::vector<int>& xi_y_vars() const { return xi_y_; }

    Poly xi_p(int i) const { return Poly::variable(nvars_, xi(i)); }
    Poly yv_p(int i) const { return Poly::variable(nvars_, yv(i)); }
    Poly y0_p(int i) const { return Poly::variable(nvars_, y0(i)); }
    Poly tens_p(int i, int j, int k, int l) const {
        return Poly::variable(nvars_, tens(i, j, k, l));
    }

    /// Assembles the evaluation vector [xi, y, y0, tensor entries].
    std::vector<double> values(const Vec& xi, const Vec& y, const Vec& y0,
                               const QuadTensor& tensor) const;

private:
    int d_, npairs_, nvars_;
    std::vector<std::string> names_;
    std::vector<int> xi_y_;
};

/// Expansion coefficients Sigma_k or psi_k, keyed by the power of t.
struct PolySeries {
    int dim = 0;
    std::shared_ptr<const VarTable> vars;
    std::map<int, Poly> orders;

    Poly at(int k) const {
        auto it = orders.find(k);
        return it == orders.end() ? Poly(vars->nvars()) : it->second;
    }
};

/// The linear operator lambda u + (Ax, grad u) of the resonance equation,
/// with A = [[-1,-1],[6,4]] acting on each (xi_i, y_i) pair.
struct ResonanceOperator {
    Rational lambda;
    /// Exact eigenvalues of A from its characteristic polynomial l^2-3l+2.
    static std::pair<Rational, Rational> eigenvalues() { return {1, 2}; }
};

/// Solves lambda u + (Ax, grad u) = rhs for a single homogeneous component
/// (throws NonHomogeneousInput otherwise); exact rational linear solve on the
/// monomial basis of that degree.  ResonantMode when the operator is singular
/// on some mode.
Poly solve_linear_resonance(const ResonanceOperator& op, const Poly& rhs, const VarTable& vt);

/// Decomposes into homogeneous parts and solves each.
Poly solve_resonance(const ResonanceOperator& op, const Poly& rhs, const VarTable& vt);

struct SigmaMinusOne {
    Rational A, B, C;  // Hessian scalars: Sigma_{-1} = A/2 xi^2 + B xi y + C/2 y^2 per dim
    Poly form;         // 6(xi,xi) + 6(xi,y) + 2(y,y)
};

/// Solves the quadratic system B^2 = 3A, BC = A + 2B, C^2 = C + 2B obtained
/// by inserting the quadratic ansatz into the leading-order equation, and
/// selects the positive-definite root (A,B,C) = (12,6,4).
SigmaMinusOne sigma_minus1(const VarTable& vt);

/// Full symbolic expansion state for dimension d: the free geodesic flow
/// Taylor series, the phase series Sigma and amplitude series psi, all with
/// symbolic tensor entries and y0.
class WkbExpansion {
public:
    /// sigma_max >= 1, psi_max >= 2 are what acceptance asserts; higher
    /// orders are supported but not certified.
    WkbExpansion(int d, int sigma_max, int psi_max);

    int dim() const { return d_; }
    const VarTable& vars() const { return *vt_; }
    std::shared_ptr<const VarTable> vars_ptr() const { return vt_; }
    const PolySeries& sigma() const { return sigma_; }
    const PolySeries& psi() const { return psi_; }
    const Rational& alpha() const { return alpha_; }

    /// Residual coefficients of the transformed Hamilton-Jacobi equation with
    /// the stored Sigma inserted (orders -2 .. sigma_max - 1); all must be
    /// exactly zero.
    std::map<int, Poly> hj_residual_coeffs() const;
    /// Same for the transformed transport equation (orders -1 .. psi_max - 1).
    std::map<int, Poly> transport_residual_coeffs() const;

private:
    TSeries assemble_hj(const TSeries& sigma_series, int trunc) const;
    TSeries assemble_transport(const TSeries& psi_series, const TSeries& sigma_series,
                               const Rational& alpha, int trunc) const;
    TSeries sigma_as_series(int trunc) const;
    TSeries psi_as_series(int trunc) const;

    int d_, sigma_max_, psi_max_;
    std::shared_ptr<const VarTable> vt_;
    std::vector<TSeries> xfree_, yfree_;  // symbolic free geodesic flow
    PolySeries sigma_, psi_;
    Rational alpha_ = 0;
};

/// Cached per-dimension expansion (sigma through t^1, psi through t^2).
const WkbExpansion& wkb_expansion(int d);

/// Binds the symbolic tensor entries of p to the model's (exact rational
/// images of the) tensor values; result still lives in the same variable
/// universe but is tensor-free.
Poly bind_tensor(const Poly& p, const VarTable& vt, const QuadTensor& tensor);

/// Sigma series for a model: symbolic in (xi, y, y0), exact-rational
/// coefficients times tensor entries.  Flat models bind the tensor to zero.
PolySeries sigma_series(const MetricModel& m, int max_order);

/// (alpha, psi series); alpha = 2d.
std::pair<Rational, PolySeries> psi_series(const MetricModel& m, int max_order);

/// Evaluates the truncated series at a physical point:
///   S  = Sigma_{-1}(xi, w)/t + t Sigma_1(xi, w)  (+ higher stored orders)
///   phi = t^{-alpha} (psi_0 + t^2 psi_2 + ...)
/// with xi = (x - x_free)/t, w = y - y_free.
struct Untransformed {
    double S = 0;
    double phi = 0;
    Vec xi, w;
};
Untransformed untransform(const PolySeries& sigma, const PolySeries& psi, const Rational& alpha,
                          const QuadTensor& tensor, double t, const Vec& x, const Vec& y,
                          const Vec& y0, const Vec& x_free, const Vec& y_free);

/// One abstract term of a published reference table: coeff * c_{ij}^{kl} *
/// product of variable factors, indices summed over the dimension.
struct ReferenceTerm {
    Rational coeff;
    std::array<int, 4> tensor_idx;  // abstract index slots 0..3 = i,j,k,l
    // factors: (kind, abstract index): kind 0 = xi, 1 = y, 2 = y0
    std::vector<std::pair<int, int>> factors;
};

/// Reference tables for the order-t phase term and the order-t^2 amplitude
/// term, used only for diff reports.
const std::vector<ReferenceTerm>& sigma1_reference();
const std::vector<ReferenceTerm>& psi2_reference();

/// Expands a reference table for dimension d with the tensor bound.
Poly expand_reference(const std::vector<ReferenceTerm>& terms, const VarTable& vt,
                      const QuadTensor& tensor);

}  // namespace sgf
