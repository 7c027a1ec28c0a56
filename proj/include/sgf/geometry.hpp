#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "sgf/common.hpp"
#include "sgf/errors.hpp"

namespace sgf {

/// Rank-4 coefficient tensor c_{ij}^{kl} of a metric in unimodular normal
/// coordinates, g_ij(x) = delta_ij + 1/2 c_{ij}^{kl} x_k x_l.  Lower pair
/// (i,j) are matrix indices, upper pair (k,l) are derivative directions;
/// storage is dense and symmetrized on write.
class QuadTensor {
public:
    QuadTensor() = default;
    explicit QuadTensor(int dim) : d_(dim), a_(size_t(dim) * dim * dim * dim, 0.0) {}

    int dim() const { return d_; }
    double operator()(int i, int j, int k, int l) const { return a_[idx(i, j, k, l)]; }

    /// Sets the entry and its (i<->j), (k<->l) symmetric images.
    void set(int i, int j, int k, int l, double v) {
        a_[idx(i, j, k, l)] = v;
        a_[idx(j, i, k, l)] = v;
        a_[idx(i, j, l, k)] = v;
        a_[idx(j, i, l, k)] = v;
    }

    void add(int i, int j, int k, int l, double v) {
        set(i, j, k, l, operator()(i, j, k, l) + v);
    }

    QuadTensor scaled(double s) const {
        QuadTensor out = *this;
        for (auto& v : out.a_) v *= s;
        return out;
    }

    double frobenius_norm() const {
        double s = 0;
        for (double v : a_) s += v * v;
        return std::sqrt(s);
    }

    bool is_zero() const {
        for (double v : a_)
            if (v != 0.0) return false;
        return true;
    }

private:
    size_t idx(int i, int j, int k, int l) const {
        return ((size_t(i) * d_ + j) * d_ + k) * d_ + l;
    }
    int d_ = 0;
    std::vector<double> a_;
};

/// The standard two-dimensional test metric: curvature parameter kappa with
/// c_11^{11} = -2k, c_22^{11} = 2k, c_11^{22} = 2k, c_22^{22} = -2k.
/// Trace-free in (i,i) and scalar curvature R = -4 kappa.
QuadTensor kappa_tensor(double kappa);

/// Metric data at a point: g, its inverse G, and derivatives.
/// dg[k](i,j)  = d g_ij / dx^k          (gamma_{ij,k})
/// dG[k](i,j)  = d G^ij / dx^k          (Gamma^{ij}_k)
/// d2g[k][l], d2G[k][l] are the corresponding second derivatives;
/// d3G[k][l][m] the third derivative of G (needed by the variational flow).
struct MetricJet {
    Mat g, G;
    std::vector<Mat> dg, dG;
    std::vector<std::vector<Mat>> d2g, d2G;
    std::vector<std::vector<std::vector<Mat>>> d3G;
    bool has_third = false;
};

/// Callback contract for the Extension variant: fill a MetricJet (at least
/// through second derivatives) at x. d3G may be left empty.
using JetSupplier = std::function<MetricJet(const Vec& x)>;

/// A Riemannian metric in a single normal-coordinate chart.  Immutable after
/// construction; safe for concurrent reads.
class MetricModel {
public:
    enum class Kind { Flat, QuadraticNormal, Extension };

    static MetricModel flat(int dim);
    static MetricModel quadratic(int dim, QuadTensor tensor);
    static MetricModel extension(int dim, JetSupplier jets, double validity_radius);

    int dim() const { return dim_; }
    Kind kind() const { return kind_; }
    const QuadTensor& tensor() const { return tensor_; }

    /// Largest radius on which g stays positive definite (eigenvalue bound on
    /// the quadratic correction for QuadraticNormal; infinite for Flat).
    double validity_radius() const { return radius_; }

    /// Metric matrix at x. Throws OutOfChart / NonPositiveDefinite.
    Mat metric_at(const Vec& x) const;

    /// Full analytic jet at x (exact for Flat and QuadraticNormal).
    MetricJet jet(const Vec& x) const;

private:
    MetricModel() = default;
    void check_chart(const Vec& x) const;

    int dim_ = 0;
    Kind kind_ = Kind::Flat;
    QuadTensor tensor_;
    JetSupplier supplier_;
    double radius_ = std::numeric_limits<double>::infinity();
};

struct ValidationReport {
    double sym_lower_residual = 0;   // max |c_ijkl - c_jikl|
    double sym_upper_residual = 0;   // max |c_ijkl - c_ijlk|
    double trace_free_residual = 0;  // max_kl |sum_i c_iikl|
    double det_fit_exponent = 0;     // log-log slope of max|det g - 1| vs radius
    std::vector<double> radii;
    std::vector<double> det_deviation;
};

/// Reports the normal-coordinate gauge residuals of a QuadraticNormal model
/// and the decay order of det g(x) - 1 on sampled radii.
ValidationReport validate_normal_coords(const MetricModel& m);

/// Scalar curvature R = sum_{i,k} c_{ik}^{ik}; 0 for Flat,
/// UnsupportedVariant for Extension.
double scalar_curvature(const MetricModel& m);

}  // namespace sgf
