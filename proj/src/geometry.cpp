#include "sgf/geometry.hpp"

#include <Eigen/Cholesky>

namespace sgf {

QuadTensor kappa_tensor(double kappa) {
    QuadTensor c(2);
    c.set(0, 0, 0, 0, -2 * kappa);
    c.set(1, 1, 0, 0, 2 * kappa);
    c.set(0, 0, 1, 1, 2 * kappa);
    c.set(1, 1, 1, 1, -2 * kappa);
    return c;
}

MetricModel MetricModel::flat(int dim) {
    MetricModel m;
    m.dim_ = dim;
    m.kind_ = Kind::Flat;
    return m;
}

MetricModel MetricModel::quadratic(int dim, QuadTensor tensor) {
    MetricModel m;
    m.dim_ = dim;
    m.kind_ = Kind::QuadraticNormal;
    m.tensor_ = std::move(tensor);
    // |A(x)|_2 <= 1/2 |x|^2 ||c||_F, so g = I + A stays positive definite
    // while |x|^2 < 2 / ||c||_F.
    double nf = m.tensor_.frobenius_norm();
    m.radius_ = nf > 0 ? std::sqrt(2.0 / nf) : std::numeric_limits<double>::infinity();
    return m;
}

MetricModel MetricModel::extension(int dim, JetSupplier jets, double validity_radius) {
    MetricModel m;
    m.dim_ = dim;
    m.kind_ = Kind::Extension;
    m.supplier_ = std::move(jets);
    m.radius_ = validity_radius;
    return m;
}

void MetricModel::check_chart(const Vec& x) const {
    if (x.size() != dim_) throw OutOfChart("point dimension mismatch");
    if (x.norm() > radius_)
        throw OutOfChart("|x| exceeds validity radius " + std::to_string(radius_));
}

Mat MetricModel::metric_at(const Vec& x) const {
    check_chart(x);
    Mat g = Mat::Identity(dim_, dim_);
    if (kind_ == Kind::QuadraticNormal) {
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j) {
                double s = 0;
                for (int k = 0; k < dim_; ++k)
                    for (int l = 0; l < dim_; ++l) s += tensor_(i, j, k, l) * x[k] * x[l];
                g(i, j) += 0.5 * s;
            }
    } else if (kind_ == Kind::Extension) {
        return supplier_(x).g;
    }
    Eigen::LLT<Mat> llt(g);
    if (llt.info() != Eigen::Success)
        throw NonPositiveDefinite("metric not positive definite at probed point");
    return g;
}

MetricJet MetricModel::jet(const Vec& x) const {
    check_chart(x);
    const int d = dim_;
    if (kind_ == Kind::Extension) return supplier_(x);

    MetricJet jet;
    jet.g = metric_at(x);
    jet.dg.assign(d, Mat::Zero(d, d));
    jet.dG.assign(d, Mat::Zero(d, d));
    jet.d2g.assign(d, std::vector<Mat>(d, Mat::Zero(d, d)));
    jet.d2G.assign(d, std::vector<Mat>(d, Mat::Zero(d, d)));
    jet.d3G.assign(d, std::vector<std::vector<Mat>>(d, std::vector<Mat>(d, Mat::Zero(d, d))));
    jet.has_third = true;

    if (kind_ == Kind::Flat) {
        jet.G = Mat::Identity(d, d);
        return jet;
    }

    jet.G = jet.g.inverse();

    // dg[k]_ij = c_ij^{kl} x_l,  d2g[k][l]_ij = c_ij^{kl}; higher g-jets vanish.
    for (int k = 0; k < d; ++k)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double s = 0;
                for (int l = 0; l < d; ++l) s += tensor_(i, j, k, l) * x[l];
                jet.dg[k](i, j) = s;
            }
    for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l)
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) jet.d2g[k][l](i, j) = tensor_(i, j, k, l);

    // Derivatives of the inverse: dG = -G dg G and its further derivatives.
    const Mat& G = jet.G;
    for (int k = 0; k < d; ++k) jet.dG[k] = -G * jet.dg[k] * G;
    for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l)
            jet.d2G[k][l] = -jet.dG[l] * jet.dg[k] * G - G * jet.d2g[k][l] * G -
                            G * jet.dg[k] * jet.dG[l];
    for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l)
            for (int m = 0; m < d; ++m)
                jet.d3G[k][l][m] = -jet.d2G[l][m] * jet.dg[k] * G
                                   - jet.dG[l] * jet.d2g[k][m] * G
                                   - jet.dG[l] * jet.dg[k] * jet.dG[m]
                                   - jet.dG[m] * jet.d2g[k][l] * G
                                   - G * jet.d2g[k][l] * jet.dG[m]
                                   - jet.dG[m] * jet.dg[k] * jet.dG[l]
                                   - G * jet.d2g[k][m] * jet.dG[l]
                                   - G * jet.dg[k] * jet.d2G[l][m];
    return jet;
}

ValidationReport validate_normal_coords(const MetricModel& m) {
    if (m.kind() != MetricModel::Kind::QuadraticNormal)
        throw UnsupportedVariant("validate_normal_coords requires QuadraticNormal");
    const int d = m.dim();
    const QuadTensor& c = m.tensor();
    ValidationReport rep;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l) {
                    rep.sym_lower_residual = std::max(rep.sym_lower_residual,
                                                      std::abs(c(i, j, k, l) - c(j, i, k, l)));
                    rep.sym_upper_residual = std::max(rep.sym_upper_residual,
                                                      std::abs(c(i, j, k, l) - c(i, j, l, k)));
                }
    for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
            double tr = 0;
            for (int i = 0; i < d; ++i) tr += c(i, i, k, l);
            rep.trace_free_residual = std::max(rep.trace_free_residual, std::abs(tr));
        }

    // det g - 1 should decay at least like r^4 in the unimodular gauge.
    double r0 = 0.4 * std::min(m.validity_radius(), 1.0);
    for (int s = 0; s < 5; ++s) {
        double r = r0 / std::pow(2.0, s);
        double dev = 0;
        const int ndir = 16;
        for (int a = 0; a < ndir; ++a) {
            Vec x = Vec::Zero(d);
            if (d == 1) {
                x[0] = r * (a % 2 ? 1 : -1);
            } else {
                double th = 2 * kPi * a / ndir;
                x[0] = r * std::cos(th);
                x[1] = r * std::sin(th);
                for (int j = 2; j < d; ++j) x[j] = 0.3 * r * std::sin(th * (j + 1));
                x *= r / x.norm();
            }
            dev = std::max(dev, std::abs(m.metric_at(x).determinant() - 1.0));
        }
        rep.radii.push_back(r);
        rep.det_deviation.push_back(dev);
    }
    rep.det_fit_exponent = loglog_fit(rep.radii, rep.det_deviation).second;
    return rep;
}

double scalar_curvature(const MetricModel& m) {
    switch (m.kind()) {
        case MetricModel::Kind::Flat:
            return 0.0;
        case MetricModel::Kind::QuadraticNormal: {
            double r = 0;
            for (int i = 0; i < m.dim(); ++i)
                for (int k = 0; k < m.dim(); ++k) r += m.tensor()(i, k, i, k);
            return r;
        }
        default:
            throw UnsupportedVariant("scalar_curvature: Extension models carry no tensor");
    }
}

}  // namespace sgf
