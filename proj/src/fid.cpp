#include "facesculpt/fid.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace facesculpt {

namespace {

void fit_gaussian(const std::vector<std::vector<double>>& xs, Eigen::VectorXd& mu,
                  Eigen::MatrixXd& cov) {
    const int n = static_cast<int>(xs.size());
    const int d = static_cast<int>(xs[0].size());
    Eigen::MatrixXd X(n, d);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(xs[i].size()) != d)
            throw std::runtime_error("frechet_distance: ragged sample dimensions");
        for (int j = 0; j < d; ++j) X(i, j) = xs[i][j];
    }
    mu = X.colwise().mean();
    X.rowwise() -= mu.transpose();
    cov = (X.transpose() * X) / static_cast<double>(n - 1);
}

// Symmetric PSD square root with eigenvalues clamped at zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw std::runtime_error("frechet_distance: eigensolver failed");
    Eigen::VectorXd lam = es.eigenvalues();
    for (int i = 0; i < lam.size(); ++i) lam[i] = std::sqrt(std::max(0.0, lam[i]));
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const std::vector<std::vector<double>>& a,
                        const std::vector<std::vector<double>>& b) {
    if (a.empty() || b.empty()) throw std::runtime_error("frechet_distance: empty sample set");
    const int d = static_cast<int>(a[0].size());
    if (static_cast<int>(b[0].size()) != d)
        throw std::runtime_error("frechet_distance: dimension mismatch between sets");
    if (static_cast<int>(a.size()) < d + 1 || static_cast<int>(b.size()) < d + 1)
        throw std::runtime_error("frechet_distance: need at least d+1 samples per set");

    Eigen::VectorXd mu_a, mu_b;
    Eigen::MatrixXd cov_a, cov_b;
    fit_gaussian(a, mu_a, cov_a);
    fit_gaussian(b, mu_b, cov_b);

    const Eigen::MatrixXd root_a = psd_sqrt(cov_a);
    // Tr((Sa Sb)^{1/2}) = Tr(M^{1/2}) with M = Sa^{1/2} Sb Sa^{1/2} symmetric PSD.
    Eigen::MatrixXd m = root_a * cov_b * root_a;
    m = 0.5 * (m + m.transpose().eval());  // kill roundoff asymmetry
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw std::runtime_error("frechet_distance: eigensolver failed");
    double tr_sqrt = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i)
        tr_sqrt += std::sqrt(std::max(0.0, es.eigenvalues()[i]));

    return (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
}

double compute_fid(const std::vector<CoeffVector>& a, const std::vector<CoeffVector>& b) {
    if (static_cast<int>(a.size()) < kPcaComponents + 1 ||
        static_cast<int>(b.size()) < kPcaComponents + 1)
        throw std::runtime_error("compute_fid: need at least 33 samples per set");
    auto widen = [](const std::vector<CoeffVector>& v) {
        std::vector<std::vector<double>> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i)
            out[i].assign(v[i].c.begin(), v[i].c.end());
        return out;
    };
    return frechet_distance(widen(a), widen(b));
}

}  // namespace facesculpt
