#include "facesculpt/pca.hpp"

#include <cmath>
#include <filesystem>
#include <stdexcept>

#include <Eigen/Dense>

#include "facesculpt/blobio.hpp"

namespace facesculpt {

double PcaModel::orthonormality_error() const {
    using Eigen::MatrixXd;
    Eigen::Map<const MatrixXd> B(basis.data(), kLandmarkDim, kPcaComponents);  // column view
    const MatrixXd G = B.transpose() * B;  // 32 x 32, rows are stored row-major
    double err = 0.0;
    for (int i = 0; i < kPcaComponents; ++i)
        for (int j = 0; j < kPcaComponents; ++j)
            err = std::max(err, std::abs(G(i, j) - (i == j ? 1.0 : 0.0)));
    return err;
}

PcaModel fit_pca(const std::vector<LandmarkSet>& samples) {
    const int n = static_cast<int>(samples.size());
    if (n < kPcaComponents + 1)
        throw std::runtime_error("fit_pca: need at least 33 samples, got " + std::to_string(n));

    Eigen::MatrixXd X(n, kLandmarkDim);
    for (int i = 0; i < n; ++i) {
        const auto flat = samples[i].flatten();
        for (int j = 0; j < kLandmarkDim; ++j) X(i, j) = flat[j];
    }

    const Eigen::RowVectorXd mu = X.colwise().mean();
    X.rowwise() -= mu;
    const Eigen::MatrixXd cov = (X.transpose() * X) / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw std::runtime_error("fit_pca: eigensolver failed");

    PcaModel pca;
    for (int j = 0; j < kLandmarkDim; ++j) pca.mean[j] = mu[j];
    pca.basis.assign(static_cast<std::size_t>(kPcaComponents) * kLandmarkDim, 0.0);

    // Eigenvalues come back ascending; take the top 32 in descending order.
    for (int k = 0; k < kPcaComponents; ++k) {
        const int src = kLandmarkDim - 1 - k;
        pca.explained_variance[k] = std::max(0.0, es.eigenvalues()[src]);
        Eigen::VectorXd v = es.eigenvectors().col(src);
        // Sign convention: largest-magnitude entry positive (first such on ties).
        int arg = 0;
        for (int j = 1; j < kLandmarkDim; ++j)
            if (std::abs(v[j]) > std::abs(v[arg])) arg = j;
        if (v[arg] < 0) v = -v;
        for (int j = 0; j < kLandmarkDim; ++j) pca.basis[k * kLandmarkDim + j] = v[j];
    }
    return pca;
}

CoeffVector project(const PcaModel& pca, const LandmarkSet& ls) {
    const auto flat = ls.flatten();
    CoeffVector out;
    for (int k = 0; k < kPcaComponents; ++k) {
        double s = 0.0;
        for (int j = 0; j < kLandmarkDim; ++j)
            s += pca.basis[k * kLandmarkDim + j] * (flat[j] - pca.mean[j]);
        out.c[k] = s;
    }
    return out;
}

LandmarkSet reconstruct(const PcaModel& pca, const CoeffVector& c) {
    std::array<double, kLandmarkDim> flat = pca.mean;
    for (int k = 0; k < kPcaComponents; ++k)
        for (int j = 0; j < kLandmarkDim; ++j) flat[j] += pca.basis[k * kLandmarkDim + j] * c.c[k];
    return LandmarkSet::unflatten(flat.data());
}

std::vector<CoeffVector> project_all(const PcaModel& pca, const std::vector<LandmarkSet>& sets) {
    std::vector<CoeffVector> out;
    out.reserve(sets.size());
    for (const auto& s : sets) out.push_back(project(pca, s));
    return out;
}

void save_pca(const PcaModel& pca, const std::string& json_path) {
    BlobWriter w;
    w.add("mean", {kLandmarkDim}, pca.mean.data());
    w.add("basis", {kPcaComponents, kLandmarkDim}, pca.basis.data());
    w.add("explained_variance", {kPcaComponents}, pca.explained_variance.data());
    auto bin = std::filesystem::path(json_path).replace_extension(".bin");
    w.write(json_path, bin.string());
}

PcaModel load_pca(const std::string& json_path) {
    BlobReader r(json_path);
    PcaModel pca;
    const auto mean = r.array("mean");
    const auto basis = r.array("basis");
    const auto ev = r.array("explained_variance");
    if (mean.size() != kLandmarkDim || basis.size() != std::size_t(kPcaComponents) * kLandmarkDim ||
        ev.size() != kPcaComponents)
        throw std::runtime_error(json_path + ": unexpected PCA array sizes");
    std::copy(mean.begin(), mean.end(), pca.mean.begin());
    pca.basis = basis;
    std::copy(ev.begin(), ev.end(), pca.explained_variance.begin());
    return pca;
}

}  // namespace facesculpt
