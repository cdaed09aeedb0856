#pragma once

#include <array>
#include <string>
#include <vector>

#include "facesculpt/landmarks.hpp"

namespace facesculpt {

inline constexpr int kPcaComponents = 32;

struct CoeffVector {
    std::array<double, kPcaComponents> c{};

    double& operator[](int i) { return c[i]; }
    double operator[](int i) const { return c[i]; }
};

// Orthonormal 32-component basis over flattened 136-d landmark vectors.
// Rows of `basis` are principal directions in descending eigenvalue order;
// the largest-magnitude entry of each row is made positive so that a fit is
// reproducible bit-for-bit after serialization.
struct PcaModel {
    std::array<double, kLandmarkDim> mean{};
    // Row-major 32 x 136.
    std::vector<double> basis;
    std::array<double, kPcaComponents> explained_variance{};

    double basis_at(int row, int col) const { return basis[row * kLandmarkDim + col]; }

    // Max |B B^T - I| entry; the fit keeps this below 1e-8.
    double orthonormality_error() const;

    LandmarkSet mean_landmarks() const { return LandmarkSet::unflatten(mean.data()); }
};

// Fits mean and top-32 directions of the sample covariance (1/(n-1)
// normalization) of flattened, aligned landmark sets. Requires >= 33 samples.
PcaModel fit_pca(const std::vector<LandmarkSet>& samples);

CoeffVector project(const PcaModel& pca, const LandmarkSet& ls);
LandmarkSet reconstruct(const PcaModel& pca, const CoeffVector& c);

std::vector<CoeffVector> project_all(const PcaModel& pca, const std::vector<LandmarkSet>& sets);

void save_pca(const PcaModel& pca, const std::string& json_path);
PcaModel load_pca(const std::string& json_path);

}  // namespace facesculpt
