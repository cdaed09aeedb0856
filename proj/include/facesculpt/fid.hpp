#pragma once

#include <vector>

#include "facesculpt/pca.hpp"

namespace facesculpt {

// Frechet distance between Gaussians fitted to two vector sets:
//   ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}).
// Covariances use 1/(n-1) normalization. The matrix square root comes from a
// symmetric eigendecomposition of Sa^{1/2} Sb Sa^{1/2} with eigenvalues
// clamped at zero. Requires n >= d+1 samples per set.
double frechet_distance(const std::vector<std::vector<double>>& a,
                        const std::vector<std::vector<double>>& b);

// FID over 32-dim PCA coefficients, the geometry-realism metric.
// Requires at least 33 samples per side.
double compute_fid(const std::vector<CoeffVector>& a, const std::vector<CoeffVector>& b);

}  // namespace facesculpt
