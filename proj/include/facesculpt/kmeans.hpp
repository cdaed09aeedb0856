#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "facesculpt/pca.hpp"

namespace facesculpt {

inline constexpr int kDefaultStyleClasses = 25;

// K-means centroids over PCA coefficient vectors; cluster ids are the
// geometry-style class labels.
struct ClusterModel {
    int k = 0;
    // Row-major k x 32.
    std::vector<double> centroids;
    std::uint64_t seed = 0;

    const double* centroid(int i) const { return centroids.data() + i * kPcaComponents; }
};

struct KMeansResult {
    ClusterModel model;
    std::vector<int> labels;
    double inertia = 0.0;
    // Inertia after each Lloyd iteration; non-increasing by construction.
    std::vector<double> inertia_trace;
    int iterations = 0;
};

// Lloyd iterations from a k-means++ seeding, run to assignment fixpoint or
// 300 iterations. Ties in assignment go to the lowest centroid index; a
// cluster that loses all points keeps its previous centroid.
KMeansResult fit_kmeans(const std::vector<CoeffVector>& coeffs, int k, std::uint64_t seed);

inline KMeansResult fit_kmeans(const std::vector<CoeffVector>& coeffs, std::uint64_t seed) {
    return fit_kmeans(coeffs, kDefaultStyleClasses, seed);
}

// Index of the nearest centroid (Euclidean), ties to the lowest index.
int assign_class(const ClusterModel& cm, const CoeffVector& c);

std::vector<int> assign_all(const ClusterModel& cm, const std::vector<CoeffVector>& coeffs);

void save_clusters(const ClusterModel& cm, const std::string& json_path);
ClusterModel load_clusters(const std::string& json_path);

}  // namespace facesculpt
