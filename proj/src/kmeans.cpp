#include "facesculpt/kmeans.hpp"

#include <cassert>
#include <cmath>
#include <filesystem>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "facesculpt/blobio.hpp"
#include "facesculpt/rng.hpp"

namespace facesculpt {

namespace {

constexpr int kMaxLloydIterations = 300;

double sqdist(const double* a, const double* b) {
    double s = 0.0;
    for (int j = 0; j < kPcaComponents; ++j) {
        const double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

// k-means++ seeding: first center uniform, then D^2-weighted draws.
std::vector<int> seed_centers(const std::vector<CoeffVector>& pts, int k, Rng& rng) {
    const int n = static_cast<int>(pts.size());
    std::vector<int> centers;
    centers.reserve(k);
    std::vector<char> taken(n, 0);
    centers.push_back(static_cast<int>(rng.below(n)));
    taken[centers.back()] = 1;

    std::vector<double> mind(n, std::numeric_limits<double>::infinity());
    while (static_cast<int>(centers.size()) < k) {
        const double* c = pts[centers.back()].c.data();
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            mind[i] = std::min(mind[i], sqdist(pts[i].c.data(), c));
            total += mind[i];
        }
        int pick = -1;
        if (total > 0.0) {
            const double target = rng.uniform01() * total;
            double cum = 0.0;
            for (int i = 0; i < n; ++i) {
                cum += mind[i];
                if (cum >= target && !taken[i] && mind[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        if (pick < 0) {
            // All remaining mass is on already-taken (duplicate) points; fall
            // back to the first untaken index.
            for (int i = 0; i < n; ++i)
                if (!taken[i]) {
                    pick = i;
                    break;
                }
        }
        if (pick < 0) throw std::runtime_error("fit_kmeans: fewer distinct points than clusters");
        taken[pick] = 1;
        centers.push_back(pick);
    }
    return centers;
}

}  // namespace

KMeansResult fit_kmeans(const std::vector<CoeffVector>& coeffs, int k, std::uint64_t seed) {
    const int n = static_cast<int>(coeffs.size());
    if (k <= 0) throw std::runtime_error("fit_kmeans: k must be positive");
    if (n < k)
        throw std::runtime_error("fit_kmeans: " + std::to_string(n) + " samples for k=" +
                                 std::to_string(k));

    Rng rng(seed);
    KMeansResult res;
    res.model.k = k;
    res.model.seed = seed;
    res.model.centroids.assign(static_cast<std::size_t>(k) * kPcaComponents, 0.0);
    for (int ci = 0; const int idx : seed_centers(coeffs, k, rng)) {
        for (int j = 0; j < kPcaComponents; ++j)
            res.model.centroids[ci * kPcaComponents + j] = coeffs[idx].c[j];
        ++ci;
    }

    res.labels.assign(n, -1);
    std::vector<int> counts(k, 0);
    std::vector<double> sums(static_cast<std::size_t>(k) * kPcaComponents, 0.0);
    double prev_inertia = std::numeric_limits<double>::infinity();

    for (int it = 0; it < kMaxLloydIterations; ++it) {
        bool changed = false;
        double inertia = 0.0;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double bestd = sqdist(coeffs[i].c.data(), res.model.centroid(0));
            for (int c = 1; c < k; ++c) {
                const double d = sqdist(coeffs[i].c.data(), res.model.centroid(c));
                if (d < bestd) {  // strict < keeps the lowest index on ties
                    bestd = d;
                    best = c;
                }
            }
            inertia += bestd;
            if (res.labels[i] != best) {
                res.labels[i] = best;
                changed = true;
            }
        }
        res.iterations = it + 1;
        res.inertia = inertia;
        res.inertia_trace.push_back(inertia);
        if (inertia > prev_inertia * (1.0 + 1e-12) + 1e-12)
            throw std::logic_error("kmeans: inertia increased across a Lloyd iteration");
        prev_inertia = inertia;
        if (!changed) break;

        std::fill(counts.begin(), counts.end(), 0);
        std::fill(sums.begin(), sums.end(), 0.0);
        for (int i = 0; i < n; ++i) {
            counts[res.labels[i]]++;
            for (int j = 0; j < kPcaComponents; ++j)
                sums[res.labels[i] * kPcaComponents + j] += coeffs[i].c[j];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;  // empty cluster keeps its centroid
            for (int j = 0; j < kPcaComponents; ++j)
                res.model.centroids[c * kPcaComponents + j] = sums[c * kPcaComponents + j] / counts[c];
        }
    }
    return res;
}

int assign_class(const ClusterModel& cm, const CoeffVector& c) {
    if (cm.k <= 0) throw std::runtime_error("assign_class: empty cluster model");
    int best = 0;
    double bestd = sqdist(c.c.data(), cm.centroid(0));
    for (int i = 1; i < cm.k; ++i) {
        const double d = sqdist(c.c.data(), cm.centroid(i));
        if (d < bestd) {
            bestd = d;
            best = i;
        }
    }
    return best;
}

std::vector<int> assign_all(const ClusterModel& cm, const std::vector<CoeffVector>& coeffs) {
    std::vector<int> out;
    out.reserve(coeffs.size());
    for (const auto& c : coeffs) out.push_back(assign_class(cm, c));
    return out;
}

void save_clusters(const ClusterModel& cm, const std::string& json_path) {
    BlobWriter w;
    w.add("centroids", {cm.k, kPcaComponents}, cm.centroids.data());
    nlohmann::json meta;
    meta["k"] = cm.k;
    meta["seed"] = cm.seed;
    w.set_meta(meta.dump());
    auto bin = std::filesystem::path(json_path).replace_extension(".bin");
    w.write(json_path, bin.string());
}

ClusterModel load_clusters(const std::string& json_path) {
    BlobReader r(json_path);
    const auto meta = nlohmann::json::parse(r.meta_text());
    ClusterModel cm;
    cm.k = meta.at("k").get<int>();
    cm.seed = meta.at("seed").get<std::uint64_t>();
    cm.centroids = r.array("centroids");
    if (cm.centroids.size() != static_cast<std::size_t>(cm.k) * kPcaComponents)
        throw std::runtime_error(json_path + ": centroid array size mismatch");
    return cm;
}

}  // namespace facesculpt
