#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "facesculpt/landmarks.hpp"

namespace facesculpt::mesh {

// Triangle mesh with per-vertex UVs and the 68 landmark vertex indices.
// Vertices are in model units; UVs in [0,1]^2.
struct TriMesh {
    std::vector<std::array<double, 3>> vertices;
    std::vector<std::array<int, 3>> faces;
    std::vector<std::array<double, 2>> uvs;
    std::array<int, kNumLandmarks> landmark_ids{};

    int num_vertices() const { return static_cast<int>(vertices.size()); }
    int num_faces() const { return static_cast<int>(faces.size()); }

    // Throws std::runtime_error on out-of-range indices, degenerate faces,
    // duplicate landmark ids, or a UV array of the wrong length.
    void validate() const;
};

// Camera: a fixed 3x4 base matrix P preceded by a view rotation about a pivot
// (normally the mesh centroid). Affine P has last row (0,0,0,1) and skips the
// perspective divide.
struct Projection {
    std::array<double, 12> p{1, 0, 0, 0,
                             0, 1, 0, 0,
                             0, 0, 0, 1};  // row-major 3x4, default drops z
    double azimuth_deg = 0.0;
    double elevation_deg = 0.0;

    bool is_affine() const {
        return p[8] == 0.0 && p[9] == 0.0 && p[10] == 0.0 && p[11] == 1.0;
    }
};

// OBJ with v/vt/f records plus a sidecar text file of 68 landmark vertex
// indices (one per line, zero-based). Quads are fan-triangulated. Each vertex
// must be paired with a single consistent vt index across all faces.
TriMesh load_obj(const std::string& obj_path, const std::string& landmark_path);
void save_obj(const TriMesh& mesh, const std::string& obj_path,
              const std::string& landmark_path);

Projection load_projection(const std::string& path);
void save_projection(const Projection& proj, const std::string& path);

// Uniform combinatorial Laplacian L = D - A over the edge graph of the faces.
Eigen::SparseMatrix<double> graph_laplacian(const TriMesh& mesh);

std::array<double, 3> centroid(const TriMesh& mesh);
std::array<double, 3> centroid(const std::vector<std::array<double, 3>>& vertices);

// Rx(elevation) * Ry(azimuth), angles in degrees.
Eigen::Matrix3d view_rotation(double azimuth_deg, double elevation_deg);

// Rotates v about the pivot by the view angles, applies P, divides by the
// homogeneous coordinate. Throws on |w| < 1e-12 (behind/at camera plane).
std::array<double, 2> project(const std::array<double, 3>& v, const Projection& proj,
                              const std::array<double, 3>& pivot);

// Depth key used by the rasterizer's z-test: the homogeneous w for
// perspective P, or -z after view rotation for affine P (camera on +z).
double projected_depth(const std::array<double, 3>& v, const Projection& proj,
                       const std::array<double, 3>& pivot);

// Projects the mesh's landmark vertices (pivot = mesh centroid).
LandmarkSet project_landmarks(const TriMesh& mesh, const Projection& proj);

}  // namespace facesculpt::mesh
