#pragma once

#include <array>
#include <vector>

#include <Eigen/SparseCore>

#include "facesculpt/landmarks.hpp"
#include "facesculpt/mesh.hpp"

namespace facesculpt::deform {

struct DeformConfig {
    double alpha = 1e7;       // Laplacian preservation weight
    double lr = 0.01;         // Adam learning rate over vertex coordinates
    int iterations = 2000;
    double grad_tol = 1e-8;   // early stop on total gradient L2 norm
};

struct DeformResult {
    std::vector<std::array<double, 3>> vertices;  // lowest-energy iterate seen
    std::vector<double> energy_trace;  // raw energy before each step, plus final
    double final_energy = 0.0;         // energy of the returned vertices
    int iterations_run = 0;
    bool converged = false;            // stopped on the gradient-norm threshold
};

// Sum over the 68 landmark vertices of the Euclidean distance between each
// projected vertex and its target point.
double loss_landmark(const std::vector<std::array<double, 3>>& vertices,
                     const std::array<int, kNumLandmarks>& landmark_ids,
                     const mesh::Projection& proj, const std::array<double, 3>& pivot,
                     const LandmarkSet& targets);

// Frobenius norm (unsquared) of L*(v - v_orig) over the N x 3 coordinates.
double loss_laplacian(const std::vector<std::array<double, 3>>& vertices,
                      const std::vector<std::array<double, 3>>& v_orig,
                      const Eigen::SparseMatrix<double>& lap);

// Total energy sum_i ||project(v[id_i]) - target_i|| + alpha * ||L (v -
// v_orig)||_F^2 and its gradient with respect to every vertex coordinate; the
// analytic counterpart used inside deform() and exposed for gradient checks.
// The Laplacian regulariser is squared (matching the direct solver) while the
// landmark distances are not.
double energy_with_grad(const std::vector<std::array<double, 3>>& vertices,
                        const mesh::TriMesh& mesh, const Eigen::SparseMatrix<double>& lap,
                        const mesh::Projection& proj, const std::array<double, 3>& pivot,
                        const LandmarkSet& targets, double alpha,
                        std::vector<std::array<double, 3>>* grad);

// Adam minimization of the energy above starting from the mesh's vertices.
// The view-rotation pivot is the initial centroid, held fixed for the whole
// run. Returns the lowest-energy iterate encountered (so the result is never
// worse than the start) and throws when the raw energy rises for 100
// consecutive iterations.
DeformResult deform(const mesh::TriMesh& mesh, const LandmarkSet& targets,
                    const mesh::Projection& proj, const DeformConfig& cfg);

// Direct sparse least-squares solution of the squared-residual form of the
// same energy (affine projections only); serves as deform's oracle.
std::vector<std::array<double, 3>> solve_direct(const mesh::TriMesh& mesh,
                                                const LandmarkSet& targets,
                                                const mesh::Projection& proj, double alpha);

void write_energy_csv(const std::vector<double>& trace, const std::string& path);

}  // namespace facesculpt::deform
