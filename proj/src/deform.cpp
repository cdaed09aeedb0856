#include "facesculpt/deform.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "facesculpt/optim.hpp"

namespace facesculpt::deform {

namespace {

// Floors norm denominators so the unsquared norms stay differentiable at
// coincidence (the subgradient 0 is taken there).
constexpr double kNormFloor = 1e-12;

Eigen::MatrixXd to_matrix(const std::vector<std::array<double, 3>>& v) {
    Eigen::MatrixXd m(static_cast<int>(v.size()), 3);
    for (int i = 0; i < m.rows(); ++i)
        for (int k = 0; k < 3; ++k) m(i, k) = v[i][k];
    return m;
}

// p(v) = P_lin * (pivot + R (v - pivot)) + t for the image rows; Jacobian of
// the image point with respect to the vertex is rows * R (perspective adds
// the quotient-rule correction).
struct ProjectionRows {
    Eigen::Matrix<double, 2, 3> lin;   // d(image point)/d(vertex)
};

ProjectionRows projection_jacobian(const std::array<double, 3>& v, const mesh::Projection& proj,
                                   const std::array<double, 3>& pivot,
                                   const Eigen::Matrix3d& rot) {
    const double* p = proj.p.data();
    Eigen::Matrix<double, 2, 3> top;
    top << p[0], p[1], p[2], p[4], p[5], p[6];
    ProjectionRows out;
    if (proj.is_affine()) {
        out.lin = top * rot;
        return out;
    }
    const Eigen::Vector3d piv(pivot[0], pivot[1], pivot[2]);
    const Eigen::Vector3d r = piv + rot * (Eigen::Vector3d(v[0], v[1], v[2]) - piv);
    const Eigen::RowVector3d bottom(p[8], p[9], p[10]);
    const double w = bottom.dot(r) + p[11];
    if (std::abs(w) < 1e-12)
        throw std::runtime_error("facesculpt: vertex projects behind the camera (w ~ 0)");
    const double hx = top.row(0).dot(r) + p[3];
    const double hy = top.row(1).dot(r) + p[7];
    Eigen::Matrix<double, 2, 3> dimg;
    dimg.row(0) = (top.row(0) - (hx / w) * bottom) / w;
    dimg.row(1) = (top.row(1) - (hy / w) * bottom) / w;
    out.lin = dimg * rot;
    return out;
}

}  // namespace

double loss_landmark(const std::vector<std::array<double, 3>>& vertices,
                     const std::array<int, kNumLandmarks>& landmark_ids,
                     const mesh::Projection& proj, const std::array<double, 3>& pivot,
                     const LandmarkSet& targets) {
    double total = 0.0;
    for (int i = 0; i < kNumLandmarks; ++i) {
        const auto q = mesh::project(vertices[landmark_ids[i]], proj, pivot);
        const double dx = q[0] - targets.x(i);
        const double dy = q[1] - targets.y(i);
        total += std::sqrt(dx * dx + dy * dy);
    }
    return total;
}

double loss_laplacian(const std::vector<std::array<double, 3>>& vertices,
                      const std::vector<std::array<double, 3>>& v_orig,
                      const Eigen::SparseMatrix<double>& lap) {
    if (vertices.size() != v_orig.size())
        throw std::invalid_argument("facesculpt: vertex arrays differ in length");
    const Eigen::MatrixXd delta = lap * (to_matrix(vertices) - to_matrix(v_orig));
    return delta.norm();
}

double energy_with_grad(const std::vector<std::array<double, 3>>& vertices,
                        const mesh::TriMesh& mesh, const Eigen::SparseMatrix<double>& lap,
                        const mesh::Projection& proj, const std::array<double, 3>& pivot,
                        const LandmarkSet& targets, double alpha,
                        std::vector<std::array<double, 3>>* grad) {
    const int n = static_cast<int>(vertices.size());
    if (grad) grad->assign(n, {0.0, 0.0, 0.0});
    const Eigen::Matrix3d rot = mesh::view_rotation(proj.azimuth_deg, proj.elevation_deg);

    double energy = 0.0;
    for (int i = 0; i < kNumLandmarks; ++i) {
        const int id = mesh.landmark_ids[i];
        const auto q = mesh::project(vertices[id], proj, pivot);
        const Eigen::Vector2d r(q[0] - targets.x(i), q[1] - targets.y(i));
        const double len = r.norm();
        energy += len;
        if (grad) {
            const Eigen::Vector2d unit = r / std::max(len, kNormFloor);
            const Eigen::Vector3d g =
                projection_jacobian(vertices[id], proj, pivot, rot).lin.transpose() * unit;
            for (int k = 0; k < 3; ++k) (*grad)[id][k] += g[k];
        }
    }

    if (alpha != 0.0) {
        // The regulariser enters the energy as alpha * ||L u||_F^2 (the
        // squared form the direct solver minimises); the landmark term stays
        // a sum of unsquared distances.
        const Eigen::MatrixXd residual = lap * (to_matrix(vertices) - to_matrix(mesh.vertices));
        energy += alpha * residual.squaredNorm();
        if (grad) {
            const Eigen::MatrixXd g = (lap * residual) * (2.0 * alpha);
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < 3; ++k) (*grad)[i][k] += g(i, k);
        }
    }
    return energy;
}

DeformResult deform(const mesh::TriMesh& mesh, const LandmarkSet& targets,
                    const mesh::Projection& proj, const DeformConfig& cfg) {
    mesh.validate();
    if (cfg.alpha < 0.0 || cfg.lr <= 0.0 || cfg.iterations < 0)
        throw std::invalid_argument("facesculpt: invalid deformation config");
    const std::array<double, 3> pivot = mesh::centroid(mesh);
    const Eigen::SparseMatrix<double> lap = mesh::graph_laplacian(mesh);
    const int n = mesh.num_vertices();

    ParamStore store;
    {
        ad::Tensor init({n, 3});
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < 3; ++k) init.v[static_cast<std::size_t>(i) * 3 + k] = mesh.vertices[i][k];
        store.add("v", std::move(init));
    }
    const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};

    std::vector<std::array<double, 3>> current = mesh.vertices;
    std::vector<std::array<double, 3>> grad;
    DeformResult result;
    // Adam on the mixed smooth/non-smooth energy oscillates near optima, so
    // the best iterate seen (which includes the starting point) is returned
    // instead of the last one; the returned energy therefore never exceeds
    // the starting energy.
    std::vector<std::array<double, 3>> best = current;
    double best_energy = std::numeric_limits<double>::infinity();
    int rising = 0;
    for (int iter = 0; iter <= cfg.iterations; ++iter) {
        const double energy = energy_with_grad(current, mesh, lap, proj, pivot, targets, cfg.alpha, &grad);
        if (!std::isfinite(energy))
            throw std::runtime_error("facesculpt: non-finite deformation energy at iteration " +
                                     std::to_string(iter));
        if (!result.energy_trace.empty() && energy > result.energy_trace.back()) {
            if (++rising >= 100)
                throw std::runtime_error(
                    "facesculpt: deformation diverging (energy rose for 100 consecutive "
                    "iterations, e=" + std::to_string(energy) + " at iteration " + std::to_string(iter) + ")");
        } else {
            rising = 0;
        }
        result.energy_trace.push_back(energy);
        if (energy < best_energy) {
            best_energy = energy;
            best = current;
        }
        if (iter == cfg.iterations) break;

        double gnorm2 = 0.0;
        for (const auto& g : grad)
            for (double c : g) gnorm2 += c * c;
        if (std::sqrt(gnorm2) < cfg.grad_tol) {
            result.converged = true;
            break;
        }

        store.zero_grads();
        {
            ad::Tensor gt({n, 3});
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < 3; ++k) gt.v[static_cast<std::size_t>(i) * 3 + k] = grad[i][k];
            store.accumulate_grad("v", gt);
        }
        adam_step(store, adam, {"v"});
        const ad::Tensor& value = store.value("v");
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < 3; ++k) current[i][k] = value.v[static_cast<std::size_t>(i) * 3 + k];
        result.iterations_run = iter + 1;
    }

    if (best_energy > result.energy_trace.front())
        throw std::logic_error("facesculpt: deformation best energy exceeds starting energy");
    result.final_energy = best_energy;
    result.vertices = std::move(best);
    return result;
}

std::vector<std::array<double, 3>> solve_direct(const mesh::TriMesh& mesh,
                                                const LandmarkSet& targets,
                                                const mesh::Projection& proj, double alpha) {
    mesh.validate();
    if (!proj.is_affine())
        throw std::invalid_argument("facesculpt: solve_direct requires an affine projection");
    if (alpha < 0.0) throw std::invalid_argument("facesculpt: alpha must be non-negative");
    const int n = mesh.num_vertices();
    const std::array<double, 3> pivot = mesh::centroid(mesh);
    const Eigen::Matrix3d rot = mesh::view_rotation(proj.azimuth_deg, proj.elevation_deg);
    const double* p = proj.p.data();
    Eigen::Matrix<double, 2, 3> top;
    top << p[0], p[1], p[2], p[4], p[5], p[6];
    const Eigen::Matrix<double, 2, 3> m = top * rot;

    // Normal equations over u = v - v_x, flattened coordinate-major
    // ([all x, all y, all z]): alpha * L^T L per coordinate block plus, for
    // each landmark vertex, the 3x3 block M^T M and rhs M^T r0.
    const Eigen::SparseMatrix<double> lap = mesh::graph_laplacian(mesh);
    const Eigen::SparseMatrix<double> ltl = (lap.transpose() * lap).pruned();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(3 * ltl.nonZeros() + 9 * kNumLandmarks);
    for (int outer = 0; outer < ltl.outerSize(); ++outer)
        for (Eigen::SparseMatrix<double>::InnerIterator it(ltl, outer); it; ++it)
            for (int c = 0; c < 3; ++c)
                trips.emplace_back(c * n + static_cast<int>(it.row()), c * n + static_cast<int>(it.col()),
                                   alpha * it.value());

    const Eigen::Matrix3d mtm = m.transpose() * m;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(3 * n);
    for (int i = 0; i < kNumLandmarks; ++i) {
        const int id = mesh.landmark_ids[i];
        const auto q = mesh::project(mesh.vertices[id], proj, pivot);
        const Eigen::Vector2d r0(targets.x(i) - q[0], targets.y(i) - q[1]);
        const Eigen::Vector3d mtr = m.transpose() * r0;
        for (int c1 = 0; c1 < 3; ++c1) {
            rhs[c1 * n + id] += mtr[c1];
            for (int c2 = 0; c2 < 3; ++c2) trips.emplace_back(c1 * n + id, c2 * n + id, mtm(c1, c2));
        }
    }

    Eigen::SparseMatrix<double> normal(3 * n, 3 * n);
    normal.setFromTriplets(trips.begin(), trips.end());

    double diag_mean = 0.0;
    for (int i = 0; i < 3 * n; ++i) {
        const double d = normal.coeff(i, i);
        if (d <= 0.0)
            throw std::runtime_error("facesculpt: rank-deficient deformation system (unconstrained "
                                     "coordinate " + std::to_string(i) + ")");
        diag_mean += d;
    }
    diag_mean /= (3.0 * n);
    // Tiny Tikhonov term selects the solution nearest v_x along the (at most
    // one-dimensional) null direction of the affine projection.
    const double mu = 1e-10 * diag_mean;
    for (int i = 0; i < 3 * n; ++i) normal.coeffRef(i, i) += mu;

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(normal);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("facesculpt: deformation normal equations failed to factorize");
    const Eigen::VectorXd u = solver.solve(rhs);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("facesculpt: deformation normal equations failed to solve");

    std::vector<std::array<double, 3>> out = mesh.vertices;
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) out[i][c] += u[c * n + i];
    return out;
}

void write_energy_csv(const std::vector<double>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("facesculpt: cannot write " + path);
    out << "iteration,energy\n";
    char buf[64];
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, trace[i]);
        out << buf;
    }
    if (!out) throw std::runtime_error("facesculpt: write failed for " + path);
}

}  // namespace facesculpt::deform
