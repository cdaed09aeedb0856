#include "facesculpt/landmarks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

namespace facesculpt {

std::array<double, kLandmarkDim> LandmarkSet::flatten() const {
    std::array<double, kLandmarkDim> out;
    for (int i = 0; i < kNumLandmarks; ++i) {
        out[2 * i] = pts[i][0];
        out[2 * i + 1] = pts[i][1];
    }
    return out;
}

LandmarkSet LandmarkSet::unflatten(const double* v) {
    LandmarkSet ls;
    for (int i = 0; i < kNumLandmarks; ++i) {
        ls.pts[i][0] = v[2 * i];
        ls.pts[i][1] = v[2 * i + 1];
    }
    return ls;
}

bool LandmarkSet::all_finite() const {
    for (const auto& p : pts)
        if (!std::isfinite(p[0]) || !std::isfinite(p[1])) return false;
    return true;
}

std::array<double, 2> AlignmentTransform::apply(double px, double py) const {
    return {m[0][0] * px + m[0][1] * py + m[0][2], m[1][0] * px + m[1][1] * py + m[1][2]};
}

LandmarkSet AlignmentTransform::apply(const LandmarkSet& ls) const {
    LandmarkSet out;
    for (int i = 0; i < kNumLandmarks; ++i) {
        const auto p = apply(ls.pts[i][0], ls.pts[i][1]);
        out.pts[i] = {p[0], p[1]};
    }
    return out;
}

AlignmentTransform AlignmentTransform::inverse() const {
    const double d = det2();
    if (std::abs(d) <= 1e-12)
        throw std::runtime_error("AlignmentTransform::inverse: singular linear block");
    AlignmentTransform inv;
    inv.m[0][0] = m[1][1] / d;
    inv.m[0][1] = -m[0][1] / d;
    inv.m[1][0] = -m[1][0] / d;
    inv.m[1][1] = m[0][0] / d;
    inv.m[0][2] = -(inv.m[0][0] * m[0][2] + inv.m[0][1] * m[1][2]);
    inv.m[1][2] = -(inv.m[1][0] * m[0][2] + inv.m[1][1] * m[1][2]);
    return inv;
}

std::array<std::array<double, 2>, 3> anchor_points(const LandmarkSet& ls) {
    auto range_mean = [&ls](int lo, int hi) {
        double sx = 0, sy = 0;
        for (int i = lo; i <= hi; ++i) {
            sx += ls.pts[i][0];
            sy += ls.pts[i][1];
        }
        const double n = hi - lo + 1;
        return std::array<double, 2>{sx / n, sy / n};
    };
    return {range_mean(36, 41), range_mean(42, 47), range_mean(48, 67)};
}

std::pair<LandmarkSet, AlignmentTransform> align_to_average(const LandmarkSet& ls,
                                                            const LandmarkSet& avg) {
    if (!ls.all_finite() || !avg.all_finite())
        throw std::runtime_error("align_to_average: non-finite landmark coordinates");
    const auto src = anchor_points(ls);
    const auto dst = anchor_points(avg);

    // Solve [sx sy 1] * rowT = dx (and dy) for the two affine rows.
    Eigen::Matrix3d A;
    for (int i = 0; i < 3; ++i) A.row(i) << src[i][0], src[i][1], 1.0;
    if (std::abs(A.determinant()) <= 1e-12)
        throw std::runtime_error("align_to_average: degenerate anchors (collinear)");

    Eigen::Vector3d bx(dst[0][0], dst[1][0], dst[2][0]);
    Eigen::Vector3d by(dst[0][1], dst[1][1], dst[2][1]);
    const Eigen::PartialPivLU<Eigen::Matrix3d> lu(A);
    const Eigen::Vector3d rx = lu.solve(bx);
    const Eigen::Vector3d ry = lu.solve(by);

    AlignmentTransform t;
    t.m[0] = {rx[0], rx[1], rx[2]};
    t.m[1] = {ry[0], ry[1], ry[2]};
    if (std::abs(t.det2()) <= 1e-12)
        throw std::runtime_error("align_to_average: degenerate anchors (collapsed transform)");
    return {t.apply(ls), t};
}

LandmarkSet mean_landmarks(const std::vector<LandmarkSet>& sets) {
    if (sets.empty()) throw std::runtime_error("mean_landmarks: empty input");
    LandmarkSet out;
    for (int i = 0; i < kNumLandmarks; ++i) {
        double sx = 0, sy = 0;
        for (const auto& s : sets) {
            sx += s.pts[i][0];
            sy += s.pts[i][1];
        }
        out.pts[i] = {sx / sets.size(), sy / sets.size()};
    }
    return out;
}

LandmarkSet lerp_landmarks(const LandmarkSet& a, const LandmarkSet& b, double t) {
    if (t == 0.0) return a;
    if (t == 1.0) return b;
    LandmarkSet out;
    for (int i = 0; i < kNumLandmarks; ++i) {
        out.pts[i][0] = (1.0 - t) * a.pts[i][0] + t * b.pts[i][0];
        out.pts[i][1] = (1.0 - t) * a.pts[i][1] + t * b.pts[i][1];
    }
    return out;
}

LandmarkSet load_landmarks_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error(path + ": cannot open");
    LandmarkSet ls;
    std::string line;
    int row = 0, lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (row >= kNumLandmarks)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": more than 68 landmark rows");
        double px = 0, py = 0;
        char trailing = 0;
        const int got = std::sscanf(line.c_str(), " %lf , %lf %c", &px, &py, &trailing);
        if (got != 2)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected 'x,y', got '" + line + "'");
        if (!std::isfinite(px) || !std::isfinite(py))
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": non-finite coordinate");
        ls.pts[row] = {px, py};
        ++row;
    }
    if (row != kNumLandmarks)
        throw std::runtime_error(path + ": expected 68 landmark rows, got " + std::to_string(row));
    return ls;
}

void save_landmarks_csv(const LandmarkSet& ls, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error(path + ": cannot open for writing");
    char buf[80];
    for (int i = 0; i < kNumLandmarks; ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", ls.pts[i][0], ls.pts[i][1]);
        f << buf;
    }
}

std::vector<LandmarkSet> load_landmark_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw std::runtime_error(dir + ": not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<LandmarkSet> out;
    out.reserve(files.size());
    for (const auto& p : files) out.push_back(load_landmarks_csv(p.string()));
    return out;
}

}  // namespace facesculpt
