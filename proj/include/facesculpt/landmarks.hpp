#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace facesculpt {

inline constexpr int kNumLandmarks = 68;
inline constexpr int kLandmarkDim = 2 * kNumLandmarks;  // 136

// 68 2D facial landmark points in iBUG-68 order. Raw sets are in image pixels;
// aligned sets are in the normalized frame of the average face.
struct LandmarkSet {
    std::array<std::array<double, 2>, kNumLandmarks> pts{};

    double& x(int i) { return pts[i][0]; }
    double& y(int i) { return pts[i][1]; }
    double x(int i) const { return pts[i][0]; }
    double y(int i) const { return pts[i][1]; }

    // Interleaved (x0, y0, x1, y1, ...) flattening, 136 values.
    std::array<double, kLandmarkDim> flatten() const;
    static LandmarkSet unflatten(const double* v);

    bool all_finite() const;
};

// 2x3 affine map p' = M * [p; 1].
struct AlignmentTransform {
    std::array<std::array<double, 3>, 2> m{{{1, 0, 0}, {0, 1, 0}}};

    std::array<double, 2> apply(double px, double py) const;
    LandmarkSet apply(const LandmarkSet& ls) const;
    AlignmentTransform inverse() const;
    double det2() const { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }
};

// Alignment anchors: eye centers and mouth center, iBUG-68 index ranges
// 36-41 (left eye), 42-47 (right eye), 48-67 (mouth).
std::array<std::array<double, 2>, 3> anchor_points(const LandmarkSet& ls);

// The unique affine mapping ls's three anchors onto avg's anchors, applied to
// all 68 points. Throws std::runtime_error when the anchors are collinear.
std::pair<LandmarkSet, AlignmentTransform> align_to_average(const LandmarkSet& ls,
                                                            const LandmarkSet& avg);

// Elementwise mean of a set of landmark sets.
LandmarkSet mean_landmarks(const std::vector<LandmarkSet>& sets);

// Straight-line blend (1-t)*a + t*b. t=0 and t=1 return the endpoint exactly.
LandmarkSet lerp_landmarks(const LandmarkSet& a, const LandmarkSet& b, double t);

// CSV with 68 "x,y" rows. Parse errors carry the file name and line number.
LandmarkSet load_landmarks_csv(const std::string& path);
void save_landmarks_csv(const LandmarkSet& ls, const std::string& path);

// All *.csv files in a directory, sorted by file name.
std::vector<LandmarkSet> load_landmark_dir(const std::string& dir);

}  // namespace facesculpt
