#include "facesculpt/toyassets.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace facesculpt::toy {

namespace {

constexpr int kGridCols = 25;
constexpr int kGridRows = 20;
constexpr double kUvMargin = 0.05;
constexpr double kFaceWidth = 1.6;   // model units
constexpr double kFaceHeight = 2.0;
constexpr double kPixelsPerUnit = 100.0;
constexpr double kViewportCenter = 128.0;

// (col, row) grid cell of each iBUG-68 landmark; all 68 pairs are distinct.
constexpr std::array<std::array<int, 2>, kNumLandmarks> kLandmarkCells = {{
    // Jaw 0-16, ear to ear through the chin.
    {1, 6},   {1, 8},   {2, 10},  {3, 12},  {4, 14},  {6, 15},  {8, 16},
    {10, 17}, {12, 18}, {14, 17}, {16, 16}, {18, 15}, {20, 14}, {21, 12},
    {22, 10}, {23, 8},  {23, 6},
    // Right then left eyebrow, 17-26.
    {4, 5},   {5, 4},   {7, 4},   {9, 4},   {10, 5},
    {14, 5},  {15, 4},  {17, 4},  {19, 4},  {20, 5},
    // Nose bridge 27-30 and base 31-35.
    {12, 6},  {12, 8},  {12, 9},  {12, 10},
    {10, 11}, {11, 11}, {12, 11}, {13, 11}, {14, 11},
    // Right eye 36-41, left eye 42-47.
    {5, 7},   {6, 6},   {8, 6},   {9, 7},   {8, 8},   {6, 8},
    {15, 7},  {16, 6},  {18, 6},  {19, 7},  {18, 8},  {16, 8},
    // Outer lip 48-59.
    {8, 14},  {10, 13}, {11, 13}, {12, 13}, {13, 13}, {14, 13}, {16, 14},
    {14, 16}, {13, 16}, {12, 16}, {11, 16}, {10, 16},
    // Inner lip 60-67.
    {9, 14},  {11, 14}, {12, 14}, {13, 14}, {15, 14}, {13, 15}, {12, 15},
    {11, 15},
}};

std::array<double, 2> grid_uv(int col, int row) {
    return {static_cast<double>(col) / (kGridCols - 1),
            static_cast<double>(row) / (kGridRows - 1)};
}

// Model-space position of a grid vertex: a face-sized elliptic dome with a
// gentle nose bump, y up, z toward the camera.
std::array<double, 3> grid_position(int col, int row) {
    const auto [u, t] = grid_uv(col, row);
    const double x = (u - 0.5) * kFaceWidth;
    const double y = (0.5 - t) * kFaceHeight;
    const double nx = 2.0 * (u - 0.5);
    const double ny = 2.0 * (t - 0.5);
    const double dome = 0.55 * std::sqrt(std::max(0.0, 1.0 - nx * nx - ny * ny));
    const double nose = 0.18 * std::exp(-22.0 * (nx * nx + (ny - 0.16) * (ny - 0.16)));
    return {x, y, dome + nose};
}

std::array<double, 2> pixel_of(const std::array<double, 3>& v) {
    return {kPixelsPerUnit * v[0] + kViewportCenter,
            -kPixelsPerUnit * v[1] + kViewportCenter};
}

double smooth_blob(double u, double v, double cu, double cv, double sigma) {
    const double du = u - cu;
    const double dv = v - cv;
    return std::exp(-(du * du + dv * dv) / (2.0 * sigma * sigma));
}

constexpr int kJawBegin = 0, kJawEnd = 17;
constexpr int kBrowBegin = 17, kBrowEnd = 27;
constexpr int kNoseBegin = 27, kNoseEnd = 36;
constexpr int kEyeBegin = 36, kEyeEnd = 48;
constexpr int kMouthBegin = 48, kMouthEnd = 68;

double eye_line_y(const LandmarkSet& ls) {
    double acc = 0.0;
    for (int i = kEyeBegin; i < kEyeEnd; ++i) acc += ls.y(i);
    return acc / (kEyeEnd - kEyeBegin);
}

std::array<double, 2> mouth_center(const LandmarkSet& ls) {
    double cx = 0.0, cy = 0.0;
    for (int i = kMouthBegin; i < kMouthEnd; ++i) {
        cx += ls.x(i);
        cy += ls.y(i);
    }
    const double n = kMouthEnd - kMouthBegin;
    return {cx / n, cy / n};
}

std::array<double, 2> face_center(const LandmarkSet& ls) {
    double cx = 0.0, cy = 0.0;
    for (int i = 0; i < kNumLandmarks; ++i) {
        cx += ls.x(i);
        cy += ls.y(i);
    }
    return {cx / kNumLandmarks, cy / kNumLandmarks};
}

}  // namespace

mesh::TriMesh make_face_mesh() {
    mesh::TriMesh m;
    m.vertices.reserve(kGridCols * kGridRows);
    m.uvs.reserve(kGridCols * kGridRows);
    for (int r = 0; r < kGridRows; ++r)
        for (int c = 0; c < kGridCols; ++c) {
            m.vertices.push_back(grid_position(c, r));
            const auto [u, t] = grid_uv(c, r);
            m.uvs.push_back({kUvMargin + (1.0 - 2.0 * kUvMargin) * u,
                             kUvMargin + (1.0 - 2.0 * kUvMargin) * (1.0 - t)});
        }
    for (int r = 0; r + 1 < kGridRows; ++r)
        for (int c = 0; c + 1 < kGridCols; ++c) {
            const int a = r * kGridCols + c;
            const int b = r * kGridCols + c + 1;
            const int d = (r + 1) * kGridCols + c;
            const int e = (r + 1) * kGridCols + c + 1;
            m.faces.push_back({a, b, e});
            m.faces.push_back({a, e, d});
        }
    for (int i = 0; i < kNumLandmarks; ++i)
        m.landmark_ids[i] = kLandmarkCells[i][1] * kGridCols + kLandmarkCells[i][0];
    m.validate();
    return m;
}

mesh::Projection make_projection() {
    mesh::Projection proj;
    proj.p = {kPixelsPerUnit, 0, 0, kViewportCenter,
              0, -kPixelsPerUnit, 0, kViewportCenter,
              0, 0, 0, 1};
    return proj;
}

LandmarkSet canonical_face() {
    LandmarkSet ls;
    for (int i = 0; i < kNumLandmarks; ++i) {
        const auto px = pixel_of(grid_position(kLandmarkCells[i][0], kLandmarkCells[i][1]));
        ls.x(i) = px[0];
        ls.y(i) = px[1];
    }
    return ls;
}

LandmarkSet sample_normal_face(Rng& rng) {
    LandmarkSet ls = canonical_face();

    // Mode coefficients, drawn in a fixed order.
    const double g_scale = 1.0 + 0.05 * rng.normal();
    const double g_rot = 0.03 * rng.normal();
    const double g_tx = 4.0 * rng.normal();
    const double g_ty = 4.0 * rng.normal();
    const double jaw_w = 1.0 + 0.06 * rng.normal();
    const double jaw_l = 1.0 + 0.05 * rng.normal();
    const double mouth_s = 1.0 + 0.09 * rng.normal();
    const double eye_d = 1.5 * rng.normal();
    const double nose_l = 1.0 + 0.07 * rng.normal();
    const double brow_h = 1.2 * rng.normal();

    const auto fc = face_center(ls);
    const double eye_y = eye_line_y(ls);
    const auto mc = mouth_center(ls);
    const double bridge_y = ls.y(kNoseBegin);

    for (int i = kJawBegin; i < kJawEnd; ++i) {
        ls.x(i) = fc[0] + (ls.x(i) - fc[0]) * jaw_w;
        ls.y(i) = eye_y + (ls.y(i) - eye_y) * jaw_l;
    }
    for (int i = kMouthBegin; i < kMouthEnd; ++i) {
        ls.x(i) = mc[0] + (ls.x(i) - mc[0]) * mouth_s;
        ls.y(i) = mc[1] + (ls.y(i) - mc[1]) * mouth_s;
    }
    // Eye blocks and their brows drift apart or together.
    for (int i = 17; i < 22; ++i) ls.x(i) -= eye_d;
    for (int i = 22; i < 27; ++i) ls.x(i) += eye_d;
    for (int i = 36; i < 42; ++i) ls.x(i) -= eye_d;
    for (int i = 42; i < 48; ++i) ls.x(i) += eye_d;
    for (int i = kNoseBegin; i < kNoseEnd; ++i)
        ls.y(i) = bridge_y + (ls.y(i) - bridge_y) * nose_l;
    for (int i = kBrowBegin; i < kBrowEnd; ++i) ls.y(i) += brow_h;

    // Global similarity about the face center.
    const double cs = std::cos(g_rot) * g_scale;
    const double sn = std::sin(g_rot) * g_scale;
    for (int i = 0; i < kNumLandmarks; ++i) {
        const double dx = ls.x(i) - fc[0];
        const double dy = ls.y(i) - fc[1];
        ls.x(i) = fc[0] + cs * dx - sn * dy + g_tx;
        ls.y(i) = fc[1] + sn * dx + cs * dy + g_ty;
    }

    for (int i = 0; i < kNumLandmarks; ++i) {
        ls.x(i) += 0.7 * rng.normal();
        ls.y(i) += 0.7 * rng.normal();
    }
    return ls;
}

std::vector<LandmarkSet> sample_normal_faces(int count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<LandmarkSet> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) out.push_back(sample_normal_face(rng));
    return out;
}

LandmarkSet exaggerate(const LandmarkSet& ls, int mode) {
    LandmarkSet out = ls;
    const auto fc = face_center(ls);
    const double eye_y = eye_line_y(ls);
    const auto mc = mouth_center(ls);
    const double bridge_y = ls.y(kNoseBegin);

    if (mode == 0) {
        // Broad: wide jaw and mouth, short chin, raised brows, wide nose base.
        for (int i = kJawBegin; i < kJawEnd; ++i) {
            out.x(i) = fc[0] + (ls.x(i) - fc[0]) * 1.45;
            out.y(i) = eye_y + (ls.y(i) - eye_y) * 0.85;
        }
        for (int i = kMouthBegin; i < kMouthEnd; ++i) {
            out.x(i) = mc[0] + (ls.x(i) - mc[0]) * 1.35;
            out.y(i) = mc[1] + (ls.y(i) - mc[1]) * 1.15;
        }
        for (int i = kBrowBegin; i < kBrowEnd; ++i) out.y(i) -= 3.0;
        for (int i = 31; i < 36; ++i) out.x(i) = fc[0] + (ls.x(i) - fc[0]) * 1.25;
    } else if (mode == 1) {
        // Long: stretched jaw and nose, narrow face and mouth, low brows.
        for (int i = kJawBegin; i < kJawEnd; ++i) {
            out.x(i) = fc[0] + (ls.x(i) - fc[0]) * 0.75;
            out.y(i) = eye_y + (ls.y(i) - eye_y) * 1.5;
        }
        for (int i = kMouthBegin; i < kMouthEnd; ++i) {
            out.x(i) = mc[0] + (ls.x(i) - mc[0]) * 0.7;
            out.y(i) = mc[1] + (ls.y(i) - mc[1]) * 0.9;
        }
        for (int i = kNoseBegin; i < kNoseEnd; ++i)
            out.y(i) = bridge_y + (ls.y(i) - bridge_y) * 1.35;
        for (int i = kBrowBegin; i < kBrowEnd; ++i) out.y(i) += 2.0;
    } else {
        throw std::invalid_argument("toy: unknown exaggeration mode");
    }
    return out;
}

std::vector<LandmarkSet> sample_art_faces(int count, std::uint64_t seed,
                                          std::vector<int>* modes) {
    Rng rng(seed);
    std::vector<LandmarkSet> out;
    out.reserve(count);
    if (modes) modes->clear();
    for (int i = 0; i < count; ++i) {
        const int mode = i % 2;
        out.push_back(exaggerate(sample_normal_face(rng), mode));
        if (modes) modes->push_back(mode);
    }
    return out;
}

ad::Tensor make_content_texture(int h, int w) {
    ad::Tensor img({h, w, 3});
    // Feature centers in UV space, derived from the landmark grid cells.
    auto cell_uv = [](double col, double row) {
        return std::array<double, 2>{
            kUvMargin + (1.0 - 2.0 * kUvMargin) * col / (kGridCols - 1),
            kUvMargin + (1.0 - 2.0 * kUvMargin) * (1.0 - row / (kGridRows - 1))};
    };
    const auto eye_r = cell_uv(7, 7);
    const auto eye_l = cell_uv(17, 7);
    const auto mouth = cell_uv(12, 14.5);
    const auto nose = cell_uv(12, 11);

    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const double u = (c + 0.5) / w;
            const double v = 1.0 - (r + 0.5) / h;  // texel row 0 is uv top
            double red = 0.80 + 0.10 * v + 0.03 * std::sin(6.0 * u) * std::sin(5.0 * v);
            double green = 0.62 + 0.08 * v + 0.02 * std::sin(7.0 * u + 1.0);
            double blue = 0.50 + 0.06 * v;

            const double eyes = 0.55 * (smooth_blob(u, v, eye_r[0], eye_r[1], 0.04) +
                                        smooth_blob(u, v, eye_l[0], eye_l[1], 0.04));
            red *= 1.0 - eyes;
            green *= 1.0 - eyes;
            blue *= 1.0 - eyes;

            const double lip = 0.7 * smooth_blob(u, v, mouth[0], mouth[1], 0.05);
            red = red * (1.0 - lip) + 0.65 * lip;
            green = green * (1.0 - lip) + 0.25 * lip;
            blue = blue * (1.0 - lip) + 0.25 * lip;

            const double shine = 0.06 * smooth_blob(u, v, nose[0], nose[1], 0.05);
            img.v[img.idx3(r, c, 0)] = std::clamp(red + shine, 0.0, 1.0);
            img.v[img.idx3(r, c, 1)] = std::clamp(green + shine, 0.0, 1.0);
            img.v[img.idx3(r, c, 2)] = std::clamp(blue + shine, 0.0, 1.0);
        }
    return img;
}

ad::Tensor make_style_image(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    struct Blob {
        double u, v, sigma;
    };
    std::vector<Blob> blobs;
    for (int i = 0; i < 6; ++i)
        blobs.push_back({rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.05, 0.12)});

    ad::Tensor img({h, w, 3});
    const double colA[3] = {0.95, 0.75, 0.20};
    const double colB[3] = {0.15, 0.30, 0.80};
    const double colBlob[3] = {0.85, 0.12, 0.25};
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const double u = (c + 0.5) / w;
            const double v = (r + 0.5) / h;
            const double band = 0.5 + 0.5 * std::sin(2.0 * 3.14159265358979323846 *
                                                     (4.0 * u + 2.5 * v));
            double px[3];
            for (int ch = 0; ch < 3; ++ch) px[ch] = colA[ch] * band + colB[ch] * (1.0 - band);
            for (const Blob& b : blobs) {
                const double wgt = smooth_blob(u, v, b.u, b.v, b.sigma);
                for (int ch = 0; ch < 3; ++ch)
                    px[ch] = px[ch] * (1.0 - wgt) + colBlob[ch] * wgt;
            }
            const double detail =
                0.08 * std::sin(2.0 * 3.14159265358979323846 * 16.0 * (u - v));
            for (int ch = 0; ch < 3; ++ch)
                img.v[img.idx3(r, c, ch)] = std::clamp(px[ch] + detail, 0.0, 1.0);
        }
    return img;
}

}  // namespace facesculpt::toy
