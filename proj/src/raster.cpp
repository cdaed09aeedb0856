#include "facesculpt/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <thread>

namespace facesculpt::render {

namespace {

struct ScreenVertex {
    double x = 0, y = 0;   // pixel coordinates
    double depth = 0;      // z-test key (smaller is nearer)
    double w = 1;          // homogeneous w (1 for affine)
    bool valid = true;
};

struct FaceSetup {
    int face_index;         // index into mesh.faces
    int ids[3];
    double ax, ay, bx, by, cx, cy;
    double area2;           // positive after orientation fix
    int perm[3];            // maps oriented corner -> original corner
};

double cross2(double ox, double oy, double ax2, double ay2, double bx2, double by2) {
    return (ax2 - ox) * (by2 - oy) - (ay2 - oy) * (bx2 - ox);
}

// Half-open edge ownership for boundary pixels (E == 0): accept when the
// directed edge points downward, or leftward when horizontal. A shared edge
// appears with opposite directions in its two faces, so exactly one accepts.
bool boundary_accept(double dx, double dy) {
    return dy > 0.0 || (dy == 0.0 && dx < 0.0);
}

bool edge_covers(double e, double dx, double dy) {
    return e > 0.0 || (e == 0.0 && boundary_accept(dx, dy));
}

std::vector<ScreenVertex> project_vertices(const mesh::TriMesh& mesh,
                                           const mesh::Projection& proj) {
    const std::array<double, 3> pivot = mesh::centroid(mesh);
    const Eigen::Matrix3d rot = mesh::view_rotation(proj.azimuth_deg, proj.elevation_deg);
    const Eigen::Vector3d piv(pivot[0], pivot[1], pivot[2]);
    const double* p = proj.p.data();
    const bool affine = proj.is_affine();

    std::vector<ScreenVertex> out(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const auto& v = mesh.vertices[i];
        const Eigen::Vector3d r = piv + rot * (Eigen::Vector3d(v[0], v[1], v[2]) - piv);
        const double hx = p[0] * r.x() + p[1] * r.y() + p[2] * r.z() + p[3];
        const double hy = p[4] * r.x() + p[5] * r.y() + p[6] * r.z() + p[7];
        ScreenVertex& sv = out[i];
        if (affine) {
            sv.x = hx;
            sv.y = hy;
            sv.depth = -r.z();   // camera on +z looking down -z
            sv.w = 1.0;
        } else {
            const double w = p[8] * r.x() + p[9] * r.y() + p[10] * r.z() + p[11];
            if (w < 1e-12) {
                sv.valid = false;  // behind the camera; owning faces are culled
                continue;
            }
            sv.x = hx / w;
            sv.y = hy / w;
            sv.depth = w;
            sv.w = w;
        }
    }
    return out;
}

// Computes the three oriented-edge values of face f at point (px, py).
void edge_values(const FaceSetup& f, double px, double py, double e[3]) {
    e[0] = cross2(f.bx, f.by, f.cx, f.cy, px, py);  // weight of corner A
    e[1] = cross2(f.cx, f.cy, f.ax, f.ay, px, py);  // weight of corner B
    e[2] = cross2(f.ax, f.ay, f.bx, f.by, px, py);  // weight of corner C
}

bool covers(const FaceSetup& f, double px, double py, double e[3]) {
    edge_values(f, px, py, e);
    return edge_covers(e[0], f.cx - f.bx, f.cy - f.by) &&
           edge_covers(e[1], f.ax - f.cx, f.ay - f.cy) &&
           edge_covers(e[2], f.bx - f.ax, f.by - f.ay);
}

ad::BilinearTap uv_taps(double u, double v, int tex_h, int tex_w) {
    // UV (0,0) is the texture's bottom-left; tensor row 0 is the top row.
    const double sx = u * tex_w - 0.5;
    const double sy = (1.0 - v) * tex_h - 0.5;
    const int x0 = static_cast<int>(std::floor(sx));
    const int y0 = static_cast<int>(std::floor(sy));
    const double fx = sx - x0, fy = sy - y0;
    const int xs[2] = {std::clamp(x0, 0, tex_w - 1), std::clamp(x0 + 1, 0, tex_w - 1)};
    const int ys[2] = {std::clamp(y0, 0, tex_h - 1), std::clamp(y0 + 1, 0, tex_h - 1)};
    const double wx[2] = {1.0 - fx, fx};
    const double wy[2] = {1.0 - fy, fy};
    ad::BilinearTap tap;
    int q = 0;
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i, ++q) {
            tap.idx[q] = ys[j] * tex_w + xs[i];
            tap.w[q] = wy[j] * wx[i];
        }
    return tap;
}

}  // namespace

std::pair<double, double> sample_view(Rng& rng, double azimuth_range,
                                      double elevation_range) {
    const double azimuth = rng.uniform(-azimuth_range, azimuth_range);
    const double elevation = rng.uniform(-elevation_range, elevation_range);
    return {azimuth, elevation};
}

int max_threads() {
    if (const char* env = std::getenv("FACE_SCULPT_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return std::min(n, 64);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

RenderedView rasterize(const mesh::TriMesh& mesh, const mesh::Projection& proj,
                       const RenderOptions& opt, int tex_h, int tex_w) {
    mesh.validate();
    if (opt.width <= 0 || opt.height <= 0)
        throw std::invalid_argument("facesculpt: image size must be positive");
    if (tex_h <= 0 || tex_w <= 0)
        throw std::invalid_argument("facesculpt: texture size must be positive");

    const std::vector<ScreenVertex> sv = project_vertices(mesh, proj);
    std::vector<FaceSetup> setups;
    setups.reserve(mesh.faces.size());
    for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
        const auto& face = mesh.faces[fi];
        if (!sv[face[0]].valid || !sv[face[1]].valid || !sv[face[2]].valid) continue;
        FaceSetup s;
        s.face_index = static_cast<int>(fi);
        s.ids[0] = face[0];
        s.ids[1] = face[1];
        s.ids[2] = face[2];
        s.perm[0] = 0;
        s.perm[1] = 1;
        s.perm[2] = 2;
        double area2 = cross2(sv[face[0]].x, sv[face[0]].y, sv[face[1]].x, sv[face[1]].y,
                              sv[face[2]].x, sv[face[2]].y);
        if (area2 == 0.0) continue;  // edge-on; nothing to fill
        if (area2 < 0.0) {
            std::swap(s.ids[1], s.ids[2]);
            std::swap(s.perm[1], s.perm[2]);
            area2 = -area2;
        }
        s.ax = sv[s.ids[0]].x;
        s.ay = sv[s.ids[0]].y;
        s.bx = sv[s.ids[1]].x;
        s.by = sv[s.ids[1]].y;
        s.cx = sv[s.ids[2]].x;
        s.cy = sv[s.ids[2]].y;
        s.area2 = area2;
        setups.push_back(s);
    }

    RenderedView view;
    view.width = opt.width;
    view.height = opt.height;
    view.tex_h = tex_h;
    view.tex_w = tex_w;
    const std::size_t npix = static_cast<std::size_t>(opt.width) * opt.height;
    view.depth.assign(npix, std::numeric_limits<double>::infinity());
    std::vector<int> winner(npix, -1);  // index into setups

    // Depth resolution, parallel over disjoint row bands: every thread scans
    // all faces clipped to its rows, so the result cannot depend on schedule.
    auto resolve_rows = [&](int row_begin, int row_end) {
        for (std::size_t si = 0; si < setups.size(); ++si) {
            const FaceSetup& f = setups[si];
            const double min_x = std::min({f.ax, f.bx, f.cx});
            const double max_x = std::max({f.ax, f.bx, f.cx});
            const double min_y = std::min({f.ay, f.by, f.cy});
            const double max_y = std::max({f.ay, f.by, f.cy});
            const int c0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
            const int c1 = std::min(opt.width - 1, static_cast<int>(std::ceil(max_x - 0.5)));
            const int r0 = std::max(row_begin, static_cast<int>(std::floor(min_y - 0.5)));
            const int r1 = std::min(row_end - 1, static_cast<int>(std::ceil(max_y - 0.5)));
            for (int r = r0; r <= r1; ++r) {
                for (int c = c0; c <= c1; ++c) {
                    double e[3];
                    if (!covers(f, c + 0.5, r + 0.5, e)) continue;
                    const double la = e[0] / f.area2;
                    const double lb = e[1] / f.area2;
                    const double lc = e[2] / f.area2;
                    // Perspective-correct depth: interpolate 1/w linearly in
                    // screen space. For affine faces all w are 1 and this is
                    // plain linear interpolation of the depth key.
                    double d;
                    const ScreenVertex& va = sv[f.ids[0]];
                    const ScreenVertex& vb = sv[f.ids[1]];
                    const ScreenVertex& vc = sv[f.ids[2]];
                    if (va.w == 1.0 && vb.w == 1.0 && vc.w == 1.0) {
                        d = la * va.depth + lb * vb.depth + lc * vc.depth;
                    } else {
                        d = 1.0 / (la / va.depth + lb / vb.depth + lc / vc.depth);
                    }
                    const std::size_t pix = static_cast<std::size_t>(r) * opt.width + c;
                    if (d < view.depth[pix]) {  // strict: ties keep the earlier (lower) face
                        view.depth[pix] = d;
                        winner[pix] = static_cast<int>(si);
                    }
                }
            }
        }
    };

    const int threads = std::min(max_threads(), opt.height);
    if (threads <= 1) {
        resolve_rows(0, opt.height);
    } else {
        std::vector<std::thread> pool;
        const int band = (opt.height + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const int lo = t * band;
            const int hi = std::min(opt.height, lo + band);
            if (lo < hi) pool.emplace_back(resolve_rows, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    // Attribute pass: recompute barycentrics for each pixel's winning face,
    // derive the UV sample and its texel taps.
    view.footprint.reserve(npix / 4);
    for (std::size_t pix = 0; pix < npix; ++pix) {
        if (winner[pix] < 0) continue;
        const FaceSetup& f = setups[winner[pix]];
        const int r = static_cast<int>(pix) / opt.width;
        const int c = static_cast<int>(pix) % opt.width;
        double e[3];
        edge_values(f, c + 0.5, r + 0.5, e);
        double l[3] = {e[0] / f.area2, e[1] / f.area2, e[2] / f.area2};
        const ScreenVertex* vs[3] = {&sv[f.ids[0]], &sv[f.ids[1]], &sv[f.ids[2]]};
        if (!(vs[0]->w == 1.0 && vs[1]->w == 1.0 && vs[2]->w == 1.0)) {
            const double inv = l[0] / vs[0]->w + l[1] / vs[1]->w + l[2] / vs[2]->w;
            for (int k = 0; k < 3; ++k) l[k] = (l[k] / vs[k]->w) / inv;
        }
        double u = 0.0, vq = 0.0;
        for (int k = 0; k < 3; ++k) {
            u += l[k] * mesh.uvs[f.ids[k]][0];
            vq += l[k] * mesh.uvs[f.ids[k]][1];
        }
        PixelFootprint fp;
        fp.pixel = static_cast<int>(pix);
        fp.face = f.face_index;
        // Report barycentrics in the face's original corner order.
        for (int k = 0; k < 3; ++k) fp.bary[f.perm[k]] = l[k];
        fp.tap = uv_taps(u, vq, tex_h, tex_w);
        view.footprint.push_back(fp);
    }
    return view;
}

ad::Tensor shade(const RenderedView& view, const ad::Tensor& texture, double background) {
    if (texture.rank() != 3 || texture.shape[2] != 3)
        throw std::invalid_argument("facesculpt: shade expects an [H,W,3] texture");
    if (texture.shape[0] != view.tex_h || texture.shape[1] != view.tex_w)
        throw std::invalid_argument("facesculpt: texture size differs from the rasterized footprint");
    ad::Tensor image({view.height, view.width, 3});
    std::fill(image.v.begin(), image.v.end(), background);
    for (const PixelFootprint& fp : view.footprint) {
        const std::size_t base = static_cast<std::size_t>(fp.pixel) * 3;
        for (int c = 0; c < 3; ++c) {
            double s = 0.0;
            for (int q = 0; q < 4; ++q)
                s += fp.tap.w[q] * texture.v[static_cast<std::size_t>(fp.tap.idx[q]) * 3 + c];
            image.v[base + c] = s;
        }
    }
    return image;
}

RenderedView render(const mesh::TriMesh& mesh, const ad::Tensor& texture,
                    const mesh::Projection& proj, const RenderOptions& opt) {
    if (texture.rank() != 3 || texture.shape[2] != 3)
        throw std::invalid_argument("facesculpt: render expects an [H,W,3] texture");
    RenderedView view = rasterize(mesh, proj, opt, texture.shape[0], texture.shape[1]);
    view.image = shade(view, texture, opt.background);
    return view;
}

ad::Tensor render_backward(const RenderedView& view, const ad::Tensor& grad_image) {
    if (grad_image.rank() != 3 || grad_image.shape[0] != view.height ||
        grad_image.shape[1] != view.width || grad_image.shape[2] != 3)
        throw std::invalid_argument("facesculpt: gradient image size mismatch");
    ad::Tensor grad_tex({view.tex_h, view.tex_w, 3});
    for (const PixelFootprint& fp : view.footprint) {
        const std::size_t base = static_cast<std::size_t>(fp.pixel) * 3;
        for (int c = 0; c < 3; ++c) {
            const double g = grad_image.v[base + c];
            for (int q = 0; q < 4; ++q)
                grad_tex.v[static_cast<std::size_t>(fp.tap.idx[q]) * 3 + c] += fp.tap.w[q] * g;
        }
    }
    return grad_tex;
}

}  // namespace facesculpt::render
