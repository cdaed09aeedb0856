#pragma once

#include <utility>
#include <vector>

#include "facesculpt/mesh.hpp"
#include "facesculpt/rng.hpp"
#include "facesculpt/tape.hpp"
#include "facesculpt/tensor.hpp"

namespace facesculpt::render {

// One covered pixel: which face won the depth test, its barycentric weights,
// and the four texels its UV sample touches. Taps always sum to weight 1.
struct PixelFootprint {
    int pixel = 0;              // flat row * width + col
    int face = 0;
    double bary[3] = {0, 0, 0};
    ad::BilinearTap tap{};
};

struct RenderedView {
    int width = 0, height = 0;
    int tex_h = 0, tex_w = 0;
    ad::Tensor image;                      // [H,W,3]; empty until shaded
    std::vector<double> depth;             // flat, +inf where uncovered
    std::vector<PixelFootprint> footprint; // ascending pixel order
};

struct RenderOptions {
    int width = 256;
    int height = 256;
    double background = 0.5;
};

// Uniform view angles: azimuth in [-azimuth_range, azimuth_range], elevation
// in [-elevation_range, elevation_range] degrees (azimuth drawn first).
std::pair<double, double> sample_view(Rng& rng, double azimuth_range,
                                      double elevation_range);
inline std::pair<double, double> sample_view(Rng& rng) { return sample_view(rng, 30.0, 20.0); }

// Geometry pass: z-buffered coverage and per-pixel footprints for a texture
// of the given size. The projection's output is in pixel units; pixel (r,c)
// is sampled at center (c + 0.5, r + 0.5) with y growing downward. Coverage
// uses half-open edge ownership so triangles sharing an edge never overlap
// or leave gaps; depth ties go to the lower face index.
RenderedView rasterize(const mesh::TriMesh& mesh, const mesh::Projection& proj,
                       const RenderOptions& opt, int tex_h, int tex_w);

// Bilinear clamp-to-edge texture lookup for every covered pixel; background
// elsewhere. Pure function of the footprint.
ad::Tensor shade(const RenderedView& view, const ad::Tensor& texture, double background);

// rasterize + shade, storing the image in the returned view.
RenderedView render(const mesh::TriMesh& mesh, const ad::Tensor& texture,
                    const mesh::Projection& proj, const RenderOptions& opt);

// Exact adjoint of shade with respect to the texture: scatter-adds each
// pixel's gradient into its footprint texels. Geometry gets no gradient.
ad::Tensor render_backward(const RenderedView& view, const ad::Tensor& grad_image);

// Worker-thread cap: FACE_SCULPT_THREADS when set, else hardware concurrency.
int max_threads();

}  // namespace facesculpt::render
