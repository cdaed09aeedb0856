#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "facesculpt/features.hpp"
#include "facesculpt/mesh.hpp"
#include "facesculpt/raster.hpp"
#include "facesculpt/style_loss.hpp"

namespace facesculpt::style {

struct StyleConfig {
    double beta = 1.0;     // content-loss weight
    int iterations = 600;
    double lr = 0.002;     // RMSprop learning rate
    int k_max = 1024;      // feature sample budget per view
    double azimuth_range = 30.0;    // degrees, view sampling half-width
    double elevation_range = 20.0;  // degrees
    std::uint64_t seed = 0;
};

struct TextureOptStep {
    double azimuth = 0, elevation = 0;  // the view this iteration drew
    double style = 0, content = 0, total = 0;  // losses before the step
};

struct TextureOptResult {
    ad::Tensor texture;               // final t_z, clamped to [0,1]
    std::vector<TextureOptStep> trace;
};

// Multi-view texture stylization: per iteration draw a view, render the
// deformed mesh with the original texture (content) and with the evolving
// texture, and take an RMSprop step on remd + beta * self-similarity. The
// rng drives the view first and the pixel sample second each iteration.
TextureOptResult optimize_texture(const mesh::TriMesh& mesh, const ad::Tensor& t_x,
                                  const features::FeatureStack& style_stack,
                                  const mesh::Projection& base_proj,
                                  const features::ExtractorSpec& spec,
                                  const StyleConfig& cfg,
                                  const render::RenderOptions& ropt);

void write_loss_csv(const std::vector<TextureOptStep>& trace, const std::string& path);

}  // namespace facesculpt::style
