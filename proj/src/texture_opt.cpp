#include "facesculpt/texture_opt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "facesculpt/optim.hpp"

namespace facesculpt::style {

TextureOptResult optimize_texture(const mesh::TriMesh& mesh, const ad::Tensor& t_x,
                                  const features::FeatureStack& style_stack,
                                  const mesh::Projection& base_proj,
                                  const features::ExtractorSpec& spec,
                                  const StyleConfig& cfg,
                                  const render::RenderOptions& ropt) {
    mesh.validate();
    if (t_x.rank() != 3 || t_x.shape[2] != 3)
        throw std::invalid_argument("facesculpt: texture must be [H,W,3]");
    if (cfg.beta < 0.0 || cfg.lr <= 0.0 || cfg.iterations < 0 || cfg.k_max < 64)
        throw std::invalid_argument("facesculpt: invalid style config");
    const int expected_d = features::kChannelsPerLevel * spec.levels;
    if (style_stack.d != expected_d)
        throw std::invalid_argument(
            "facesculpt: style feature dimension " + std::to_string(style_stack.d) +
            " does not match the extractor's " + std::to_string(expected_d));
    const int tex_h = t_x.shape[0], tex_w = t_x.shape[1];

    ParamStore store;
    store.add("t_z", t_x);
    const RmsPropConfig rms{cfg.lr, 0.99, 1e-8};
    Rng rng(cfg.seed);

    TextureOptResult result;
    result.trace.reserve(cfg.iterations);
    const ad::Tensor style_rows = style_stack.rows();

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        const auto [azimuth, elevation] =
            render::sample_view(rng, cfg.azimuth_range, cfg.elevation_range);
        mesh::Projection proj = base_proj;
        proj.azimuth_deg = azimuth;
        proj.elevation_deg = elevation;

        const render::RenderedView view = render::rasterize(mesh, proj, ropt, tex_h, tex_w);
        const ad::Tensor content_img = render::shade(view, t_x, ropt.background);
        const std::vector<std::array<int, 2>> pixels =
            features::sample_pixels(ropt.height, ropt.width, cfg.k_max, rng);

        std::vector<int> pixel_index(view.footprint.size());
        std::vector<ad::BilinearTap> taps(view.footprint.size());
        for (std::size_t i = 0; i < view.footprint.size(); ++i) {
            pixel_index[i] = view.footprint[i].pixel;
            taps[i] = view.footprint[i].tap;
        }

        ad::Tape tape;
        const ad::NodeId tz = tape.param(store, "t_z");
        const ad::NodeId iz_img = tape.texture_shade(tz, ropt.height, ropt.width,
                                                     std::move(pixel_index), std::move(taps),
                                                     ropt.background);
        const ad::NodeId ic_img = tape.constant(content_img);
        const ad::NodeId iz_rows = features::build_feature_rows(tape, iz_img, spec.levels, pixels);
        const ad::NodeId ic_rows = features::build_feature_rows(tape, ic_img, spec.levels, pixels);
        const ad::NodeId y_rows = tape.constant(style_rows);

        const ad::NodeId style_node = remd_style_loss(tape, iz_rows, y_rows);
        const ad::NodeId content_node = self_similarity_content_loss(tape, iz_rows, ic_rows);
        const ad::NodeId total = tape.add(style_node, tape.scale(content_node, cfg.beta));

        TextureOptStep step;
        step.azimuth = azimuth;
        step.elevation = elevation;
        step.style = tape.val(style_node).v[0];
        step.content = tape.val(content_node).v[0];
        step.total = tape.val(total).v[0];
        if (!std::isfinite(step.total))
            throw std::runtime_error("facesculpt: non-finite texture loss at iteration " +
                                     std::to_string(iter) + " (style=" + std::to_string(step.style) +
                                     ", content=" + std::to_string(step.content) + ")");
        result.trace.push_back(step);

        store.zero_grads();
        tape.backward(total);
        rmsprop_step(store, rms, {"t_z"});
        for (double& x : store.value("t_z").v) x = std::clamp(x, 0.0, 1.0);
    }

    result.texture = store.value("t_z");
    return result;
}

void write_loss_csv(const std::vector<TextureOptStep>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("facesculpt: cannot write " + path);
    out << "iteration,style,content,total\n";
    char buf[128];
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", i, trace[i].style,
                      trace[i].content, trace[i].total);
        out << buf;
    }
    if (!out) throw std::runtime_error("facesculpt: write failed for " + path);
}

}  // namespace facesculpt::style
