#include "facesculpt/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "facesculpt/blobio.hpp"

namespace facesculpt::features {

ad::Tensor FeatureStack::rows() const {
    if (static_cast<std::size_t>(k) * d != vectors.size())
        throw std::runtime_error("facesculpt: feature stack vector count does not match k*d");
    return ad::Tensor({k, d}, vectors);
}

std::vector<double> gaussian_kernel(double sigma) {
    if (sigma <= 0.0) throw std::invalid_argument("facesculpt: sigma must be positive");
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        total += k[i + radius];
    }
    for (double& x : k) x /= total;
    return k;
}

std::vector<std::array<int, 2>> sample_pixels(int h, int w, int budget, Rng& rng) {
    if (h <= 0 || w <= 0) throw std::invalid_argument("facesculpt: empty image");
    if (budget < 1) throw std::invalid_argument("facesculpt: sample budget must be positive");
    const int n = h * w;
    const int k = std::min(n, budget);
    const std::vector<int> flat = rng.sample_without_replacement(n, k);
    std::vector<std::array<int, 2>> out(k);
    for (int i = 0; i < k; ++i) out[i] = {flat[i] / w, flat[i] % w};
    return out;
}

namespace {

// Taps into a level grid of size (lh, lw) for full-resolution pixel centers
// shrunk by 2^level: the inverse of align-to-pixel-center bilinear upsampling.
std::vector<ad::BilinearTap> level_taps(const std::vector<std::array<int, 2>>& pixels,
                                        int level, int lh, int lw) {
    const double scale = static_cast<double>(1 << level);
    std::vector<ad::BilinearTap> taps(pixels.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        const double sy = (pixels[i][0] + 0.5) / scale - 0.5;
        const double sx = (pixels[i][1] + 0.5) / scale - 0.5;
        const int x0 = static_cast<int>(std::floor(sx));
        const int y0 = static_cast<int>(std::floor(sy));
        const double fx = sx - x0, fy = sy - y0;
        const int xs[2] = {std::clamp(x0, 0, lw - 1), std::clamp(x0 + 1, 0, lw - 1)};
        const int ys[2] = {std::clamp(y0, 0, lh - 1), std::clamp(y0 + 1, 0, lh - 1)};
        const double wx[2] = {1.0 - fx, fx};
        const double wy[2] = {1.0 - fy, fy};
        int q = 0;
        for (int j = 0; j < 2; ++j)
            for (int c = 0; c < 2; ++c, ++q) {
                taps[i].idx[q] = ys[j] * lw + xs[c];
                taps[i].w[q] = wy[j] * wx[c];
            }
    }
    return taps;
}

}  // namespace

ad::NodeId build_feature_rows(ad::Tape& tape, ad::NodeId image, int levels,
                              const std::vector<std::array<int, 2>>& pixels) {
    const ad::Tensor& img = tape.val(image);
    if (img.rank() != 3 || img.shape[2] != 3)
        throw std::invalid_argument("facesculpt: feature extraction expects an [H,W,3] image");
    if (levels < 1) throw std::invalid_argument("facesculpt: need at least one pyramid level");
    if (pixels.empty()) throw std::invalid_argument("facesculpt: empty pixel sample");

    static const std::vector<double> kBlur1 = gaussian_kernel(1.0);
    static const std::vector<double> kBlur2 = gaussian_kernel(2.0);

    ad::NodeId level_img = image;
    ad::NodeId rows = -1;
    for (int level = 0; level < levels; ++level) {
        if (level > 0) level_img = tape.downsample2x(level_img);
        const int lh = tape.val(level_img).shape[0];
        const int lw = tape.val(level_img).shape[1];
        const std::vector<ad::BilinearTap> taps = level_taps(pixels, level, lh, lw);

        const ad::NodeId blur1 = tape.conv1d_v(tape.conv1d_h(level_img, kBlur1), kBlur1);
        const ad::NodeId blur2 = tape.conv1d_v(tape.conv1d_h(level_img, kBlur2), kBlur2);
        const ad::NodeId lum = tape.luminance(level_img);
        const ad::NodeId grads[4] = {
            tape.shift_diff(lum, 0, 1, 0.5),   // horizontal
            tape.shift_diff(lum, 1, 0, 0.5),   // vertical
            tape.shift_diff(lum, 1, 1, 0.5),   // diagonal
            tape.shift_diff(lum, 1, -1, 0.5),  // anti-diagonal
        };

        ad::NodeId level_rows = tape.gather_bilinear(level_img, taps);
        level_rows = tape.concat_cols(level_rows, tape.gather_bilinear(blur1, taps));
        level_rows = tape.concat_cols(level_rows, tape.gather_bilinear(blur2, taps));
        for (const ad::NodeId g : grads)
            level_rows = tape.concat_cols(level_rows, tape.gather_bilinear(g, taps));

        rows = (rows < 0) ? level_rows : tape.concat_cols(rows, level_rows);
    }
    return rows;
}

FeatureStack extract_hypercolumns(const ad::Tensor& image, const ExtractorSpec& spec, Rng& rng) {
    if (spec.mode == ExtractorSpec::Mode::kExternal) return load_feature_stack(spec.external_path);
    if (spec.k_max < 64) throw std::invalid_argument("facesculpt: sample budget must be at least 64");
    if (image.rank() != 3 || image.shape[2] != 3)
        throw std::invalid_argument("facesculpt: feature extraction expects an [H,W,3] image");

    const int h = image.shape[0], w = image.shape[1];
    const std::vector<std::array<int, 2>> pixels = sample_pixels(h, w, spec.k_max, rng);

    ad::Tape tape;
    const ad::NodeId img = tape.constant(image);
    const ad::NodeId rows = build_feature_rows(tape, img, spec.levels, pixels);
    const ad::Tensor& rv = tape.val(rows);

    FeatureStack stack;
    stack.k = rv.rows();
    stack.d = rv.cols();
    stack.image_h = h;
    stack.image_w = w;
    stack.vectors = rv.v;
    stack.pixel_coords.reserve(pixels.size());
    for (const auto& p : pixels)
        stack.pixel_coords.push_back({static_cast<double>(p[0]), static_cast<double>(p[1])});
    return stack;
}

void save_feature_stack(const FeatureStack& stack, const std::string& json_path) {
    BlobWriter writer;
    writer.add("vectors", {stack.k, stack.d}, stack.vectors);
    nlohmann::json meta;
    meta["k"] = stack.k;
    meta["d"] = stack.d;
    meta["image_h"] = stack.image_h;
    meta["image_w"] = stack.image_w;
    nlohmann::json coords = nlohmann::json::array();
    for (const auto& p : stack.pixel_coords) coords.push_back({p[0], p[1]});
    meta["pixel_coords"] = std::move(coords);
    writer.set_meta(meta.dump());
    std::string bin = json_path;
    const auto dot = bin.rfind('.');
    bin = (dot == std::string::npos ? bin : bin.substr(0, dot)) + ".bin";
    writer.write(json_path, bin);
}

FeatureStack load_feature_stack(const std::string& json_path) {
    BlobReader reader(json_path);
    if (!reader.has("vectors"))
        throw std::runtime_error("facesculpt: feature file lacks a \"vectors\" array: " + json_path);
    const nlohmann::json meta = nlohmann::json::parse(reader.meta_text());
    FeatureStack stack;
    const std::vector<int> shape = reader.shape("vectors");
    if (shape.size() != 2)
        throw std::runtime_error("facesculpt: feature vectors must be a k x d matrix: " + json_path);
    stack.k = shape[0];
    stack.d = shape[1];
    stack.image_h = meta.value("image_h", 0);
    stack.image_w = meta.value("image_w", 0);
    stack.vectors = reader.array("vectors");
    if (meta.contains("pixel_coords"))
        for (const auto& p : meta["pixel_coords"])
            stack.pixel_coords.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    if (stack.k != static_cast<int>(stack.pixel_coords.size()) && !stack.pixel_coords.empty())
        throw std::runtime_error("facesculpt: feature file pixel coordinate count mismatch: " + json_path);
    if (stack.k < 1 || stack.d < 1)
        throw std::runtime_error("facesculpt: feature file with empty stack: " + json_path);
    return stack;
}

}  // namespace facesculpt::features
