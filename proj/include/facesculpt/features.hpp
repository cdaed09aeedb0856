#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "facesculpt/rng.hpp"
#include "facesculpt/tape.hpp"
#include "facesculpt/tensor.hpp"

namespace facesculpt::features {

// Hypercolumns for a set of sampled pixels: one d-dimensional feature row
// per pixel, plus where each row was sampled from.
struct FeatureStack {
    int k = 0;
    int d = 0;
    int image_h = 0;
    int image_w = 0;
    std::vector<double> vectors;                   // k x d, row-major
    std::vector<std::array<double, 2>> pixel_coords;  // (row, col) per sample

    ad::Tensor rows() const;  // [k,d] tensor view of vectors
};

struct ExtractorSpec {
    enum class Mode { kBuiltin, kExternal };
    Mode mode = Mode::kBuiltin;
    std::string external_path;  // feature file for kExternal

    int levels = 3;      // pyramid depth (2x2 mean downsampling between levels)
    int k_max = 1024;    // sample budget; at least 64
    std::uint64_t seed = 0;
};

// Channels produced per pyramid level: identity RGB, two gaussian-blurred
// RGB copies (sigma 1 and 2), and four oriented central differences of the
// luminance (horizontal, vertical, both diagonals).
inline constexpr int kChannelsPerLevel = 13;

// Uniform pixel sample without replacement, k = min(h*w, budget), in draw
// order. Feeds both renders of an iteration so their rows correspond.
std::vector<std::array<int, 2>> sample_pixels(int h, int w, int budget, Rng& rng);

// Differentiable hypercolumn gather: builds the filter pyramid on the tape
// and returns a [k, d] node of features at the given full-resolution pixels.
// Coarser levels are read back through the same bilinear map that upsampling
// to image size would apply, so gathering here equals upsample-then-index.
ad::NodeId build_feature_rows(ad::Tape& tape, ad::NodeId image, int levels,
                              const std::vector<std::array<int, 2>>& pixels);

// Built-in extraction of a feature stack from an image (external mode loads
// the file instead and ignores the image and rng).
FeatureStack extract_hypercolumns(const ad::Tensor& image, const ExtractorSpec& spec, Rng& rng);

// Feature files: JSON manifest carrying k/d/image size/pixel coordinates,
// with the vectors in a little-endian float64 blob alongside.
void save_feature_stack(const FeatureStack& stack, const std::string& json_path);
FeatureStack load_feature_stack(const std::string& json_path);

// Normalized 1D gaussian taps with radius ceil(3*sigma).
std::vector<double> gaussian_kernel(double sigma);

}  // namespace facesculpt::features
