#pragma once

#include <string>

#include "facesculpt/tensor.hpp"

namespace facesculpt::img {

// Reads an 8-bit PNG as an [H,W,3] tensor with linear values sample/255
// (stored bytes are taken as-is, no gamma transform). Gray, palette, and
// alpha variants are expanded/stripped to RGB.
ad::Tensor load_png(const std::string& path);

// Writes an [H,W,3] tensor as 8-bit RGB PNG; values are clamped to [0,1]
// and rounded to the nearest of the 256 levels.
void save_png(const ad::Tensor& image, const std::string& path);

}  // namespace facesculpt::img
