#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "facesculpt/deform.hpp"
#include "facesculpt/features.hpp"
#include "facesculpt/kmeans.hpp"
#include "facesculpt/pca.hpp"
#include "facesculpt/raster.hpp"
#include "facesculpt/texture_opt.hpp"
#include "facesculpt/translation.hpp"

namespace facesculpt {

// One JSON document configuring the whole pipeline. The global seed is copied
// into every stage's seed on load, so a config plus seed pins every
// stochastic choice.
struct PipelineConfig {
    std::uint64_t seed = 0;

    // Input artifacts.
    std::string mesh_obj;
    std::string mesh_landmarks;     // landmark-vertex sidecar of mesh_obj
    std::string projection;         // camera JSON
    std::string content_texture;    // t_x PNG
    std::string style_image;        // style exemplar PNG
    std::string landmarks_x_dir;    // raw normal-face landmark CSVs
    std::string landmarks_y_dir;    // raw art landmark CSVs
    std::string exemplar;           // raw landmark CSV of the style exemplar
    std::string output_dir;

    int pca_components = kPcaComponents;
    int clusters = kDefaultStyleClasses;

    translate::TrainConfig train;
    deform::DeformConfig deform;
    double scale = 1.0;             // deformation scale t in [0, 1]
    style::StyleConfig style;
    int feature_levels = 3;         // hypercolumn pyramid depth
    std::string external_features;  // optional precomputed style-feature file
    render::RenderOptions render;
};

PipelineConfig load_config(const std::string& path);
void save_config(const PipelineConfig& cfg, const std::string& path);

// Returns one message per violation; empty means valid. With check_paths,
// every non-empty path field must exist on disk.
std::vector<std::string> validate_config(const PipelineConfig& cfg, bool check_paths);

// The ExtractorSpec implied by the config (external when external_features
// is set); seeds follow the global seed.
features::ExtractorSpec extractor_spec(const PipelineConfig& cfg);

}  // namespace facesculpt
