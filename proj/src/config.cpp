#include "facesculpt/config.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace facesculpt {

namespace {

using nlohmann::json;

json section(const json& j, const char* key) {
    return j.contains(key) ? j.at(key) : json::object();
}

}  // namespace

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("config: parse error in '" + path + "': " + e.what());
    }

    PipelineConfig cfg;
    cfg.seed = j.value("seed", cfg.seed);

    const json paths = section(j, "paths");
    cfg.mesh_obj = paths.value("mesh_obj", "");
    cfg.mesh_landmarks = paths.value("mesh_landmarks", "");
    cfg.projection = paths.value("projection", "");
    cfg.content_texture = paths.value("content_texture", "");
    cfg.style_image = paths.value("style_image", "");
    cfg.landmarks_x_dir = paths.value("landmarks_x_dir", "");
    cfg.landmarks_y_dir = paths.value("landmarks_y_dir", "");
    cfg.exemplar = paths.value("exemplar", "");
    cfg.output_dir = paths.value("output_dir", "");

    const json stats = section(j, "stats");
    cfg.pca_components = stats.value("pca_components", cfg.pca_components);
    cfg.clusters = stats.value("clusters", cfg.clusters);

    const json train = section(j, "train");
    cfg.train.lambda_recon_y = train.value("lambda_recon_y", cfg.train.lambda_recon_y);
    cfg.train.lambda_recon_c = train.value("lambda_recon_c", cfg.train.lambda_recon_c);
    cfg.train.lambda_kl = train.value("lambda_kl", cfg.train.lambda_kl);
    cfg.train.lambda_recon_s = train.value("lambda_recon_s", cfg.train.lambda_recon_s);
    cfg.train.lambda_adv = train.value("lambda_adv", cfg.train.lambda_adv);
    cfg.train.lambda_class = train.value("lambda_class", cfg.train.lambda_class);
    cfg.train.lr = train.value("lr", cfg.train.lr);
    cfg.train.batch = train.value("batch", cfg.train.batch);
    cfg.train.epochs = train.value("epochs", cfg.train.epochs);

    const json deform = section(j, "deform");
    cfg.deform.alpha = deform.value("alpha", cfg.deform.alpha);
    cfg.deform.lr = deform.value("lr", cfg.deform.lr);
    cfg.deform.iterations = deform.value("iterations", cfg.deform.iterations);
    cfg.deform.grad_tol = deform.value("grad_tol", cfg.deform.grad_tol);
    cfg.scale = deform.value("scale", cfg.scale);

    const json style = section(j, "style");
    cfg.style.beta = style.value("beta", cfg.style.beta);
    cfg.style.iterations = style.value("iterations", cfg.style.iterations);
    cfg.style.lr = style.value("lr", cfg.style.lr);
    cfg.style.k_max = style.value("k_max", cfg.style.k_max);
    cfg.style.azimuth_range = style.value("azimuth_range", cfg.style.azimuth_range);
    cfg.style.elevation_range = style.value("elevation_range", cfg.style.elevation_range);
    cfg.feature_levels = style.value("levels", cfg.feature_levels);
    cfg.external_features = style.value("external_features", "");

    const json render = section(j, "render");
    cfg.render.width = render.value("width", cfg.render.width);
    cfg.render.height = render.value("height", cfg.render.height);
    cfg.render.background = render.value("background", cfg.render.background);

    // One seed drives every stage.
    cfg.train.seed = cfg.seed;
    cfg.style.seed = cfg.seed;
    return cfg;
}

void save_config(const PipelineConfig& cfg, const std::string& path) {
    json j;
    j["seed"] = cfg.seed;
    j["paths"] = {{"mesh_obj", cfg.mesh_obj},
                  {"mesh_landmarks", cfg.mesh_landmarks},
                  {"projection", cfg.projection},
                  {"content_texture", cfg.content_texture},
                  {"style_image", cfg.style_image},
                  {"landmarks_x_dir", cfg.landmarks_x_dir},
                  {"landmarks_y_dir", cfg.landmarks_y_dir},
                  {"exemplar", cfg.exemplar},
                  {"output_dir", cfg.output_dir}};
    j["stats"] = {{"pca_components", cfg.pca_components}, {"clusters", cfg.clusters}};
    j["train"] = {{"lambda_recon_y", cfg.train.lambda_recon_y},
                  {"lambda_recon_c", cfg.train.lambda_recon_c},
                  {"lambda_kl", cfg.train.lambda_kl},
                  {"lambda_recon_s", cfg.train.lambda_recon_s},
                  {"lambda_adv", cfg.train.lambda_adv},
                  {"lambda_class", cfg.train.lambda_class},
                  {"lr", cfg.train.lr},
                  {"batch", cfg.train.batch},
                  {"epochs", cfg.train.epochs}};
    j["deform"] = {{"alpha", cfg.deform.alpha},
                   {"lr", cfg.deform.lr},
                   {"iterations", cfg.deform.iterations},
                   {"grad_tol", cfg.deform.grad_tol},
                   {"scale", cfg.scale}};
    j["style"] = {{"beta", cfg.style.beta},
                  {"iterations", cfg.style.iterations},
                  {"lr", cfg.style.lr},
                  {"k_max", cfg.style.k_max},
                  {"azimuth_range", cfg.style.azimuth_range},
                  {"elevation_range", cfg.style.elevation_range},
                  {"levels", cfg.feature_levels},
                  {"external_features", cfg.external_features}};
    j["render"] = {{"width", cfg.render.width},
                   {"height", cfg.render.height},
                   {"background", cfg.render.background}};

    std::ofstream out(path);
    if (!out) throw std::runtime_error("config: cannot write '" + path + "'");
    out << j.dump(2) << "\n";
}

std::vector<std::string> validate_config(const PipelineConfig& cfg, bool check_paths) {
    std::vector<std::string> problems;
    auto bad = [&problems](const std::string& msg) { problems.push_back(msg); };

    if (cfg.pca_components != kPcaComponents)
        bad("stats.pca_components must be " + std::to_string(kPcaComponents));
    if (cfg.clusters < 1) bad("stats.clusters must be >= 1");

    if (cfg.train.lambda_recon_y < 0 || cfg.train.lambda_recon_c < 0 ||
        cfg.train.lambda_kl < 0 || cfg.train.lambda_recon_s < 0 ||
        cfg.train.lambda_adv < 0 || cfg.train.lambda_class < 0)
        bad("train: loss weights must be >= 0");
    if (cfg.train.lr <= 0) bad("train.lr must be > 0");
    if (cfg.train.batch < 1) bad("train.batch must be >= 1");
    if (cfg.train.epochs < 0) bad("train.epochs must be >= 0");

    if (cfg.deform.alpha < 0) bad("deform.alpha must be >= 0");
    if (cfg.deform.lr <= 0) bad("deform.lr must be > 0");
    if (cfg.deform.iterations < 1) bad("deform.iterations must be >= 1");
    if (cfg.deform.grad_tol < 0) bad("deform.grad_tol must be >= 0");
    if (cfg.scale < 0 || cfg.scale > 1) bad("deform.scale must lie in [0, 1]");

    if (cfg.style.beta < 0) bad("style.beta must be >= 0");
    if (cfg.style.iterations < 1) bad("style.iterations must be >= 1");
    if (cfg.style.lr <= 0) bad("style.lr must be > 0");
    if (cfg.style.k_max < 64) bad("style.k_max must be >= 64");
    if (cfg.style.azimuth_range < 0 || cfg.style.elevation_range < 0)
        bad("style: view ranges must be >= 0");
    if (cfg.feature_levels < 1) bad("style.levels must be >= 1");

    if (cfg.render.width < 1 || cfg.render.height < 1)
        bad("render: viewport must be at least 1x1");
    if (cfg.render.background < 0 || cfg.render.background > 1)
        bad("render.background must lie in [0, 1]");

    if (check_paths) {
        auto check = [&bad](const std::string& field, const std::string& path) {
            if (!path.empty() && !std::filesystem::exists(path))
                bad("paths." + field + ": '" + path + "' does not exist");
        };
        check("mesh_obj", cfg.mesh_obj);
        check("mesh_landmarks", cfg.mesh_landmarks);
        check("projection", cfg.projection);
        check("content_texture", cfg.content_texture);
        check("style_image", cfg.style_image);
        check("landmarks_x_dir", cfg.landmarks_x_dir);
        check("landmarks_y_dir", cfg.landmarks_y_dir);
        check("exemplar", cfg.exemplar);
        check("external_features", cfg.external_features);
    }
    return problems;
}

features::ExtractorSpec extractor_spec(const PipelineConfig& cfg) {
    features::ExtractorSpec spec;
    if (!cfg.external_features.empty()) {
        spec.mode = features::ExtractorSpec::Mode::kExternal;
        spec.external_path = cfg.external_features;
    }
    spec.levels = cfg.feature_levels;
    spec.k_max = cfg.style.k_max;
    spec.seed = cfg.seed;
    return spec;
}

}  // namespace facesculpt
