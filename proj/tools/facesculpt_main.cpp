// facesculpt: exemplar-based 3D face stylization pipeline driver.
//
// Subcommands cover the full flow: corpus preparation and statistics, the
// landmark translation network, Laplacian-regularized mesh deformation, and
// multi-view texture stylization, plus asset generation and FID evaluation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "facesculpt/config.hpp"
#include "facesculpt/deform.hpp"
#include "facesculpt/features.hpp"
#include "facesculpt/fid.hpp"
#include "facesculpt/image.hpp"
#include "facesculpt/kmeans.hpp"
#include "facesculpt/landmarks.hpp"
#include "facesculpt/mesh.hpp"
#include "facesculpt/pca.hpp"
#include "facesculpt/raster.hpp"
#include "facesculpt/texture_opt.hpp"
#include "facesculpt/toyassets.hpp"
#include "facesculpt/translation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace facesculpt;

namespace {

// An error with an itemized breakdown (e.g. every config violation at once).
struct DetailedError : std::runtime_error {
    std::vector<std::string> details;
    DetailedError(const std::string& msg, std::vector<std::string> d)
        : std::runtime_error(msg), details(std::move(d)) {}
};

struct Options {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    double scale = 1.0;
    bool scale_set = false;
    double beta = 1.0;
    bool beta_set = false;
    std::string out;

    // make-assets
    int samples = 300;
};

PipelineConfig read_config(const Options& opt) {
    if (opt.config_path.empty())
        throw DetailedError("missing --config", {"this subcommand requires --config FILE"});
    PipelineConfig cfg = load_config(opt.config_path);
    if (opt.seed_set) {
        cfg.seed = opt.seed;
        cfg.train.seed = opt.seed;
        cfg.style.seed = opt.seed;
    }
    if (opt.scale_set) cfg.scale = opt.scale;
    if (opt.beta_set) cfg.style.beta = opt.beta;
    std::vector<std::string> problems = validate_config(cfg, true);
    if (!problems.empty())
        throw DetailedError("config validation failed", std::move(problems));
    if (cfg.output_dir.empty())
        throw DetailedError("config validation failed", {"paths.output_dir must be set"});
    fs::create_directories(cfg.output_dir);
    return cfg;
}

fs::path out_path(const PipelineConfig& cfg, const char* name) {
    return fs::path(cfg.output_dir) / name;
}

std::string padded_csv_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d.csv", i);
    return buf;
}

void require_artifact(const fs::path& p, const std::string& producer) {
    if (!fs::exists(p))
        throw std::runtime_error("missing artifact '" + p.string() + "' (run " + producer +
                                 " first)");
}

void ok(const std::string& command, json payload = json::object()) {
    payload["status"] = "ok";
    payload["command"] = command;
    std::cout << payload.dump() << "\n";
}

// ---- subcommand bodies ----------------------------------------------------

void run_make_assets(const Options& opt) {
    const fs::path dir = opt.out.empty() ? fs::path("assets") : fs::path(opt.out);
    const std::uint64_t seed = opt.seed_set ? opt.seed : 0;
    fs::create_directories(dir / "landmarks_x");
    fs::create_directories(dir / "landmarks_y");

    const mesh::TriMesh face = toy::make_face_mesh();
    mesh::save_obj(face, (dir / "mesh.obj").string(), (dir / "mesh_landmarks.txt").string());
    mesh::save_projection(toy::make_projection(), (dir / "projection.json").string());
    img::save_png(toy::make_content_texture(64, 64), (dir / "texture.png").string());
    img::save_png(toy::make_style_image(96, 96, seed + 1), (dir / "style.png").string());

    const std::vector<LandmarkSet> normal = toy::sample_normal_faces(opt.samples, seed + 2);
    const std::vector<LandmarkSet> art = toy::sample_art_faces(opt.samples, seed + 3);
    for (int i = 0; i < static_cast<int>(normal.size()); ++i)
        save_landmarks_csv(normal[i], (dir / "landmarks_x" / padded_csv_name(i)).string());
    for (int i = 0; i < static_cast<int>(art.size()); ++i)
        save_landmarks_csv(art[i], (dir / "landmarks_y" / padded_csv_name(i)).string());

    // A ready-to-run smoke configuration over these assets.
    PipelineConfig cfg;
    cfg.seed = seed;
    cfg.mesh_obj = (dir / "mesh.obj").string();
    cfg.mesh_landmarks = (dir / "mesh_landmarks.txt").string();
    cfg.projection = (dir / "projection.json").string();
    cfg.content_texture = (dir / "texture.png").string();
    cfg.style_image = (dir / "style.png").string();
    cfg.landmarks_x_dir = (dir / "landmarks_x").string();
    cfg.landmarks_y_dir = (dir / "landmarks_y").string();
    cfg.exemplar = (dir / "landmarks_y" / padded_csv_name(1)).string();
    cfg.output_dir = (dir / "out").string();
    cfg.clusters = 2;
    cfg.train.epochs = 10;
    // The default Laplacian weight suits dense production meshes; the coarse
    // 500-vertex toy face needs a much lighter one to deform visibly.
    cfg.deform.alpha = 10.0;
    cfg.deform.iterations = 800;
    cfg.style.iterations = 50;
    cfg.style.k_max = 256;
    cfg.scale = 0.5;
    save_config(cfg, (dir / "config.json").string());

    ok("make-assets", {{"dir", dir.string()},
                       {"samples_per_domain", opt.samples},
                       {"config", (dir / "config.json").string()}});
}

void run_prepare_landmarks(const PipelineConfig& cfg) {
    if (cfg.landmarks_x_dir.empty() || cfg.landmarks_y_dir.empty())
        throw std::runtime_error("config must set paths.landmarks_x_dir and landmarks_y_dir");
    const std::vector<LandmarkSet> raw_x = load_landmark_dir(cfg.landmarks_x_dir);
    const std::vector<LandmarkSet> raw_y = load_landmark_dir(cfg.landmarks_y_dir);
    if (raw_x.empty() || raw_y.empty())
        throw std::runtime_error("landmark directories must contain at least one CSV each");

    // Average face over the union of both domains; every set is aligned to it.
    std::vector<LandmarkSet> all = raw_x;
    all.insert(all.end(), raw_y.begin(), raw_y.end());
    const LandmarkSet avg = mean_landmarks(all);

    fs::create_directories(out_path(cfg, "aligned_x"));
    fs::create_directories(out_path(cfg, "aligned_y"));
    for (int i = 0; i < static_cast<int>(raw_x.size()); ++i)
        save_landmarks_csv(align_to_average(raw_x[i], avg).first,
                           (out_path(cfg, "aligned_x") / padded_csv_name(i)).string());
    for (int i = 0; i < static_cast<int>(raw_y.size()); ++i)
        save_landmarks_csv(align_to_average(raw_y[i], avg).first,
                           (out_path(cfg, "aligned_y") / padded_csv_name(i)).string());
    save_landmarks_csv(avg, out_path(cfg, "average.csv").string());

    ok("prepare-landmarks", {{"aligned_x", static_cast<int>(raw_x.size())},
                             {"aligned_y", static_cast<int>(raw_y.size())},
                             {"average", out_path(cfg, "average.csv").string()}});
}

void run_fit_stats(const PipelineConfig& cfg) {
    require_artifact(out_path(cfg, "aligned_x"), "prepare-landmarks");
    require_artifact(out_path(cfg, "aligned_y"), "prepare-landmarks");
    const std::vector<LandmarkSet> ax = load_landmark_dir(out_path(cfg, "aligned_x").string());
    const std::vector<LandmarkSet> ay = load_landmark_dir(out_path(cfg, "aligned_y").string());

    std::vector<LandmarkSet> all = ax;
    all.insert(all.end(), ay.begin(), ay.end());
    const PcaModel pca = fit_pca(all);
    save_pca(pca, out_path(cfg, "pca.json").string());

    const std::vector<CoeffVector> cy = project_all(pca, ay);
    const KMeansResult km = fit_kmeans(cy, cfg.clusters, cfg.seed);
    save_clusters(km.model, out_path(cfg, "clusters.json").string());

    std::ofstream labels(out_path(cfg, "labels_y.csv"));
    for (int lb : km.labels) labels << lb << "\n";

    ok("fit-stats", {{"samples", static_cast<int>(all.size())},
                     {"clusters", cfg.clusters},
                     {"kmeans_inertia", km.inertia},
                     {"kmeans_iterations", km.iterations},
                     {"pca", out_path(cfg, "pca.json").string()},
                     {"clusters_file", out_path(cfg, "clusters.json").string()}});
}

void append_train_log(std::ofstream& f, const char* stage,
                      const std::vector<translate::EpochLog>& log) {
    int epoch = 0;
    for (const translate::EpochLog& e : log) {
        f << stage << "," << epoch++ << "," << e.recon_x << "," << e.recon_y << ","
          << e.recon_c << "," << e.kl << "," << e.recon_s << "," << e.adv_g << ","
          << e.adv_d << "," << e.cls << "\n";
    }
}

void run_train(const PipelineConfig& cfg) {
    require_artifact(out_path(cfg, "pca.json"), "fit-stats");
    require_artifact(out_path(cfg, "clusters.json"), "fit-stats");
    const std::vector<LandmarkSet> ax = load_landmark_dir(out_path(cfg, "aligned_x").string());
    const std::vector<LandmarkSet> ay = load_landmark_dir(out_path(cfg, "aligned_y").string());
    const PcaModel pca = load_pca(out_path(cfg, "pca.json").string());
    const ClusterModel cm = load_clusters(out_path(cfg, "clusters.json").string());

    const std::vector<CoeffVector> cx = project_all(pca, ax);
    const std::vector<CoeffVector> cy = project_all(pca, ay);
    const std::vector<int> labels = assign_all(cm, cy);

    translate::NetArch arch;
    arch.num_classes = cm.k;
    translate::TranslationModel model = translate::TranslationModel::create(arch, cfg.seed);

    const std::vector<translate::EpochLog> log_cls =
        translate::train_classifier(model, cy, labels, cfg.train);
    const std::vector<translate::EpochLog> log_ae =
        translate::train_autoencoder(model, cx, cfg.train);
    const std::vector<translate::EpochLog> log_tr =
        translate::train_translation(model, cx, cy, labels, cfg.train);

    model.save(out_path(cfg, "model.json").string());
    std::ofstream log(out_path(cfg, "train_log.csv"));
    log << "stage,epoch,recon_x,recon_y,recon_c,kl,recon_s,adv_g,adv_d,class\n";
    append_train_log(log, "classifier", log_cls);
    append_train_log(log, "autoencoder", log_ae);
    append_train_log(log, "translation", log_tr);

    json payload = {{"model", out_path(cfg, "model.json").string()},
                    {"epochs", cfg.train.epochs}};
    if (!log_ae.empty()) payload["final_recon_x"] = log_ae.back().recon_x;
    if (!log_tr.empty()) payload["final_recon_y"] = log_tr.back().recon_y;
    ok("train", payload);
}

// Loads the input mesh and camera, projects its landmark vertices, and
// aligns them to the corpus average face.
struct AlignedInput {
    mesh::TriMesh face;
    mesh::Projection proj;
    LandmarkSet landmarks_px;
    LandmarkSet landmarks_aligned;
    AlignmentTransform to_average;
};

AlignedInput load_aligned_input(const PipelineConfig& cfg) {
    if (cfg.mesh_obj.empty() || cfg.mesh_landmarks.empty() || cfg.projection.empty())
        throw std::runtime_error(
            "config must set paths.mesh_obj, paths.mesh_landmarks, and paths.projection");
    require_artifact(out_path(cfg, "average.csv"), "prepare-landmarks");
    AlignedInput in;
    in.face = mesh::load_obj(cfg.mesh_obj, cfg.mesh_landmarks);
    in.proj = mesh::load_projection(cfg.projection);
    in.landmarks_px = mesh::project_landmarks(in.face, in.proj);
    const LandmarkSet avg = load_landmarks_csv(out_path(cfg, "average.csv").string());
    auto aligned = align_to_average(in.landmarks_px, avg);
    in.landmarks_aligned = aligned.first;
    in.to_average = aligned.second;
    return in;
}

void run_translate(const PipelineConfig& cfg, const std::string& out_override) {
    require_artifact(out_path(cfg, "model.json"), "train");
    require_artifact(out_path(cfg, "pca.json"), "fit-stats");
    if (cfg.exemplar.empty()) throw std::runtime_error("config must set paths.exemplar");

    const AlignedInput in = load_aligned_input(cfg);
    const LandmarkSet avg = load_landmarks_csv(out_path(cfg, "average.csv").string());
    const LandmarkSet exemplar = load_landmarks_csv(cfg.exemplar);
    const LandmarkSet exemplar_aligned = align_to_average(exemplar, avg).first;

    translate::TranslationModel model =
        translate::TranslationModel::load(out_path(cfg, "model.json").string());
    const PcaModel pca = load_pca(out_path(cfg, "pca.json").string());

    const LandmarkSet translated = translate::translate_landmarks(
        model, pca, in.landmarks_aligned, exemplar_aligned, cfg.scale);

    const std::string dest = out_override.empty()
                                 ? out_path(cfg, "landmarks_translated.csv").string()
                                 : out_override;
    save_landmarks_csv(translated, dest);
    ok("translate", {{"output", dest}, {"scale", cfg.scale}});
}

void run_deform(const PipelineConfig& cfg) {
    require_artifact(out_path(cfg, "landmarks_translated.csv"), "translate");
    AlignedInput in = load_aligned_input(cfg);
    const LandmarkSet translated =
        load_landmarks_csv(out_path(cfg, "landmarks_translated.csv").string());

    // Translated landmarks live in the aligned frame; deformation targets
    // must be in the camera's pixel frame.
    const LandmarkSet targets = in.to_average.inverse().apply(translated);

    const deform::DeformResult res = deform::deform(in.face, targets, in.proj, cfg.deform);
    in.face.vertices = res.vertices;
    mesh::save_obj(in.face, out_path(cfg, "mesh.obj").string(),
                   out_path(cfg, "mesh_landmarks.txt").string());
    deform::write_energy_csv(res.energy_trace, out_path(cfg, "deform_energy.csv").string());

    ok("deform", {{"mesh", out_path(cfg, "mesh.obj").string()},
                  {"iterations", res.iterations_run},
                  {"converged", res.converged},
                  {"energy_start", res.energy_trace.front()},
                  {"energy_end", res.final_energy}});
}

void run_stylize(const PipelineConfig& cfg) {
    require_artifact(out_path(cfg, "mesh.obj"), "deform");
    if (cfg.content_texture.empty())
        throw std::runtime_error("config must set paths.content_texture");
    const mesh::TriMesh face = mesh::load_obj(out_path(cfg, "mesh.obj").string(),
                                              out_path(cfg, "mesh_landmarks.txt").string());
    const mesh::Projection proj = mesh::load_projection(cfg.projection);
    const ad::Tensor t_x = img::load_png(cfg.content_texture);

    const features::ExtractorSpec spec = extractor_spec(cfg);
    features::FeatureStack style_stack;
    if (spec.mode == features::ExtractorSpec::Mode::kExternal) {
        Rng rng(cfg.seed);
        style_stack = features::extract_hypercolumns(ad::Tensor({1, 1, 3}), spec, rng);
    } else {
        if (cfg.style_image.empty())
            throw std::runtime_error("config must set paths.style_image");
        const ad::Tensor style_img = img::load_png(cfg.style_image);
        Rng rng(cfg.seed);
        style_stack = features::extract_hypercolumns(style_img, spec, rng);
    }

    const style::TextureOptResult res =
        style::optimize_texture(face, t_x, style_stack, proj, spec, cfg.style, cfg.render);
    img::save_png(res.texture, out_path(cfg, "texture.png").string());
    style::write_loss_csv(res.trace, out_path(cfg, "texture_loss.csv").string());

    json payload = {{"texture", out_path(cfg, "texture.png").string()},
                    {"iterations", static_cast<int>(res.trace.size())}};
    if (!res.trace.empty()) {
        payload["loss_first"] = res.trace.front().total;
        payload["loss_last"] = res.trace.back().total;
    }
    ok("stylize-texture", payload);
}

void run_render(const PipelineConfig& cfg, const std::string& out_override) {
    const bool have_deformed = fs::exists(out_path(cfg, "mesh.obj"));
    const mesh::TriMesh face =
        have_deformed ? mesh::load_obj(out_path(cfg, "mesh.obj").string(),
                                       out_path(cfg, "mesh_landmarks.txt").string())
                      : mesh::load_obj(cfg.mesh_obj, cfg.mesh_landmarks);
    const bool have_texture = fs::exists(out_path(cfg, "texture.png"));
    const ad::Tensor texture = img::load_png(
        have_texture ? out_path(cfg, "texture.png").string() : cfg.content_texture);
    mesh::Projection proj = mesh::load_projection(cfg.projection);

    const fs::path views_dir =
        out_override.empty() ? out_path(cfg, "views") : fs::path(out_override);
    fs::create_directories(views_dir);

    const std::pair<double, double> angles[] = {{0, 0},   {-30, 0}, {30, 0},
                                                {0, -20}, {0, 20},  {15, 10}};
    std::vector<std::string> written;
    int i = 0;
    for (const auto& [az, el] : angles) {
        proj.azimuth_deg = az;
        proj.elevation_deg = el;
        const render::RenderedView view = render::render(face, texture, proj, cfg.render);
        char name[24];
        std::snprintf(name, sizeof(name), "view_%02d.png", i++);
        img::save_png(view.image, (views_dir / name).string());
        written.push_back((views_dir / name).string());
    }
    ok("render", {{"views", written}});
}

void run_pipeline(const PipelineConfig& cfg) {
    run_translate(cfg, "");
    run_deform(cfg);
    run_stylize(cfg);
    run_render(cfg, "");
    ok("pipeline", {{"mesh", out_path(cfg, "mesh.obj").string()},
                    {"texture", out_path(cfg, "texture.png").string()},
                    {"views", out_path(cfg, "views").string()}});
}

void run_evaluate_fid(const PipelineConfig& cfg, const std::string& dir_a,
                      const std::string& dir_b) {
    require_artifact(out_path(cfg, "average.csv"), "prepare-landmarks");
    require_artifact(out_path(cfg, "pca.json"), "fit-stats");
    const LandmarkSet avg = load_landmarks_csv(out_path(cfg, "average.csv").string());
    const PcaModel pca = load_pca(out_path(cfg, "pca.json").string());

    auto coeffs_of = [&](const std::string& dir) {
        const std::vector<LandmarkSet> sets = load_landmark_dir(dir);
        std::vector<CoeffVector> coeffs;
        coeffs.reserve(sets.size());
        for (const LandmarkSet& ls : sets)
            coeffs.push_back(project(pca, align_to_average(ls, avg).first));
        return coeffs;
    };
    const double fid = compute_fid(coeffs_of(dir_a), coeffs_of(dir_b));
    std::printf("%.6f\n", fid);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"exemplar-based 3D face stylization pipeline"};
    app.require_subcommand(1);

    Options opt;
    std::string fid_dir_a, fid_dir_b;

    auto add_common = [&opt](CLI::App* sub, bool with_config = true) {
        if (with_config) sub->add_option("--config", opt.config_path, "pipeline config JSON");
        sub->add_option("--seed", opt.seed, "override the config seed")
            ->each([&opt](const std::string&) { opt.seed_set = true; });
        return sub;
    };

    CLI::App* c_assets = app.add_subcommand("make-assets", "generate the toy asset pack");
    add_common(c_assets, false);
    c_assets->add_option("--out", opt.out, "asset directory (default: assets)");
    c_assets->add_option("--samples", opt.samples, "landmark sets per domain")
        ->check(CLI::PositiveNumber);

    CLI::App* c_prepare =
        add_common(app.add_subcommand("prepare-landmarks", "align corpora to the average face"));
    CLI::App* c_stats =
        add_common(app.add_subcommand("fit-stats", "fit PCA basis and style clusters"));
    CLI::App* c_train =
        add_common(app.add_subcommand("train", "train the landmark translation network"));

    CLI::App* c_translate =
        add_common(app.add_subcommand("translate", "translate the input landmarks"));
    c_translate->add_option("--scale", opt.scale, "deformation scale t in [0,1]")
        ->each([&opt](const std::string&) { opt.scale_set = true; });
    c_translate->add_option("--out", opt.out, "override the output CSV path");

    CLI::App* c_deform =
        add_common(app.add_subcommand("deform", "deform the mesh to the translated landmarks"));
    c_deform->add_option("--scale", opt.scale, "unused here; accepted for symmetry")
        ->each([&opt](const std::string&) { opt.scale_set = true; });

    CLI::App* c_stylize =
        add_common(app.add_subcommand("stylize-texture", "optimize the stylized texture"));
    c_stylize->add_option("--beta", opt.beta, "content-loss weight")
        ->each([&opt](const std::string&) { opt.beta_set = true; });

    CLI::App* c_render =
        add_common(app.add_subcommand("render", "render a contact sheet of views"));
    c_render->add_option("--out", opt.out, "override the views directory");

    CLI::App* c_pipeline = add_common(
        app.add_subcommand("pipeline", "translate, deform, and stylize in one run"));
    c_pipeline->add_option("--scale", opt.scale, "deformation scale t in [0,1]")
        ->each([&opt](const std::string&) { opt.scale_set = true; });
    c_pipeline->add_option("--beta", opt.beta, "content-loss weight")
        ->each([&opt](const std::string&) { opt.beta_set = true; });

    CLI::App* c_fid =
        add_common(app.add_subcommand("evaluate-fid", "FID between two landmark directories"));
    c_fid->add_option("dir_a", fid_dir_a, "first landmark CSV directory")->required();
    c_fid->add_option("dir_b", fid_dir_b, "second landmark CSV directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    const CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    try {
        if (sub == c_assets) {
            run_make_assets(opt);
        } else if (sub == c_prepare) {
            run_prepare_landmarks(read_config(opt));
        } else if (sub == c_stats) {
            run_fit_stats(read_config(opt));
        } else if (sub == c_train) {
            run_train(read_config(opt));
        } else if (sub == c_translate) {
            run_translate(read_config(opt), opt.out);
        } else if (sub == c_deform) {
            run_deform(read_config(opt));
        } else if (sub == c_stylize) {
            run_stylize(read_config(opt));
        } else if (sub == c_render) {
            run_render(read_config(opt), opt.out);
        } else if (sub == c_pipeline) {
            run_pipeline(read_config(opt));
        } else if (sub == c_fid) {
            run_evaluate_fid(read_config(opt), fid_dir_a, fid_dir_b);
        }
    } catch (const DetailedError& e) {
        json err = {{"status", "error"}, {"command", name}, {"message", e.what()},
                    {"details", e.details}};
        std::cerr << err.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        json err = {{"status", "error"}, {"command", name}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
