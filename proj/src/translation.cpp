#include "facesculpt/translation.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <utility>

#include <json.hpp>

namespace facesculpt::translate {

namespace {

[[noreturn]] void fail(const std::string& msg) {
    throw std::invalid_argument("translation: " + msg);
}

void require(bool ok, const std::string& msg) {
    if (!ok) fail(msg);
}

// Seed offsets keep the three training stages on independent streams even
// when they share one configured seed.
constexpr std::uint64_t kSeedAutoencoder = 0;
constexpr std::uint64_t kSeedClassifier = 1;
constexpr std::uint64_t kSeedTranslation = 2;

std::string layer_tag(int layer) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "L%02d", layer);
    return buf;
}

void validate_labels(const std::vector<int>& labels, int num_classes, std::size_t n) {
    require(labels.size() == n, "label count does not match dataset size");
    for (int lb : labels)
        require(lb >= 0 && lb < num_classes, "class label out of range");
}

// Gathers one shuffled minibatch of coefficient rows.
ad::Tensor gather_batch(const std::vector<CoeffVector>& data, const std::vector<int>& order,
                        int first, int count) {
    ad::Tensor out({count, kPcaComponents});
    for (int i = 0; i < count; ++i) {
        const CoeffVector& c = data[order[first + i]];
        for (int j = 0; j < kPcaComponents; ++j) out.at(i, j) = c[j];
    }
    return out;
}

ad::Tensor draw_normal(Rng& rng, int rows, int cols) {
    ad::Tensor out({rows, cols});
    for (double& x : out.v) x = rng.normal();
    return out;
}

// Everything the translation stage computes on one batch pair. The graph is
// built once per step; `train_g` controls whether eyc/eys/gy receive
// gradients (the realistic autoencoder and the classifier never do here).
struct Stage2Graph {
    ad::NodeId recon_y;
    ad::NodeId recon_c;
    ad::NodeId kl;
    ad::NodeId recon_s;
    ad::NodeId adv_g;
    ad::NodeId cls;
    ad::NodeId total;
};

Stage2Graph build_stage2(ad::Tape& tape, TranslationModel& m, const ad::Tensor& batch_x,
                         const ad::Tensor& batch_y, const std::vector<int>& labels,
                         const ad::Tensor& xi, const TrainConfig& cfg, bool train_g) {
    const int b = batch_x.rows();
    require(batch_y.rows() == b, "domain batches must have equal row counts");
    require(xi.rank() == 2 && xi.rows() == b && xi.cols() == m.arch().style_dim,
            "style draw has wrong shape");

    const ad::NodeId x = tape.constant(batch_x);
    const ad::NodeId y = tape.constant(batch_y);

    const ad::NodeId cx = m.ex_forward(tape, x, false);  // frozen content encoder
    const ad::NodeId cy = m.eyc_forward(tape, y, train_g);
    const auto [mu, logvar] = m.eys_forward(tape, y, train_g);

    // Reparameterized style draw s = mu + exp(logvar / 2) * xi.
    const ad::NodeId sigma = tape.exp_op(tape.scale(logvar, 0.5));
    const ad::NodeId s = tape.add(mu, tape.mul(sigma, tape.constant(xi)));

    Stage2Graph g;
    const ad::NodeId recon = m.gy_forward(tape, cy, s, train_g);
    g.recon_y = tape.l1_loss(recon, y);

    // Mean over the batch of 0.5 * sum(mu^2 + sigma^2 - logvar - 1).
    const ad::NodeId kl_terms = tape.add_scalar(
        tape.sub(tape.add(tape.square(mu), tape.exp_op(logvar)), logvar), -1.0);
    g.kl = tape.scale(tape.sum(kl_terms), 0.5 / static_cast<double>(b));

    const ad::NodeId fake = m.gy_forward(tape, cx, s, train_g);
    g.adv_g = tape.mean(tape.softplus(tape.scale(m.dy_forward(tape, fake, false), -1.0)));
    g.cls = tape.softmax_ce(m.cl_forward(tape, fake, false), labels);
    g.recon_c = tape.sqdist_rowmean(m.eyc_forward(tape, fake, train_g), cx);

    // The style round trip targets the drawn code as a fixed value, so its
    // gradient flows through the generated sample only.
    const ad::NodeId s_target = tape.constant(tape.val(s));
    const auto [mu_fake, logvar_fake] = m.eys_forward(tape, fake, train_g);
    (void)logvar_fake;
    g.recon_s = tape.sqdist_rowmean(mu_fake, s_target);

    ad::NodeId total = tape.scale(g.recon_y, cfg.lambda_recon_y);
    total = tape.add(total, tape.scale(g.recon_c, cfg.lambda_recon_c));
    total = tape.add(total, tape.scale(g.kl, cfg.lambda_kl));
    total = tape.add(total, tape.scale(g.recon_s, cfg.lambda_recon_s));
    total = tape.add(total, tape.scale(g.adv_g, cfg.lambda_adv));
    total = tape.add(total, tape.scale(g.cls, cfg.lambda_class));
    g.total = total;
    return g;
}

// Non-saturating discriminator loss on one batch pair; only dy is trainable.
ad::NodeId build_disc_loss(ad::Tape& tape, TranslationModel& m, const ad::Tensor& batch_x,
                           const ad::Tensor& batch_y, const ad::Tensor& xi, bool train_d) {
    const ad::NodeId x = tape.constant(batch_x);
    const ad::NodeId y = tape.constant(batch_y);
    const ad::NodeId cx = m.ex_forward(tape, x, false);
    const auto [mu, logvar] = m.eys_forward(tape, y, false);
    const ad::NodeId sigma = tape.exp_op(tape.scale(logvar, 0.5));
    const ad::NodeId s = tape.add(mu, tape.mul(sigma, tape.constant(xi)));
    const ad::NodeId fake = m.gy_forward(tape, cx, s, false);

    const ad::NodeId d_real = m.dy_forward(tape, y, train_d);
    const ad::NodeId d_fake = m.dy_forward(tape, fake, train_d);
    // -E[log sigmoid(d_real)] - E[log(1 - sigmoid(d_fake))], written with
    // softplus for overflow safety.
    return tape.add(tape.mean(tape.softplus(tape.scale(d_real, -1.0))),
                    tape.mean(tape.softplus(d_fake)));
}

}  // namespace

std::string MlpSpec::weight_name(int layer) const {
    return prefix + "." + layer_tag(layer) + ".w";
}

std::string MlpSpec::bias_name(int layer) const {
    return prefix + "." + layer_tag(layer) + ".b";
}

void TranslationModel::build_specs() {
    const int c = arch_.content_dim;
    const int s = arch_.style_dim;
    const int h = arch_.hidden;

    auto stack = [h](std::string prefix, int in, int out, int layers) {
        MlpSpec spec;
        spec.prefix = std::move(prefix);
        spec.dims.push_back(in);
        for (int i = 0; i < layers - 1; ++i) spec.dims.push_back(h);
        spec.dims.push_back(out);
        return spec;
    };

    ex_ = stack("ex", c, c, 8);
    gx_ = stack("gx", c, c, 8);
    eyc_ = stack("eyc", c, c, 8);
    eys_ = stack("eys", c, 2 * s, 16);  // style mean and log-variance halves
    gy_ = stack("gy", c + s, c, 8);
    dy_ = stack("dy", c, 1, 4);
    cl_ = stack("cl", c, arch_.num_classes, 4);
}

TranslationModel TranslationModel::create(const NetArch& arch, std::uint64_t seed) {
    require(arch.content_dim > 0 && arch.style_dim > 0 && arch.hidden > 0 &&
                arch.num_classes > 0,
            "network dimensions must be positive");
    TranslationModel m;
    m.arch_ = arch;
    m.build_specs();

    Rng rng(seed);
    for (const MlpSpec* spec : {&m.ex_, &m.gx_, &m.eyc_, &m.eys_, &m.gy_, &m.dy_, &m.cl_}) {
        for (int l = 0; l < spec->layers(); ++l) {
            const int in = spec->dims[l];
            const int out = spec->dims[l + 1];
            ad::Tensor w({out, in});
            // He initialization for the ReLU stack; the final affine layer
            // starts near zero so initial outputs (logits, log-variances,
            // reconstructions) are tame regardless of the input scale.
            double stddev = std::sqrt(2.0 / static_cast<double>(in));
            if (l + 1 == spec->layers()) stddev *= 0.01;
            for (double& x : w.v) x = rng.normal() * stddev;
            m.params_.add(spec->weight_name(l), std::move(w));
            m.params_.add(spec->bias_name(l), ad::Tensor({out}));
        }
    }
    return m;
}

std::vector<std::string> TranslationModel::net_params(const std::string& prefix) const {
    const MlpSpec* spec = nullptr;
    for (const MlpSpec* s : {&ex_, &gx_, &eyc_, &eys_, &gy_, &dy_, &cl_})
        if (s->prefix == prefix) spec = s;
    require(spec != nullptr, "unknown network prefix '" + prefix + "'");
    std::vector<std::string> names;
    for (int l = 0; l < spec->layers(); ++l) {
        names.push_back(spec->weight_name(l));
        names.push_back(spec->bias_name(l));
    }
    return names;
}

ad::NodeId TranslationModel::mlp_forward(ad::Tape& tape, const MlpSpec& spec, ad::NodeId x,
                                         bool trainable) {
    require(tape.val(x).rank() == 2 && tape.val(x).cols() == spec.dims.front(),
            spec.prefix + " input has wrong shape");
    ad::NodeId h = x;
    for (int l = 0; l < spec.layers(); ++l) {
        const ad::NodeId w = tape.param(params_, spec.weight_name(l), trainable);
        const ad::NodeId b = tape.param(params_, spec.bias_name(l), trainable);
        h = tape.affine(h, w, b);
        if (l + 1 < spec.layers()) h = tape.relu(h);
    }
    return h;
}

ad::NodeId TranslationModel::ex_forward(ad::Tape& tape, ad::NodeId x, bool trainable) {
    return mlp_forward(tape, ex_, x, trainable);
}

ad::NodeId TranslationModel::gx_forward(ad::Tape& tape, ad::NodeId c, bool trainable) {
    return mlp_forward(tape, gx_, c, trainable);
}

ad::NodeId TranslationModel::eyc_forward(ad::Tape& tape, ad::NodeId y, bool trainable) {
    return mlp_forward(tape, eyc_, y, trainable);
}

std::pair<ad::NodeId, ad::NodeId> TranslationModel::eys_forward(ad::Tape& tape, ad::NodeId y,
                                                                bool trainable) {
    const ad::NodeId out = mlp_forward(tape, eys_, y, trainable);
    const int s = arch_.style_dim;
    return {tape.slice_cols(out, 0, s), tape.slice_cols(out, s, 2 * s)};
}

ad::NodeId TranslationModel::gy_forward(ad::Tape& tape, ad::NodeId content, ad::NodeId style,
                                        bool trainable) {
    return mlp_forward(tape, gy_, tape.concat_cols(content, style), trainable);
}

ad::NodeId TranslationModel::dy_forward(ad::Tape& tape, ad::NodeId y, bool trainable) {
    return mlp_forward(tape, dy_, y, trainable);
}

ad::NodeId TranslationModel::cl_forward(ad::Tape& tape, ad::NodeId y, bool trainable) {
    return mlp_forward(tape, cl_, y, trainable);
}

ad::Tensor TranslationModel::encode_content_x(const ad::Tensor& batch_x) {
    ad::Tape tape;
    return tape.val(ex_forward(tape, tape.constant(batch_x), false));
}

ad::Tensor TranslationModel::encode_content_y(const ad::Tensor& batch_y) {
    ad::Tape tape;
    return tape.val(eyc_forward(tape, tape.constant(batch_y), false));
}

ad::Tensor TranslationModel::encode_style_mean(const ad::Tensor& batch_y) {
    ad::Tape tape;
    return tape.val(eys_forward(tape, tape.constant(batch_y), false).first);
}

ad::Tensor TranslationModel::decode_y(const ad::Tensor& content, const ad::Tensor& style) {
    ad::Tape tape;
    return tape.val(
        gy_forward(tape, tape.constant(content), tape.constant(style), false));
}

void TranslationModel::save(const std::string& json_path) const {
    nlohmann::json meta;
    meta["kind"] = "translation_model";
    meta["arch"] = {{"content_dim", arch_.content_dim},
                    {"style_dim", arch_.style_dim},
                    {"hidden", arch_.hidden},
                    {"num_classes", arch_.num_classes}};
    meta["layers"] = {{"ex", ex_.layers()},   {"gx", gx_.layers()}, {"eyc", eyc_.layers()},
                      {"eys", eys_.layers()}, {"gy", gy_.layers()}, {"dy", dy_.layers()},
                      {"cl", cl_.layers()}};
    meta["frozen_after_stage1"] = {"ex", "gx", "cl"};
    params_.save_checkpoint(json_path, meta.dump());
}

TranslationModel TranslationModel::load(const std::string& json_path) {
    const nlohmann::json meta = nlohmann::json::parse(ParamStore::checkpoint_meta(json_path));
    require(meta.value("kind", "") == std::string("translation_model"),
            "checkpoint is not a translation model");
    NetArch arch;
    arch.content_dim = meta.at("arch").at("content_dim").get<int>();
    arch.style_dim = meta.at("arch").at("style_dim").get<int>();
    arch.hidden = meta.at("arch").at("hidden").get<int>();
    arch.num_classes = meta.at("arch").at("num_classes").get<int>();
    TranslationModel m = create(arch, 0);
    m.params_.load_checkpoint(json_path);
    return m;
}

ad::Tensor coeff_batch(const std::vector<CoeffVector>& coeffs) {
    require(!coeffs.empty(), "empty coefficient batch");
    ad::Tensor out({static_cast<int>(coeffs.size()), kPcaComponents});
    for (std::size_t i = 0; i < coeffs.size(); ++i)
        for (int j = 0; j < kPcaComponents; ++j) out.at(static_cast<int>(i), j) = coeffs[i][j];
    return out;
}

std::vector<CoeffVector> batch_coeffs(const ad::Tensor& batch) {
    require(batch.rank() == 2 && batch.cols() == kPcaComponents,
            "coefficient batch must be [n, " + std::to_string(kPcaComponents) + "]");
    std::vector<CoeffVector> out(batch.rows());
    for (int i = 0; i < batch.rows(); ++i)
        for (int j = 0; j < kPcaComponents; ++j) out[i][j] = batch.at(i, j);
    return out;
}

double loss_recon_x(TranslationModel& model, const ad::Tensor& batch_x) {
    ad::Tape tape;
    const ad::NodeId x = tape.constant(batch_x);
    const ad::NodeId recon = model.gx_forward(tape, model.ex_forward(tape, x, false), false);
    return tape.val(tape.l1_loss(recon, x)).v[0];
}

double loss_recon_y(TranslationModel& model, const ad::Tensor& batch_y) {
    ad::Tape tape;
    const ad::NodeId y = tape.constant(batch_y);
    const ad::NodeId content = model.eyc_forward(tape, y, false);
    const ad::NodeId style = model.eys_forward(tape, y, false).first;
    const ad::NodeId recon = model.gy_forward(tape, content, style, false);
    return tape.val(tape.l1_loss(recon, y)).v[0];
}

std::pair<double, double> loss_adv(TranslationModel& model, const ad::Tensor& content,
                                   const ad::Tensor& style, const ad::Tensor& real_y) {
    ad::Tape tape;
    const ad::NodeId fake =
        model.gy_forward(tape, tape.constant(content), tape.constant(style), false);
    const ad::NodeId d_fake = model.dy_forward(tape, fake, false);
    const ad::NodeId d_real = model.dy_forward(tape, tape.constant(real_y), false);
    const double gen = tape.val(tape.mean(tape.softplus(tape.scale(d_fake, -1.0)))).v[0];
    const double disc = tape.val(tape.add(tape.mean(tape.softplus(tape.scale(d_real, -1.0))),
                                          tape.mean(tape.softplus(d_fake))))
                            .v[0];
    return {gen, disc};
}

double loss_class(TranslationModel& model, const ad::Tensor& generated,
                  const std::vector<int>& labels) {
    validate_labels(labels, model.arch().num_classes, static_cast<std::size_t>(generated.rows()));
    ad::Tape tape;
    const ad::NodeId logits = model.cl_forward(tape, tape.constant(generated), false);
    return tape.val(tape.softmax_ce(logits, labels)).v[0];
}

double loss_recon_c(TranslationModel& model, const ad::Tensor& generated,
                    const ad::Tensor& content) {
    ad::Tape tape;
    const ad::NodeId enc = model.eyc_forward(tape, tape.constant(generated), false);
    return tape.val(tape.sqdist_rowmean(enc, tape.constant(content))).v[0];
}

double loss_recon_s(TranslationModel& model, const ad::Tensor& generated,
                    const ad::Tensor& style) {
    ad::Tape tape;
    const ad::NodeId mu = model.eys_forward(tape, tape.constant(generated), false).first;
    return tape.val(tape.sqdist_rowmean(mu, tape.constant(style))).v[0];
}

double loss_kl(const ad::Tensor& mu, const ad::Tensor& logvar) {
    require(mu.rank() == 2 && mu.same_shape(logvar), "KL inputs must share a [b, s] shape");
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.v.size(); ++i) {
        const double m = mu.v[i];
        const double lv = logvar.v[i];
        acc += m * m + std::exp(lv) - lv - 1.0;
    }
    return 0.5 * acc / static_cast<double>(mu.rows());
}

Stage2Losses stage2_losses(TranslationModel& model, const ad::Tensor& batch_x,
                           const ad::Tensor& batch_y, const std::vector<int>& labels,
                           const ad::Tensor& xi, const TrainConfig& cfg) {
    validate_labels(labels, model.arch().num_classes, static_cast<std::size_t>(batch_y.rows()));
    ad::Tape tape;
    const Stage2Graph g = build_stage2(tape, model, batch_x, batch_y, labels, xi, cfg, false);
    Stage2Losses out;
    out.recon_y = tape.val(g.recon_y).v[0];
    out.recon_c = tape.val(g.recon_c).v[0];
    out.kl = tape.val(g.kl).v[0];
    out.recon_s = tape.val(g.recon_s).v[0];
    out.adv_g = tape.val(g.adv_g).v[0];
    out.cls = tape.val(g.cls).v[0];
    out.total = tape.val(g.total).v[0];
    ad::Tape dtape;
    out.adv_d = dtape.val(build_disc_loss(dtape, model, batch_x, batch_y, xi, false)).v[0];
    return out;
}

std::vector<EpochLog> train_autoencoder(TranslationModel& model,
                                        const std::vector<CoeffVector>& data_x,
                                        const TrainConfig& cfg) {
    require(!data_x.empty(), "autoencoder training set is empty");
    require(cfg.batch > 0 && cfg.epochs >= 0 && cfg.lr > 0.0, "bad training config");
    require(model.arch().content_dim == kPcaComponents,
            "model content dimension does not match coefficient vectors");
    const int n = static_cast<int>(data_x.size());
    require(n >= cfg.batch, "autoencoder training set smaller than one batch");

    const std::vector<std::string> ae_params = [&] {
        std::vector<std::string> names = model.net_params("ex");
        const std::vector<std::string> gx = model.net_params("gx");
        names.insert(names.end(), gx.begin(), gx.end());
        return names;
    }();
    const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};

    Rng rng(cfg.seed + kSeedAutoencoder);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    std::vector<EpochLog> log;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        const int batches = n / cfg.batch;
        double sum = 0.0;
        for (int b = 0; b < batches; ++b) {
            const ad::Tensor bx = gather_batch(data_x, order, b * cfg.batch, cfg.batch);
            model.params().zero_grads();
            ad::Tape tape(true);
            const ad::NodeId x = tape.constant(bx);
            const ad::NodeId recon =
                model.gx_forward(tape, model.ex_forward(tape, x, true), true);
            const ad::NodeId loss = tape.l1_loss(recon, x);
            tape.backward(loss);
            adam_step(model.params(), adam, ae_params);
            sum += tape.val(loss).v[0];
        }
        EpochLog e;
        e.recon_x = sum / static_cast<double>(batches);
        log.push_back(e);
    }
    return log;
}

std::vector<EpochLog> train_classifier(TranslationModel& model,
                                       const std::vector<CoeffVector>& data_y,
                                       const std::vector<int>& labels,
                                       const TrainConfig& cfg) {
    require(!data_y.empty(), "classifier training set is empty");
    require(cfg.batch > 0 && cfg.epochs >= 0 && cfg.lr > 0.0, "bad training config");
    require(model.arch().content_dim == kPcaComponents,
            "model content dimension does not match coefficient vectors");
    validate_labels(labels, model.arch().num_classes, data_y.size());
    const int n = static_cast<int>(data_y.size());
    require(n >= cfg.batch, "classifier training set smaller than one batch");

    const std::vector<std::string> cl_params = model.net_params("cl");
    const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};

    Rng rng(cfg.seed + kSeedClassifier);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    std::vector<EpochLog> log;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        const int batches = n / cfg.batch;
        double sum = 0.0;
        for (int b = 0; b < batches; ++b) {
            const ad::Tensor by = gather_batch(data_y, order, b * cfg.batch, cfg.batch);
            std::vector<int> lb(cfg.batch);
            for (int i = 0; i < cfg.batch; ++i) lb[i] = labels[order[b * cfg.batch + i]];
            model.params().zero_grads();
            ad::Tape tape(true);
            const ad::NodeId logits = model.cl_forward(tape, tape.constant(by), true);
            const ad::NodeId loss = tape.softmax_ce(logits, lb);
            tape.backward(loss);
            adam_step(model.params(), adam, cl_params);
            sum += tape.val(loss).v[0];
        }
        EpochLog e;
        e.cls = sum / static_cast<double>(batches);
        log.push_back(e);
    }
    return log;
}

std::vector<EpochLog> train_translation(TranslationModel& model,
                                        const std::vector<CoeffVector>& data_x,
                                        const std::vector<CoeffVector>& data_y,
                                        const std::vector<int>& labels,
                                        const TrainConfig& cfg) {
    require(!data_x.empty() && !data_y.empty(), "translation training set is empty");
    require(cfg.batch > 0 && cfg.epochs >= 0 && cfg.lr > 0.0, "bad training config");
    require(model.arch().content_dim == kPcaComponents,
            "model content dimension does not match coefficient vectors");
    validate_labels(labels, model.arch().num_classes, data_y.size());
    const int nx = static_cast<int>(data_x.size());
    const int ny = static_cast<int>(data_y.size());
    require(nx >= cfg.batch && ny >= cfg.batch,
            "translation training set smaller than one batch");

    const std::vector<std::string> gen_params = [&] {
        std::vector<std::string> names = model.net_params("eyc");
        for (const char* net : {"eys", "gy"}) {
            const std::vector<std::string> p = model.net_params(net);
            names.insert(names.end(), p.begin(), p.end());
        }
        return names;
    }();
    const std::vector<std::string> disc_params = model.net_params("dy");
    const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};

    Rng rng(cfg.seed + kSeedTranslation);
    std::vector<int> order_x(nx), order_y(ny);
    std::iota(order_x.begin(), order_x.end(), 0);
    std::iota(order_y.begin(), order_y.end(), 0);

    std::vector<EpochLog> log;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order_x);
        rng.shuffle(order_y);
        const int batches = std::min(nx, ny) / cfg.batch;
        EpochLog e;
        for (int b = 0; b < batches; ++b) {
            const ad::Tensor bx = gather_batch(data_x, order_x, b * cfg.batch, cfg.batch);
            const ad::Tensor by = gather_batch(data_y, order_y, b * cfg.batch, cfg.batch);
            std::vector<int> lb(cfg.batch);
            for (int i = 0; i < cfg.batch; ++i) lb[i] = labels[order_y[b * cfg.batch + i]];
            // One style draw per item per step, shared by both D and G passes.
            const ad::Tensor xi = draw_normal(rng, cfg.batch, model.arch().style_dim);

            // Discriminator step.
            model.params().zero_grads();
            {
                ad::Tape tape(true);
                const ad::NodeId d_loss = build_disc_loss(tape, model, bx, by, xi, true);
                tape.backward(d_loss);
                adam_step(model.params(), adam, disc_params);
                e.adv_d += tape.val(d_loss).v[0];
            }

            // Generator step.
            model.params().zero_grads();
            {
                ad::Tape tape(true);
                const Stage2Graph g =
                    build_stage2(tape, model, bx, by, lb, xi, cfg, true);
                tape.backward(g.total);
                adam_step(model.params(), adam, gen_params);
                e.recon_y += tape.val(g.recon_y).v[0];
                e.recon_c += tape.val(g.recon_c).v[0];
                e.kl += tape.val(g.kl).v[0];
                e.recon_s += tape.val(g.recon_s).v[0];
                e.adv_g += tape.val(g.adv_g).v[0];
                e.cls += tape.val(g.cls).v[0];
            }
        }
        const double inv = 1.0 / static_cast<double>(batches);
        e.recon_y *= inv;
        e.recon_c *= inv;
        e.kl *= inv;
        e.recon_s *= inv;
        e.adv_g *= inv;
        e.adv_d *= inv;
        e.cls *= inv;
        log.push_back(e);
    }
    return log;
}

LandmarkSet translate_landmarks(TranslationModel& model, const PcaModel& pca,
                                const LandmarkSet& lx_aligned, const LandmarkSet& ly_aligned,
                                double t) {
    require(model.arch().content_dim == kPcaComponents,
            "model content dimension does not match the PCA basis");
    require(t >= 0.0 && t <= 1.0, "interpolation weight must lie in [0, 1]");
    if (t == 0.0) return lx_aligned;

    const CoeffVector cx = project(pca, lx_aligned);
    const CoeffVector cy = project(pca, ly_aligned);

    ad::Tensor bx({1, kPcaComponents});
    ad::Tensor by({1, kPcaComponents});
    for (int j = 0; j < kPcaComponents; ++j) {
        bx.at(0, j) = cx[j];
        by.at(0, j) = cy[j];
    }

    ad::Tape tape;
    const ad::NodeId content = model.ex_forward(tape, tape.constant(bx), false);
    const ad::NodeId style = model.eys_forward(tape, tape.constant(by), false).first;
    const ad::Tensor out = tape.val(model.gy_forward(tape, content, style, false));

    CoeffVector cz;
    for (int j = 0; j < kPcaComponents; ++j) cz[j] = out.at(0, j);
    const LandmarkSet lz = reconstruct(pca, cz);
    return lerp_landmarks(lx_aligned, lz, t);
}

}  // namespace facesculpt::translate
