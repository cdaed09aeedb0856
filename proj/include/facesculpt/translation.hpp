#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "facesculpt/kmeans.hpp"
#include "facesculpt/landmarks.hpp"
#include "facesculpt/optim.hpp"
#include "facesculpt/pca.hpp"
#include "facesculpt/rng.hpp"
#include "facesculpt/tape.hpp"
#include "facesculpt/tensor.hpp"

namespace facesculpt::translate {

// Layer-count and width choices for the landmark translation networks. A
// "layer" is an affine map followed by ReLU, except the last layer of each
// network which is affine only.
struct NetArch {
    int content_dim = kPcaComponents;  // coefficient vectors in and out
    int style_dim = 8;
    int hidden = 128;
    int num_classes = kDefaultStyleClasses;
};

// One fully connected stack; dims has one entry per activation boundary, so
// dims.size() - 1 is the layer count.
struct MlpSpec {
    std::string prefix;
    std::vector<int> dims;

    int layers() const { return static_cast<int>(dims.size()) - 1; }
    std::string weight_name(int layer) const;
    std::string bias_name(int layer) const;
};

struct TrainConfig {
    double lambda_recon_y = 1.0;
    double lambda_recon_c = 0.5;
    double lambda_kl = 1.0;
    double lambda_recon_s = 1.0;
    double lambda_adv = 1.0;
    double lambda_class = 1.0;
    double lr = 5e-4;
    int batch = 68;
    int epochs = 800;
    std::uint64_t seed = 0;
};

// Per-epoch mean of every loss term that was optimized in that epoch. Terms
// not part of a stage stay zero (e.g. recon_x during translation training).
struct EpochLog {
    double recon_x = 0.0;
    double recon_y = 0.0;
    double recon_c = 0.0;
    double kl = 0.0;
    double recon_s = 0.0;
    double adv_g = 0.0;
    double adv_d = 0.0;
    double cls = 0.0;
};

// All loss terms of one translation step evaluated on one batch, plus the
// weighted total that the generator side optimizes.
struct Stage2Losses {
    double recon_y = 0.0;
    double recon_c = 0.0;
    double kl = 0.0;
    double recon_s = 0.0;
    double adv_g = 0.0;
    double cls = 0.0;
    double total = 0.0;
    double adv_d = 0.0;
};

// Content/style translation model over PCA coefficient vectors:
//   ex  encodes realistic coefficients to a content code,
//   gx  decodes a content code back to realistic coefficients,
//   eyc encodes artistic coefficients to a content code,
//   eys encodes artistic coefficients to a style mean and log-variance,
//   gy  decodes (content, style) to artistic coefficients,
//   dy  scores artistic coefficients with one real/fake logit,
//   cl  classifies artistic coefficients into geometry-style clusters.
class TranslationModel {
public:
    static TranslationModel create(const NetArch& arch, std::uint64_t seed);

    const NetArch& arch() const { return arch_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    // Names of every parameter belonging to one network, in layer order.
    std::vector<std::string> net_params(const std::string& prefix) const;

    // Tape-level forwards. `x` is a [batch, in] node; when `trainable` is
    // false the weights enter the tape as constants and receive no gradient.
    ad::NodeId ex_forward(ad::Tape& tape, ad::NodeId x, bool trainable);
    ad::NodeId gx_forward(ad::Tape& tape, ad::NodeId c, bool trainable);
    ad::NodeId eyc_forward(ad::Tape& tape, ad::NodeId y, bool trainable);
    // Returns (mean, logvar), each [batch, style_dim].
    std::pair<ad::NodeId, ad::NodeId> eys_forward(ad::Tape& tape, ad::NodeId y,
                                                  bool trainable);
    ad::NodeId gy_forward(ad::Tape& tape, ad::NodeId content, ad::NodeId style,
                          bool trainable);
    ad::NodeId dy_forward(ad::Tape& tape, ad::NodeId y, bool trainable);
    ad::NodeId cl_forward(ad::Tape& tape, ad::NodeId y, bool trainable);

    // Value-level conveniences over coefficient batches.
    ad::Tensor encode_content_x(const ad::Tensor& batch_x);
    ad::Tensor encode_content_y(const ad::Tensor& batch_y);
    // Style mean only (the deterministic inference path).
    ad::Tensor encode_style_mean(const ad::Tensor& batch_y);
    ad::Tensor decode_y(const ad::Tensor& content, const ad::Tensor& style);

    void save(const std::string& json_path) const;
    static TranslationModel load(const std::string& json_path);

    const MlpSpec& spec_ex() const { return ex_; }
    const MlpSpec& spec_gx() const { return gx_; }
    const MlpSpec& spec_eyc() const { return eyc_; }
    const MlpSpec& spec_eys() const { return eys_; }
    const MlpSpec& spec_gy() const { return gy_; }
    const MlpSpec& spec_dy() const { return dy_; }
    const MlpSpec& spec_cl() const { return cl_; }

private:
    TranslationModel() = default;
    void build_specs();
    ad::NodeId mlp_forward(ad::Tape& tape, const MlpSpec& spec, ad::NodeId x,
                           bool trainable);

    NetArch arch_;
    ParamStore params_;
    MlpSpec ex_, gx_, eyc_, eys_, gy_, dy_, cl_;
};

// Converts coefficient vectors to a [n, 32] batch tensor and back.
ad::Tensor coeff_batch(const std::vector<CoeffVector>& coeffs);
std::vector<CoeffVector> batch_coeffs(const ad::Tensor& batch);

// ---- standalone loss evaluations (each builds a private tape) -------------

// Mean absolute error of the realistic autoencoder round trip gx(ex(x)).
double loss_recon_x(TranslationModel& model, const ad::Tensor& batch_x);
// Mean absolute error of gy(eyc(y), eys(y).mean) against y.
double loss_recon_y(TranslationModel& model, const ad::Tensor& batch_y);
// Non-saturating GAN pair (generator, discriminator) for generated samples
// gy(content, style) against the real batch.
std::pair<double, double> loss_adv(TranslationModel& model, const ad::Tensor& content,
                                   const ad::Tensor& style, const ad::Tensor& real_y);
// Cross entropy of cl(generated) against target class labels.
double loss_class(TranslationModel& model, const ad::Tensor& generated,
                  const std::vector<int>& labels);
// Mean squared L2 distance between eyc(generated) and the source content.
double loss_recon_c(TranslationModel& model, const ad::Tensor& generated,
                    const ad::Tensor& content);
// Mean squared L2 distance between eys(generated).mean and the source style.
double loss_recon_s(TranslationModel& model, const ad::Tensor& generated,
                    const ad::Tensor& style);
// Mean over the batch of 0.5 * sum(mu^2 + exp(logvar) - logvar - 1).
double loss_kl(const ad::Tensor& mu, const ad::Tensor& logvar);

// Evaluates every translation-stage term on one batch pair without taking an
// optimizer step. `xi` is the [batch, style_dim] reparameterization draw; a
// zero tensor selects the deterministic style-mean path.
Stage2Losses stage2_losses(TranslationModel& model, const ad::Tensor& batch_x,
                           const ad::Tensor& batch_y, const std::vector<int>& labels,
                           const ad::Tensor& xi, const TrainConfig& cfg);

// ---- training stages ------------------------------------------------------

// Stage 1: trains ex/gx on the L1 reconstruction of realistic coefficients.
std::vector<EpochLog> train_autoencoder(TranslationModel& model,
                                        const std::vector<CoeffVector>& data_x,
                                        const TrainConfig& cfg);

// Pretrains the cluster classifier cl on labeled artistic coefficients.
std::vector<EpochLog> train_classifier(TranslationModel& model,
                                       const std::vector<CoeffVector>& data_y,
                                       const std::vector<int>& labels,
                                       const TrainConfig& cfg);

// Stage 2: trains eyc/eys/gy (and dy adversarially, alternating one
// discriminator step with one generator step per batch) while ex/gx/cl stay
// frozen. `labels` are the cluster ids of `data_y`.
std::vector<EpochLog> train_translation(TranslationModel& model,
                                        const std::vector<CoeffVector>& data_x,
                                        const std::vector<CoeffVector>& data_y,
                                        const std::vector<int>& labels,
                                        const TrainConfig& cfg);

// ---- inference ------------------------------------------------------------

// Full translation of one aligned landmark set toward the style of an aligned
// exemplar, interpolated by t in [0, 1]: t = 0 returns lx unchanged, t = 1 the
// fully translated landmarks.
LandmarkSet translate_landmarks(TranslationModel& model, const PcaModel& pca,
                                const LandmarkSet& lx_aligned,
                                const LandmarkSet& ly_aligned, double t);

}  // namespace facesculpt::translate
