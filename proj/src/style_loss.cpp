#include "facesculpt/style_loss.hpp"

#include <stdexcept>

namespace facesculpt::style {

namespace {

void require_rows(const ad::Tape& tape, ad::NodeId rows, const char* what) {
    const ad::Tensor& t = tape.val(rows);
    if (t.rank() != 2 || t.rows() < 1 || t.cols() < 1)
        throw std::invalid_argument(std::string("facesculpt: ") + what +
                                    " expects a nonempty [k,d] feature matrix");
}

}  // namespace

ad::NodeId cosine_cost(ad::Tape& tape, ad::NodeId a_rows, ad::NodeId b_rows) {
    require_rows(tape, a_rows, "cosine_cost");
    require_rows(tape, b_rows, "cosine_cost");
    if (tape.val(a_rows).cols() != tape.val(b_rows).cols())
        throw std::invalid_argument("facesculpt: feature dimensions differ between stacks");
    const ad::NodeId an = tape.rownorm_normalize(a_rows, kCosineEps);
    const ad::NodeId bn = tape.rownorm_normalize(b_rows, kCosineEps);
    const ad::NodeId sim = tape.matmul_nt(an, bn);
    return tape.add_scalar(tape.scale(sim, -1.0), 1.0);
}

ad::NodeId remd_style_loss(ad::Tape& tape, ad::NodeId a_rows, ad::NodeId b_rows) {
    const ad::NodeId cost = cosine_cost(tape, a_rows, b_rows);
    const ad::NodeId row_mins = tape.mean(tape.reduce_min_rows(cost));
    const ad::NodeId col_mins = tape.mean(tape.reduce_min_cols(cost));
    return tape.max2(row_mins, col_mins);
}

ad::NodeId self_similarity_content_loss(ad::Tape& tape, ad::NodeId a_rows, ad::NodeId b_rows) {
    require_rows(tape, a_rows, "self_similarity_content_loss");
    require_rows(tape, b_rows, "self_similarity_content_loss");
    if (tape.val(a_rows).rows() != tape.val(b_rows).rows())
        throw std::invalid_argument("facesculpt: content loss requires matching sample counts");
    const ad::NodeId ca = cosine_cost(tape, a_rows, a_rows);
    const ad::NodeId cb = cosine_cost(tape, b_rows, b_rows);
    const ad::NodeId da = tape.div_bcast_row(ca, tape.colsum(ca), kCosineEps);
    const ad::NodeId db = tape.div_bcast_row(cb, tape.colsum(cb), kCosineEps);
    // l1_loss averages over all k^2 entries, which is exactly the 1/k^2 sum.
    return tape.l1_loss(da, db);
}

ad::NodeId texture_loss(ad::Tape& tape, ad::NodeId iz_rows, ad::NodeId ic_rows,
                        ad::NodeId y_rows, double beta) {
    if (beta < 0.0) throw std::invalid_argument("facesculpt: beta must be non-negative");
    const ad::NodeId style = remd_style_loss(tape, iz_rows, y_rows);
    const ad::NodeId content = self_similarity_content_loss(tape, iz_rows, ic_rows);
    return tape.add(style, tape.scale(content, beta));
}

namespace {

ad::NodeId stack_node(ad::Tape& tape, const features::FeatureStack& s) {
    return tape.constant(s.rows());
}

void require_same_pixels(const features::FeatureStack& a, const features::FeatureStack& b) {
    if (a.k != b.k)
        throw std::invalid_argument("facesculpt: content loss requires matching sample counts");
    if (a.pixel_coords != b.pixel_coords)
        throw std::invalid_argument("facesculpt: content loss requires identical sample pixels");
}

}  // namespace

std::vector<std::vector<double>> cosine_cost(const features::FeatureStack& a,
                                             const features::FeatureStack& b) {
    ad::Tape tape;
    const ad::NodeId c = cosine_cost(tape, stack_node(tape, a), stack_node(tape, b));
    const ad::Tensor& cv = tape.val(c);
    std::vector<std::vector<double>> out(cv.rows(), std::vector<double>(cv.cols()));
    for (int i = 0; i < cv.rows(); ++i)
        for (int j = 0; j < cv.cols(); ++j) out[i][j] = cv.at(i, j);
    return out;
}

double remd_style_loss(const features::FeatureStack& a, const features::FeatureStack& b) {
    ad::Tape tape;
    return tape.val(remd_style_loss(tape, stack_node(tape, a), stack_node(tape, b))).v[0];
}

double self_similarity_content_loss(const features::FeatureStack& a,
                                    const features::FeatureStack& b) {
    require_same_pixels(a, b);
    ad::Tape tape;
    return tape.val(self_similarity_content_loss(tape, stack_node(tape, a), stack_node(tape, b))).v[0];
}

double texture_loss(const features::FeatureStack& iz, const features::FeatureStack& ic,
                    const features::FeatureStack& y, double beta) {
    require_same_pixels(iz, ic);
    ad::Tape tape;
    return tape.val(texture_loss(tape, stack_node(tape, iz), stack_node(tape, ic),
                                 stack_node(tape, y), beta)).v[0];
}

}  // namespace facesculpt::style
