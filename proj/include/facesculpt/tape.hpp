#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "facesculpt/tensor.hpp"

namespace facesculpt {
class ParamStore;
}

namespace facesculpt::ad {

using NodeId = int;

// Precomputed bilinear footprint for texture/feature gathers: each sample
// touches up to four texels of a source grid.
struct BilinearTap {
    int idx[4];      // flat (row * width + col) indices into the source grid
    double w[4];     // convex weights, zeros for unused taps
};

// Reverse-mode autodiff tape. Operations append nodes eagerly (values are
// computed on the spot); backward() walks the node list in reverse and
// accumulates adjoints for every node that transitively depends on a
// differentiable leaf. Node handles are plain ints scoped to one tape.
class Tape {
public:
    explicit Tape(bool check_finite = false) : check_finite_(check_finite) {}

    // ---- leaves -----------------------------------------------------------
    NodeId input(Tensor value, bool requires_grad = false);
    NodeId constant(Tensor value) { return input(std::move(value), false); }
    NodeId scalar(double x) { return constant(Tensor::scalar(x)); }
    // Binds a named parameter from a store; after backward() its adjoint is
    // added into the store's gradient slot. trainable=false freezes it.
    NodeId param(ParamStore& store, const std::string& name, bool trainable = true);

    // ---- elementwise ------------------------------------------------------
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double c);
    NodeId add_scalar(NodeId a, double c);
    NodeId relu(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId softplus(NodeId a);  // log(1 + e^x), overflow-safe
    NodeId exp_op(NodeId a);
    NodeId square(NodeId a);

    // ---- linear algebra ---------------------------------------------------
    // y = x * W^T + 1 b^T for x:[B,in], W:[out,in], b:[out] -> [B,out]
    NodeId affine(NodeId x, NodeId w, NodeId b);
    // A:[m,k], B:[n,k] -> A * B^T : [m,n]
    NodeId matmul_nt(NodeId a, NodeId b);
    NodeId concat_cols(NodeId a, NodeId b);
    NodeId slice_cols(NodeId x, int c0, int c1);  // half-open [c0, c1)

    // ---- reductions / norms ----------------------------------------------
    NodeId sum(NodeId x);                  // scalar
    NodeId mean(NodeId x);                 // scalar
    NodeId colsum(NodeId x);               // [m,n] -> [1,n]
    // out_ij = x_ij / max(r_j, eps) for r:[1,n]; clamped columns get no
    // gradient through r.
    NodeId div_bcast_row(NodeId x, NodeId r, double eps);
    // Rows rescaled to unit L2 norm with an eps floor on the denominator.
    NodeId rownorm_normalize(NodeId x, double eps);
    NodeId reduce_min_rows(NodeId c);      // [m,n] -> [m], first argmin wins
    NodeId reduce_min_cols(NodeId c);      // [m,n] -> [n], first argmin wins
    NodeId max2(NodeId a, NodeId b);       // scalars; tie -> a

    // ---- losses -----------------------------------------------------------
    NodeId l1_loss(NodeId a, NodeId b);            // mean |a-b|, sign(0)=0
    NodeId sqdist_rowmean(NodeId a, NodeId b);     // mean_i ||a_i - b_i||^2
    NodeId cosine_sim(NodeId a, NodeId b, double eps);  // flat tensors -> scalar
    // Mean cross-entropy of row-softmax against integer labels.
    NodeId softmax_ce(NodeId logits, const std::vector<int>& labels);

    // ---- image ops ([H,W,C] row-major) -----------------------------------
    NodeId downsample2x(NodeId img);       // 2x2 block mean, edge blocks partial
    // Separable clamp-to-edge convolution along one axis with an odd kernel.
    NodeId conv1d_h(NodeId img, const std::vector<double>& kernel);
    NodeId conv1d_v(NodeId img, const std::vector<double>& kernel);
    NodeId luminance(NodeId img);          // channel mean -> [H,W,1]
    // out(p) = (in(p + d) - in(p - d)) * gain with clamped indexing, C=1.
    NodeId shift_diff(NodeId img, int dr, int dc, double gain);
    // Gathers k bilinear samples of a [h,w,C] grid into [k,C] rows. The taps
    // are fixed data (sample positions do not receive gradients).
    NodeId gather_bilinear(NodeId grid, std::vector<BilinearTap> taps);
    // Composites a texture through a per-pixel footprint into an RGB image.
    // Pixels with no footprint entry take the background color.
    NodeId texture_shade(NodeId tex, int out_h, int out_w,
                         std::vector<int> pixel_index, std::vector<BilinearTap> taps,
                         double background);

    // ---- access -----------------------------------------------------------
    const Tensor& val(NodeId id) const { return nodes_[id].value; }
    const Tensor& adj(NodeId id) const { return nodes_[id].adjoint; }
    bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
    std::size_t size() const { return nodes_.size(); }

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Adjoints of
    // bound parameters are accumulated into their store gradients.
    void backward(NodeId loss);

private:
    struct Node {
        Tensor value;
        Tensor adjoint;         // allocated lazily during backward
        bool requires_grad = false;
        std::function<void(Tape&)> back;  // empty for leaves
        ParamStore* store = nullptr;      // set for bound parameters
        std::string param_name;
    };

    NodeId push(Tensor value, bool requires_grad, std::function<void(Tape&)> back);
    Tensor& adjoint_slot(NodeId id);
    void check(NodeId id, const char* op) const;

    std::vector<Node> nodes_;
    bool check_finite_ = false;
};

}  // namespace facesculpt::ad
