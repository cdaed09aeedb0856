#include "facesculpt/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "facesculpt/optim.hpp"

namespace facesculpt::ad {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument("facesculpt: " + msg);
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

NodeId Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
}

Tensor& Tape::adjoint_slot(NodeId id) {
    Node& n = nodes_[id];
    if (n.adjoint.v.empty() && !n.value.v.empty()) n.adjoint = Tensor::zeros(n.value.shape);
    return n.adjoint;
}

void Tape::check(NodeId id, const char* op) const {
    if (check_finite_ && !nodes_[id].value.all_finite())
        throw std::runtime_error(std::string("facesculpt: non-finite values produced by ") + op);
}

NodeId Tape::input(Tensor value, bool requires_grad) {
    return push(std::move(value), requires_grad, {});
}

NodeId Tape::param(ParamStore& store, const std::string& name, bool trainable) {
    NodeId id = push(store.value(name), trainable, {});
    if (trainable) {
        nodes_[id].store = &store;
        nodes_[id].param_name = name;
    }
    return id;
}

// ---- elementwise -----------------------------------------------------------

NodeId Tape::add(NodeId a, NodeId b) {
    require(val(a).same_shape(val(b)), "add: shape mismatch " + val(a).shape_str() + " vs " + val(b).shape_str());
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += val(b).v[i];
    NodeId id = push(std::move(out), requires_grad(a) || requires_grad(b), {});
    nodes_[id].back = [a, b, id](Tape& t) {
        const Tensor& g = t.adj(id);
        if (t.requires_grad(a)) {
            Tensor& ga = t.adjoint_slot(a);
            for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i];
        }
        if (t.requires_grad(b)) {
            Tensor& gb = t.adjoint_slot(b);
            for (std::size_t i = 0; i < g.v.size(); ++i) gb.v[i] += g.v[i];
        }
    };
    check(id, "add");
    return id;
}

NodeId Tape::sub(NodeId a, NodeId b) {
    require(val(a).same_shape(val(b)), "sub: shape mismatch " + val(a).shape_str() + " vs " + val(b).shape_str());
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] -= val(b).v[i];
    NodeId id = push(std::move(out), requires_grad(a) || requires_grad(b), {});
    nodes_[id].back = [a, b, id](Tape& t) {
        const Tensor& g = t.adj(id);
        if (t.requires_grad(a)) {
            Tensor& ga = t.adjoint_slot(a);
            for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i];
        }
        if (t.requires_grad(b)) {
            Tensor& gb = t.adjoint_slot(b);
            for (std::size_t i = 0; i < g.v.size(); ++i) gb.v[i] -= g.v[i];
        }
    };
    check(id, "sub");
    return id;
}

NodeId Tape::mul(NodeId a, NodeId b) {
    require(val(a).same_shape(val(b)), "mul: shape mismatch " + val(a).shape_str() + " vs " + val(b).shape_str());
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= val(b).v[i];
    NodeId id = push(std::move(out), requires_grad(a) || requires_grad(b), {});
    nodes_[id].back = [a, b, id](Tape& t) {
        const Tensor& g = t.adj(id);
        if (t.requires_grad(a)) {
            Tensor& ga = t.adjoint_slot(a);
            const Tensor& vb = t.val(b);
            for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * vb.v[i];
        }
        if (t.requires_grad(b)) {
            Tensor& gb = t.adjoint_slot(b);
            const Tensor& va = t.val(a);
            for (std::size_t i = 0; i < g.v.size(); ++i) gb.v[i] += g.v[i] * va.v[i];
        }
    };
    check(id, "mul");
    return id;
}

NodeId Tape::scale(NodeId a, double c) {
    Tensor out = val(a);
    for (double& x : out.v) x *= c;
    NodeId id = push(std::move(out), requires_grad(a), {});
    nodes_[id].back = [a, c, id](Tape& t) {
        if (!t.requires_grad(a)) return;
        const Tensor& g = t.adj(id);
        Tensor& ga = t.adjoint_slot(a);
        for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += c * g.v[i];
    };
    check(id, "scale");
    return id;
}

NodeId Tape::add_scalar(NodeId a, double c) {
    Tensor out = val(a);
    for (double& x : out.v) x += c;
    NodeId id = push(std::move(out), requires_grad(a), {});
    nodes_[id].back = [a, id](Tape& t) {
        if (!t.requires_grad(a)) return;
        const Tensor& g = t.adj(id);
        Tensor& ga = t.adjoint_slot(a);
        for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i];
    };
    check(id, "add_scalar");
    return id;
}

NodeId Tape::relu(NodeId a) {
    Tensor out = val(a);
    for (double& x : out.v) x = std::max(x, 0.0);
    NodeId id = push(std::move(out), requires_grad(a), {});
    nodes_[id].back = [a, id](Tape& t) {
        if (!t.requires_grad(a)) return;
        const Tensor& g = t.adj(id);
        const Tensor& x = t.val(a);
        Tensor& ga = t.adjoint_slot(a);
        for (std::size_t i = 0; i < g.v.size(); ++i)
            if (x.v[i] > 0.0) ga.v[i] += g.v[i];
    };
    check(id, "relu");
    return id;
}

NodeId Tape::sigmoid(NodeId a) {
    Tensor out = val(a);
    for (double& x : out.v) x = stable_sigmoid(x);
    NodeId id = push(std::move(out), requires_grad(a), {});
    nodes_[id].back = [a, id](Tape& t) {
        if (!t.requires_grad(a)) return;
        const Tensor& g = t.adj(id);
        const Tensor& s = t.val(id);
        Tensor& ga = t.adjoint_slot(a);
        for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * s.v[i] * (1.0 - s.v[i]);
    };
    check(id, "sigmoid");
    return id;
}

NodeId Tape::softplus(NodeId a) {
    Tensor out = val(a);
    for (double& x : out.v) {
        if (x > 30.0) {
            // log(1+e^x) = x + log(1+e^-x) ~ x
            x = x + std::log1p(std::exp(-x));
        } else {
            x = std::log1p(std::exp(x));
        }
    }
    NodeId id = push(std::move(out), requires_grad(a), {});
    nodes_[id].back = [a, id](Tape& t) {
        if (!t.requires_grad(a)) return;
        const Tensor& g = t.adj(id);
        const Tensor& x = t.val(a);
        Tensor& ga = t.adjoint_slot(a);
        for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * stable_sigmoid(x.v[i]);
    };
    check(id, "softplus");
    return id;
}

NodeId Tape::exp_op(NodeId a) {
    Tensor out = val(a);
    for (double& x : out.v) x = std::exp(x);
    NodeId id = push(std::move(out), requires_grad(a), {});
    nodes_[id].back = [a, id](Tape& t) {
        if (!t.requires_grad(a)) return;
        const Tensor& g = t.adj(id);
        const Tensor& e = t.val(id);
        Tensor& ga = t.adjoint_slot(a);
        for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * e.v[i];
    };
    check(id, "exp");
    return id;
}

NodeId Tape::square(NodeId a) {
    Tensor out = val(a);
    for (double& x : out.v) x = x * x;
    NodeId id = push(std::move(out), requires_grad(a), {});
    nodes_[id].back = [a, id](Tape& t) {
        if (!t.requires_grad(a)) return;
        const Tensor& g = t.adj(id);
        const Tensor& x = t.val(a);
        Tensor& ga = t.adjoint_slot(a);
        for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += 2.0 * g.v[i] * x.v[i];
    };
    check(id, "square");
    return id;
}

// ---- linear algebra --------------------------------------------------------

NodeId Tape::affine(NodeId x, NodeId w, NodeId b) {
    const Tensor& xv = val(x);
    const Tensor& wv = val(w);
    const Tensor& bv = val(b);
    require(xv.rank() == 2 && wv.rank() == 2 && bv.rank() == 1,
            "affine: expected x rank 2, w rank 2, b rank 1");
    require(xv.cols() == wv.cols(),
            "affine: input width " + xv.shape_str() + " does not match weight " + wv.shape_str());
    require(bv.shape[0] == wv.rows(), "affine: bias length does not match weight rows");
    Tensor out({xv.rows(), wv.rows()});
    out.mat().noalias() = xv.mat() * wv.mat().transpose();
    ConstMatMap bias(bv.v.data(), 1, bv.shape[0]);
    out.mat().rowwise() += bias.row(0);
    NodeId id = push(std::move(out), requires_grad(x) || requires_grad(w) || requires_grad(b), {});
    nodes_[id].back = [x, w, b, id](Tape& t) {
        const Tensor& g = t.adj(id);
        if (t.requires_grad(x)) t.adjoint_slot(x).mat().noalias() += g.mat() * t.val(w).mat();
        if (t.requires_grad(w)) t.adjoint_slot(w).mat().noalias() += g.mat().transpose() * t.val(x).mat();
        if (t.requires_grad(b)) {
            Tensor& gb = t.adjoint_slot(b);
            MatMap(gb.v.data(), 1, gb.shape[0]).row(0) += g.mat().colwise().sum();
        }
    };
    check(id, "affine");
    return id;
}

NodeId Tape::matmul_nt(NodeId a, NodeId b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    require(av.rank() == 2 && bv.rank() == 2 && av.cols() == bv.cols(),
            "matmul_nt: incompatible shapes " + av.shape_str() + " vs " + bv.shape_str());
    Tensor out({av.rows(), bv.rows()});
    out.mat().noalias() = av.mat() * bv.mat().transpose();
    NodeId id = push(std::move(out), requires_grad(a) || requires_grad(b), {});
    nodes_[id].back = [a, b, id](Tape& t) {
        const Tensor& g = t.adj(id);
        if (t.requires_grad(a)) t.adjoint_slot(a).mat().noalias() += g.mat() * t.val(b).mat();
        if (t.requires_grad(b)) t.adjoint_slot(b).mat().noalias() += g.mat().transpose() * t.val(a).mat();
    };
    check(id, "matmul_nt");
    return id;
}

NodeId Tape::concat_cols(NodeId a, NodeId b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    require(av.rank() == 2 && bv.rank() == 2 && av.rows() == bv.rows(),
            "concat_cols: row mismatch " + av.shape_str() + " vs " + bv.shape_str());
    const int m = av.rows(), ca = av.cols(), cb = bv.cols();
    Tensor out({m, ca + cb});
    for (int r = 0; r < m; ++r) {
        std::copy_n(&av.v[static_cast<std::size_t>(r) * ca], ca, &out.v[static_cast<std::size_t>(r) * (ca + cb)]);
        std::copy_n(&bv.v[static_cast<std::size_t>(r) * cb], cb, &out.v[static_cast<std::size_t>(r) * (ca + cb) + ca]);
    }
    NodeId id = push(std::move(out), requires_grad(a) || requires_grad(b), {});
    nodes_[id].back = [a, b, id, m, ca, cb](Tape& t) {
        const Tensor& g = t.adj(id);
        if (t.requires_grad(a)) {
            Tensor& ga = t.adjoint_slot(a);
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < ca; ++c)
                    ga.v[static_cast<std::size_t>(r) * ca + c] += g.v[static_cast<std::size_t>(r) * (ca + cb) + c];
        }
        if (t.requires_grad(b)) {
            Tensor& gb = t.adjoint_slot(b);
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < cb; ++c)
                    gb.v[static_cast<std::size_t>(r) * cb + c] += g.v[static_cast<std::size_t>(r) * (ca + cb) + ca + c];
        }
    };
    check(id, "concat_cols");
    return id;
}

NodeId Tape::slice_cols(NodeId x, int c0, int c1) {
    const Tensor& xv = val(x);
    require(xv.rank() == 2 && 0 <= c0 && c0 < c1 && c1 <= xv.cols(),
            "slice_cols: bad range for shape " + xv.shape_str());
    const int m = xv.rows(), n = xv.cols(), w = c1 - c0;
    Tensor out({m, w});
    for (int r = 0; r < m; ++r)
        std::copy_n(&xv.v[static_cast<std::size_t>(r) * n + c0], w, &out.v[static_cast<std::size_t>(r) * w]);
    NodeId id = push(std::move(out), requires_grad(x), {});
    nodes_[id].back = [x, c0, id, m, n, w](Tape& t) {
        if (!t.requires_grad(x)) return;
        const Tensor& g = t.adj(id);
        Tensor& gx = t.adjoint_slot(x);
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < w; ++c)
                gx.v[static_cast<std::size_t>(r) * n + c0 + c] += g.v[static_cast<std::size_t>(r) * w + c];
    };
    check(id, "slice_cols");
    return id;
}

// ---- reductions / norms ----------------------------------------------------

NodeId Tape::sum(NodeId x) {
    double s = 0.0;
    for (double e : val(x).v) s += e;
    NodeId id = push(Tensor::scalar(s), requires_grad(x), {});
    nodes_[id].back = [x, id](Tape& t) {
        if (!t.requires_grad(x)) return;
        const double g = t.adj(id).v[0];
        Tensor& gx = t.adjoint_slot(x);
        for (double& e : gx.v) e += g;
    };
    check(id, "sum");
    return id;
}

NodeId Tape::mean(NodeId x) {
    require(!val(x).v.empty(), "mean: empty tensor");
    const double n = static_cast<double>(val(x).v.size());
    double s = 0.0;
    for (double e : val(x).v) s += e;
    NodeId id = push(Tensor::scalar(s / n), requires_grad(x), {});
    nodes_[id].back = [x, id, n](Tape& t) {
        if (!t.requires_grad(x)) return;
        const double g = t.adj(id).v[0] / n;
        Tensor& gx = t.adjoint_slot(x);
        for (double& e : gx.v) e += g;
    };
    check(id, "mean");
    return id;
}

NodeId Tape::colsum(NodeId x) {
    const Tensor& xv = val(x);
    require(xv.rank() == 2, "colsum: expected rank 2, got " + xv.shape_str());
    const int m = xv.rows(), n = xv.cols();
    Tensor out({1, n});
    MatMap(out.v.data(), 1, n).row(0) = xv.mat().colwise().sum();
    NodeId id = push(std::move(out), requires_grad(x), {});
    nodes_[id].back = [x, id, m, n](Tape& t) {
        if (!t.requires_grad(x)) return;
        const Tensor& g = t.adj(id);
        Tensor& gx = t.adjoint_slot(x);
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < n; ++c) gx.v[static_cast<std::size_t>(r) * n + c] += g.v[c];
    };
    check(id, "colsum");
    return id;
}

NodeId Tape::div_bcast_row(NodeId x, NodeId r, double eps) {
    const Tensor& xv = val(x);
    const Tensor& rv = val(r);
    require(xv.rank() == 2 && rv.rank() == 2 && rv.rows() == 1 && rv.cols() == xv.cols(),
            "div_bcast_row: expected x [m,n] and r [1,n]");
    const int m = xv.rows(), n = xv.cols();
    Tensor out({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out.at(i, j) = xv.at(i, j) / std::max(rv.v[j], eps);
    NodeId id = push(std::move(out), requires_grad(x) || requires_grad(r), {});
    nodes_[id].back = [x, r, eps, id, m, n](Tape& t) {
        const Tensor& g = t.adj(id);
        const Tensor& xv2 = t.val(x);
        const Tensor& rv2 = t.val(r);
        if (t.requires_grad(x)) {
            Tensor& gx = t.adjoint_slot(x);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    gx.at(i, j) += g.at(i, j) / std::max(rv2.v[j], eps);
        }
        if (t.requires_grad(r)) {
            Tensor& gr = t.adjoint_slot(r);
            for (int j = 0; j < n; ++j) {
                if (rv2.v[j] <= eps) continue;  // clamped denominator is constant
                const double d = rv2.v[j];
                double acc = 0.0;
                for (int i = 0; i < m; ++i) acc += g.at(i, j) * (-xv2.at(i, j) / (d * d));
                gr.v[j] += acc;
            }
        }
    };
    check(id, "div_bcast_row");
    return id;
}

NodeId Tape::rownorm_normalize(NodeId x, double eps) {
    const Tensor& xv = val(x);
    require(xv.rank() == 2, "rownorm_normalize: expected rank 2, got " + xv.shape_str());
    require(eps > 0.0, "rownorm_normalize: eps must be positive");
    const int m = xv.rows(), n = xv.cols();
    Tensor out({m, n});
    std::vector<double> norms(m);
    for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += xv.at(i, j) * xv.at(i, j);
        norms[i] = std::sqrt(s);
        const double d = std::max(norms[i], eps);
        for (int j = 0; j < n; ++j) out.at(i, j) = xv.at(i, j) / d;
    }
    NodeId id = push(std::move(out), requires_grad(x), {});
    nodes_[id].back = [x, eps, id, m, n, norms = std::move(norms)](Tape& t) {
        if (!t.requires_grad(x)) return;
        const Tensor& g = t.adj(id);
        const Tensor& xv2 = t.val(x);
        Tensor& gx = t.adjoint_slot(x);
        for (int i = 0; i < m; ++i) {
            if (norms[i] > eps) {
                const double nn = norms[i];
                double dot = 0.0;
                for (int j = 0; j < n; ++j) dot += g.at(i, j) * xv2.at(i, j);
                for (int j = 0; j < n; ++j)
                    gx.at(i, j) += g.at(i, j) / nn - dot * xv2.at(i, j) / (nn * nn * nn);
            } else {
                for (int j = 0; j < n; ++j) gx.at(i, j) += g.at(i, j) / eps;
            }
        }
    };
    check(id, "rownorm_normalize");
    return id;
}

NodeId Tape::reduce_min_rows(NodeId c) {
    const Tensor& cv = val(c);
    require(cv.rank() == 2 && cv.cols() > 0, "reduce_min_rows: expected nonempty rank 2");
    const int m = cv.rows(), n = cv.cols();
    Tensor out({m});
    std::vector<int> arg(m, 0);
    for (int i = 0; i < m; ++i) {
        double best = cv.at(i, 0);
        for (int j = 1; j < n; ++j)
            if (cv.at(i, j) < best) { best = cv.at(i, j); arg[i] = j; }
        out.v[i] = best;
    }
    NodeId id = push(std::move(out), requires_grad(c), {});
    nodes_[id].back = [c, id, m, n, arg = std::move(arg)](Tape& t) {
        if (!t.requires_grad(c)) return;
        const Tensor& g = t.adj(id);
        Tensor& gc = t.adjoint_slot(c);
        for (int i = 0; i < m; ++i) gc.v[static_cast<std::size_t>(i) * n + arg[i]] += g.v[i];
    };
    check(id, "reduce_min_rows");
    return id;
}

NodeId Tape::reduce_min_cols(NodeId c) {
    const Tensor& cv = val(c);
    require(cv.rank() == 2 && cv.rows() > 0, "reduce_min_cols: expected nonempty rank 2");
    const int m = cv.rows(), n = cv.cols();
    Tensor out({n});
    std::vector<int> arg(n, 0);
    for (int j = 0; j < n; ++j) {
        double best = cv.at(0, j);
        for (int i = 1; i < m; ++i)
            if (cv.at(i, j) < best) { best = cv.at(i, j); arg[j] = i; }
        out.v[j] = best;
    }
    NodeId id = push(std::move(out), requires_grad(c), {});
    nodes_[id].back = [c, id, n, arg = std::move(arg)](Tape& t) {
        if (!t.requires_grad(c)) return;
        const Tensor& g = t.adj(id);
        Tensor& gc = t.adjoint_slot(c);
        for (int j = 0; j < n; ++j) gc.v[static_cast<std::size_t>(arg[j]) * n + j] += g.v[j];
    };
    check(id, "reduce_min_cols");
    return id;
}

NodeId Tape::max2(NodeId a, NodeId b) {
    require(val(a).numel() == 1 && val(b).numel() == 1, "max2: expects scalars");
    const bool pick_a = val(a).v[0] >= val(b).v[0];
    NodeId id = push(Tensor::scalar(pick_a ? val(a).v[0] : val(b).v[0]),
                     requires_grad(a) || requires_grad(b), {});
    nodes_[id].back = [a, b, pick_a, id](Tape& t) {
        const double g = t.adj(id).v[0];
        const NodeId w = pick_a ? a : b;
        if (t.requires_grad(w)) t.adjoint_slot(w).v[0] += g;
    };
    check(id, "max2");
    return id;
}

// ---- losses ----------------------------------------------------------------

NodeId Tape::l1_loss(NodeId a, NodeId b) {
    require(val(a).same_shape(val(b)), "l1_loss: shape mismatch " + val(a).shape_str() + " vs " + val(b).shape_str());
    require(!val(a).v.empty(), "l1_loss: empty tensors");
    const double n = static_cast<double>(val(a).v.size());
    double s = 0.0;
    for (std::size_t i = 0; i < val(a).v.size(); ++i) s += std::abs(val(a).v[i] - val(b).v[i]);
    NodeId id = push(Tensor::scalar(s / n), requires_grad(a) || requires_grad(b), {});
    nodes_[id].back = [a, b, id, n](Tape& t) {
        const double g = t.adj(id).v[0] / n;
        const Tensor& av = t.val(a);
        const Tensor& bv = t.val(b);
        const bool ga = t.requires_grad(a), gb = t.requires_grad(b);
        Tensor* sa = ga ? &t.adjoint_slot(a) : nullptr;
        Tensor* sb = gb ? &t.adjoint_slot(b) : nullptr;
        for (std::size_t i = 0; i < av.v.size(); ++i) {
            const double d = av.v[i] - bv.v[i];
            const double sgn = (d > 0.0) ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
            if (sa) sa->v[i] += g * sgn;
            if (sb) sb->v[i] -= g * sgn;
        }
    };
    check(id, "l1_loss");
    return id;
}

NodeId Tape::sqdist_rowmean(NodeId a, NodeId b) {
    const Tensor& av = val(a);
    require(av.same_shape(val(b)) && av.rank() == 2 && av.rows() > 0,
            "sqdist_rowmean: expected matching rank-2 tensors");
    const double rows = static_cast<double>(av.rows());
    double s = 0.0;
    for (std::size_t i = 0; i < av.v.size(); ++i) {
        const double d = av.v[i] - val(b).v[i];
        s += d * d;
    }
    NodeId id = push(Tensor::scalar(s / rows), requires_grad(a) || requires_grad(b), {});
    nodes_[id].back = [a, b, id, rows](Tape& t) {
        const double g = t.adj(id).v[0];
        const Tensor& av2 = t.val(a);
        const Tensor& bv2 = t.val(b);
        const bool ga = t.requires_grad(a), gb = t.requires_grad(b);
        Tensor* sa = ga ? &t.adjoint_slot(a) : nullptr;
        Tensor* sb = gb ? &t.adjoint_slot(b) : nullptr;
        for (std::size_t i = 0; i < av2.v.size(); ++i) {
            const double d = 2.0 * g * (av2.v[i] - bv2.v[i]) / rows;
            if (sa) sa->v[i] += d;
            if (sb) sb->v[i] -= d;
        }
    };
    check(id, "sqdist_rowmean");
    return id;
}

NodeId Tape::cosine_sim(NodeId a, NodeId b, double eps) {
    require(val(a).numel() == val(b).numel() && !val(a).v.empty(),
            "cosine_sim: size mismatch or empty input");
    require(eps > 0.0, "cosine_sim: eps must be positive");
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    double dot = 0.0, na2 = 0.0, nb2 = 0.0;
    for (std::size_t i = 0; i < av.v.size(); ++i) {
        dot += av.v[i] * bv.v[i];
        na2 += av.v[i] * av.v[i];
        nb2 += bv.v[i] * bv.v[i];
    }
    const double na = std::sqrt(na2), nb = std::sqrt(nb2);
    const double da = std::max(na, eps), db = std::max(nb, eps);
    NodeId id = push(Tensor::scalar(dot / (da * db)), requires_grad(a) || requires_grad(b), {});
    nodes_[id].back = [a, b, eps, id, dot, na, nb, da, db](Tape& t) {
        const double g = t.adj(id).v[0];
        const Tensor& av2 = t.val(a);
        const Tensor& bv2 = t.val(b);
        if (t.requires_grad(a)) {
            Tensor& ga = t.adjoint_slot(a);
            const double c1 = g / (da * db);
            const double c2 = (na > eps) ? g * dot / (da * da * na * db) : 0.0;
            for (std::size_t i = 0; i < av2.v.size(); ++i)
                ga.v[i] += c1 * bv2.v[i] - c2 * av2.v[i];
        }
        if (t.requires_grad(b)) {
            Tensor& gb = t.adjoint_slot(b);
            const double c1 = g / (da * db);
            const double c2 = (nb > eps) ? g * dot / (db * db * nb * da) : 0.0;
            for (std::size_t i = 0; i < bv2.v.size(); ++i)
                gb.v[i] += c1 * av2.v[i] - c2 * bv2.v[i];
        }
    };
    check(id, "cosine_sim");
    return id;
}

NodeId Tape::softmax_ce(NodeId logits, const std::vector<int>& labels) {
    const Tensor& lv = val(logits);
    require(lv.rank() == 2 && static_cast<int>(labels.size()) == lv.rows(),
            "softmax_ce: label count must match batch rows");
    const int bsz = lv.rows(), k = lv.cols();
    for (int lbl : labels)
        require(0 <= lbl && lbl < k, "softmax_ce: label out of range");
    double total = 0.0;
    for (int i = 0; i < bsz; ++i) {
        double mx = lv.at(i, 0);
        for (int j = 1; j < k; ++j) mx = std::max(mx, lv.at(i, j));
        double se = 0.0;
        for (int j = 0; j < k; ++j) se += std::exp(lv.at(i, j) - mx);
        total += mx + std::log(se) - lv.at(i, labels[i]);
    }
    NodeId id = push(Tensor::scalar(total / bsz), requires_grad(logits), {});
    nodes_[id].back = [logits, id, bsz, k, labels](Tape& t) {
        if (!t.requires_grad(logits)) return;
        const double g = t.adj(id).v[0] / bsz;
        const Tensor& lv2 = t.val(logits);
        Tensor& gl = t.adjoint_slot(logits);
        for (int i = 0; i < bsz; ++i) {
            double mx = lv2.at(i, 0);
            for (int j = 1; j < k; ++j) mx = std::max(mx, lv2.at(i, j));
            double se = 0.0;
            for (int j = 0; j < k; ++j) se += std::exp(lv2.at(i, j) - mx);
            for (int j = 0; j < k; ++j) {
                const double p = std::exp(lv2.at(i, j) - mx) / se;
                gl.at(i, j) += g * (p - (j == labels[i] ? 1.0 : 0.0));
            }
        }
    };
    check(id, "softmax_ce");
    return id;
}

// ---- image ops -------------------------------------------------------------

NodeId Tape::downsample2x(NodeId img) {
    const Tensor& iv = val(img);
    require(iv.rank() == 3, "downsample2x: expected [H,W,C], got " + iv.shape_str());
    const int h = iv.shape[0], w = iv.shape[1], ch = iv.shape[2];
    require(h >= 2 && w >= 2, "downsample2x: image too small");
    const int h2 = (h + 1) / 2, w2 = (w + 1) / 2;
    Tensor out({h2, w2, ch});
    for (int r = 0; r < h2; ++r) {
        for (int c = 0; c < w2; ++c) {
            const int nr = std::min(2, h - 2 * r), nc = std::min(2, w - 2 * c);
            for (int k = 0; k < ch; ++k) {
                double s = 0.0;
                for (int dr = 0; dr < nr; ++dr)
                    for (int dc = 0; dc < nc; ++dc) s += iv.v[iv.idx3(2 * r + dr, 2 * c + dc, k)];
                out.v[out.idx3(r, c, k)] = s / (nr * nc);
            }
        }
    }
    NodeId id = push(std::move(out), requires_grad(img), {});
    nodes_[id].back = [img, id, h, w, ch, h2, w2](Tape& t) {
        if (!t.requires_grad(img)) return;
        const Tensor& g = t.adj(id);
        Tensor& gi = t.adjoint_slot(img);
        for (int r = 0; r < h2; ++r) {
            for (int c = 0; c < w2; ++c) {
                const int nr = std::min(2, h - 2 * r), nc = std::min(2, w - 2 * c);
                for (int k = 0; k < ch; ++k) {
                    const double gv = g.v[g.idx3(r, c, k)] / (nr * nc);
                    for (int dr = 0; dr < nr; ++dr)
                        for (int dc = 0; dc < nc; ++dc) gi.v[gi.idx3(2 * r + dr, 2 * c + dc, k)] += gv;
                }
            }
        }
    };
    check(id, "downsample2x");
    return id;
}

NodeId Tape::conv1d_h(NodeId img, const std::vector<double>& kernel) {
    const Tensor& iv = val(img);
    require(iv.rank() == 3, "conv1d_h: expected [H,W,C]");
    require(kernel.size() % 2 == 1 && !kernel.empty(), "conv1d_h: kernel length must be odd");
    const int h = iv.shape[0], w = iv.shape[1], ch = iv.shape[2];
    const int rad = static_cast<int>(kernel.size()) / 2;
    Tensor out({h, w, ch});
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int k = 0; k < ch; ++k) {
                double s = 0.0;
                for (int t2 = -rad; t2 <= rad; ++t2) {
                    const int cc = std::clamp(c + t2, 0, w - 1);
                    s += kernel[t2 + rad] * iv.v[iv.idx3(r, cc, k)];
                }
                out.v[out.idx3(r, c, k)] = s;
            }
    NodeId id = push(std::move(out), requires_grad(img), {});
    nodes_[id].back = [img, id, h, w, ch, rad, kernel](Tape& t) {
        if (!t.requires_grad(img)) return;
        const Tensor& g = t.adj(id);
        Tensor& gi = t.adjoint_slot(img);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c)
                for (int k = 0; k < ch; ++k) {
                    const double gv = g.v[g.idx3(r, c, k)];
                    for (int t2 = -rad; t2 <= rad; ++t2) {
                        const int cc = std::clamp(c + t2, 0, w - 1);
                        gi.v[gi.idx3(r, cc, k)] += kernel[t2 + rad] * gv;
                    }
                }
    };
    check(id, "conv1d_h");
    return id;
}

NodeId Tape::conv1d_v(NodeId img, const std::vector<double>& kernel) {
    const Tensor& iv = val(img);
    require(iv.rank() == 3, "conv1d_v: expected [H,W,C]");
    require(kernel.size() % 2 == 1 && !kernel.empty(), "conv1d_v: kernel length must be odd");
    const int h = iv.shape[0], w = iv.shape[1], ch = iv.shape[2];
    const int rad = static_cast<int>(kernel.size()) / 2;
    Tensor out({h, w, ch});
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int k = 0; k < ch; ++k) {
                double s = 0.0;
                for (int t2 = -rad; t2 <= rad; ++t2) {
                    const int rr = std::clamp(r + t2, 0, h - 1);
                    s += kernel[t2 + rad] * iv.v[iv.idx3(rr, c, k)];
                }
                out.v[out.idx3(r, c, k)] = s;
            }
    NodeId id = push(std::move(out), requires_grad(img), {});
    nodes_[id].back = [img, id, h, w, ch, rad, kernel](Tape& t) {
        if (!t.requires_grad(img)) return;
        const Tensor& g = t.adj(id);
        Tensor& gi = t.adjoint_slot(img);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c)
                for (int k = 0; k < ch; ++k) {
                    const double gv = g.v[g.idx3(r, c, k)];
                    for (int t2 = -rad; t2 <= rad; ++t2) {
                        const int rr = std::clamp(r + t2, 0, h - 1);
                        gi.v[gi.idx3(rr, c, k)] += kernel[t2 + rad] * gv;
                    }
                }
    };
    check(id, "conv1d_v");
    return id;
}

NodeId Tape::luminance(NodeId img) {
    const Tensor& iv = val(img);
    require(iv.rank() == 3 && iv.shape[2] >= 1, "luminance: expected [H,W,C]");
    const int h = iv.shape[0], w = iv.shape[1], ch = iv.shape[2];
    Tensor out({h, w, 1});
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double s = 0.0;
            for (int k = 0; k < ch; ++k) s += iv.v[iv.idx3(r, c, k)];
            out.v[out.idx3(r, c, 0)] = s / ch;
        }
    NodeId id = push(std::move(out), requires_grad(img), {});
    nodes_[id].back = [img, id, h, w, ch](Tape& t) {
        if (!t.requires_grad(img)) return;
        const Tensor& g = t.adj(id);
        Tensor& gi = t.adjoint_slot(img);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                const double gv = g.v[g.idx3(r, c, 0)] / ch;
                for (int k = 0; k < ch; ++k) gi.v[gi.idx3(r, c, k)] += gv;
            }
    };
    check(id, "luminance");
    return id;
}

NodeId Tape::shift_diff(NodeId img, int dr, int dc, double gain) {
    const Tensor& iv = val(img);
    require(iv.rank() == 3 && iv.shape[2] == 1, "shift_diff: expected [H,W,1]");
    const int h = iv.shape[0], w = iv.shape[1];
    Tensor out({h, w, 1});
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const int rp = std::clamp(r + dr, 0, h - 1), cp = std::clamp(c + dc, 0, w - 1);
            const int rm = std::clamp(r - dr, 0, h - 1), cm = std::clamp(c - dc, 0, w - 1);
            out.v[out.idx3(r, c, 0)] =
                gain * (iv.v[iv.idx3(rp, cp, 0)] - iv.v[iv.idx3(rm, cm, 0)]);
        }
    NodeId id = push(std::move(out), requires_grad(img), {});
    nodes_[id].back = [img, id, h, w, dr, dc, gain](Tape& t) {
        if (!t.requires_grad(img)) return;
        const Tensor& g = t.adj(id);
        Tensor& gi = t.adjoint_slot(img);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                const double gv = gain * g.v[g.idx3(r, c, 0)];
                const int rp = std::clamp(r + dr, 0, h - 1), cp = std::clamp(c + dc, 0, w - 1);
                const int rm = std::clamp(r - dr, 0, h - 1), cm = std::clamp(c - dc, 0, w - 1);
                gi.v[gi.idx3(rp, cp, 0)] += gv;
                gi.v[gi.idx3(rm, cm, 0)] -= gv;
            }
    };
    check(id, "shift_diff");
    return id;
}

NodeId Tape::gather_bilinear(NodeId grid, std::vector<BilinearTap> taps) {
    const Tensor& gv = val(grid);
    require(gv.rank() == 3, "gather_bilinear: expected [h,w,C] grid");
    const int cells = gv.shape[0] * gv.shape[1], ch = gv.shape[2];
    for (const BilinearTap& tap : taps)
        for (int q = 0; q < 4; ++q)
            require(tap.w[q] == 0.0 || (0 <= tap.idx[q] && tap.idx[q] < cells),
                    "gather_bilinear: tap index out of range");
    const int k = static_cast<int>(taps.size());
    Tensor out({k, ch});
    for (int i = 0; i < k; ++i)
        for (int c = 0; c < ch; ++c) {
            double s = 0.0;
            for (int q = 0; q < 4; ++q)
                if (taps[i].w[q] != 0.0)
                    s += taps[i].w[q] * gv.v[static_cast<std::size_t>(taps[i].idx[q]) * ch + c];
            out.v[static_cast<std::size_t>(i) * ch + c] = s;
        }
    NodeId id = push(std::move(out), requires_grad(grid), {});
    nodes_[id].back = [grid, id, k, ch, taps = std::move(taps)](Tape& t) {
        if (!t.requires_grad(grid)) return;
        const Tensor& g = t.adj(id);
        Tensor& gg = t.adjoint_slot(grid);
        for (int i = 0; i < k; ++i)
            for (int c = 0; c < ch; ++c) {
                const double gvl = g.v[static_cast<std::size_t>(i) * ch + c];
                for (int q = 0; q < 4; ++q)
                    if (taps[i].w[q] != 0.0)
                        gg.v[static_cast<std::size_t>(taps[i].idx[q]) * ch + c] += taps[i].w[q] * gvl;
            }
    };
    check(id, "gather_bilinear");
    return id;
}

NodeId Tape::texture_shade(NodeId tex, int out_h, int out_w,
                           std::vector<int> pixel_index, std::vector<BilinearTap> taps,
                           double background) {
    const Tensor& tv = val(tex);
    require(tv.rank() == 3 && tv.shape[2] == 3, "texture_shade: expected [th,tw,3] texture");
    require(pixel_index.size() == taps.size(), "texture_shade: footprint arrays disagree");
    const int cells = tv.shape[0] * tv.shape[1];
    const std::size_t npix = static_cast<std::size_t>(out_h) * out_w;
    for (std::size_t i = 0; i < pixel_index.size(); ++i) {
        require(0 <= pixel_index[i] && static_cast<std::size_t>(pixel_index[i]) < npix,
                "texture_shade: pixel index out of range");
        for (int q = 0; q < 4; ++q)
            require(taps[i].w[q] == 0.0 || (0 <= taps[i].idx[q] && taps[i].idx[q] < cells),
                    "texture_shade: texel index out of range");
    }
    Tensor out({out_h, out_w, 3});
    std::fill(out.v.begin(), out.v.end(), background);
    for (std::size_t i = 0; i < pixel_index.size(); ++i) {
        const std::size_t base = static_cast<std::size_t>(pixel_index[i]) * 3;
        for (int c = 0; c < 3; ++c) {
            double s = 0.0;
            for (int q = 0; q < 4; ++q)
                if (taps[i].w[q] != 0.0)
                    s += taps[i].w[q] * tv.v[static_cast<std::size_t>(taps[i].idx[q]) * 3 + c];
            out.v[base + c] = s;
        }
    }
    NodeId id = push(std::move(out), requires_grad(tex), {});
    nodes_[id].back = [tex, id, pixel_index = std::move(pixel_index), taps = std::move(taps)](Tape& t) {
        if (!t.requires_grad(tex)) return;
        const Tensor& g = t.adj(id);
        Tensor& gt = t.adjoint_slot(tex);
        for (std::size_t i = 0; i < pixel_index.size(); ++i) {
            const std::size_t base = static_cast<std::size_t>(pixel_index[i]) * 3;
            for (int c = 0; c < 3; ++c) {
                const double gv = g.v[base + c];
                for (int q = 0; q < 4; ++q)
                    if (taps[i].w[q] != 0.0)
                        gt.v[static_cast<std::size_t>(taps[i].idx[q]) * 3 + c] += taps[i].w[q] * gv;
            }
        }
    };
    check(id, "texture_shade");
    return id;
}

// ---- backward --------------------------------------------------------------

void Tape::backward(NodeId loss) {
    require(0 <= loss && loss < static_cast<NodeId>(nodes_.size()), "backward: bad node id");
    require(val(loss).numel() == 1, "backward: loss must be a scalar, got " + val(loss).shape_str());
    if (!nodes_[loss].requires_grad) return;  // nothing differentiable upstream
    adjoint_slot(loss).v[0] += 1.0;
    for (NodeId i = loss; i >= 0; --i) {
        Node& n = nodes_[i];
        if (!n.requires_grad || n.adjoint.v.empty() || !n.back) continue;
        n.back(*this);
    }
    for (NodeId i = 0; i <= loss; ++i) {
        Node& n = nodes_[i];
        if (n.store == nullptr) continue;
        n.store->accumulate_grad(n.param_name, adjoint_slot(i));
    }
    if (check_finite_)
        for (NodeId i = 0; i <= loss; ++i)
            if (!nodes_[i].adjoint.v.empty() && !nodes_[i].adjoint.all_finite())
                throw std::runtime_error("facesculpt: non-finite adjoint in backward");
}

}  // namespace facesculpt::ad
