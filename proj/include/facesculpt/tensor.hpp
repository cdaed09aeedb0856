#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace facesculpt::ad {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

// Dense row-major tensor of doubles. Rank 0/1/2 cover network math; images
// use rank 3 as [rows, cols, channels].
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) { v.assign(numel(shape), 0.0); }
    Tensor(std::vector<int> s, std::vector<double> data) : shape(std::move(s)), v(std::move(data)) {}

    static std::size_t numel(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) n *= static_cast<std::size_t>(d);
        return n;
    }
    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor scalar(double x) { return Tensor({}, {x}); }

    std::size_t numel() const { return v.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    bool is_scalar() const { return v.size() == 1 && shape.empty(); }

    int rows() const { return shape.at(0); }
    int cols() const { return shape.at(1); }

    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols() + c]; }

    // [H, W, C] indexing.
    std::size_t idx3(int r, int c, int ch) const {
        return (static_cast<std::size_t>(r) * shape[1] + c) * shape[2] + ch;
    }

    MatMap mat() { return MatMap(v.data(), shape.at(0), shape.at(1)); }
    ConstMatMap mat() const { return ConstMatMap(v.data(), shape.at(0), shape.at(1)); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
    std::string shape_str() const;
};

}  // namespace facesculpt::ad
