#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace facesculpt::ad {

struct GradCheckResult {
    double max_rel_err = 0.0;   // worst coordinate, normalized by gradient scale
    double max_abs_err = 0.0;
    std::size_t worst_index = 0;
};

// Central finite differences of a scalar function, one probe pair per
// coordinate.
std::vector<double> finite_difference_grad(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h = 1e-5);

// Compares an analytic gradient against central differences. The error is
// normalized by the largest gradient magnitude on either side (floored at
// 1e-6) so near-zero coordinates are judged at the scale of the dominant
// ones rather than against themselves.
GradCheckResult check_gradients(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x,
    const std::vector<double>& analytic_grad,
    double h = 1e-5);

}  // namespace facesculpt::ad
