#include "facesculpt/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace facesculpt::ad {

std::vector<double> finite_difference_grad(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h) {
    if (h <= 0.0) throw std::invalid_argument("facesculpt: finite-difference step must be positive");
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double fp = f(x);
        x[i] = saved - h;
        const double fm = f(x);
        x[i] = saved;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

GradCheckResult check_gradients(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x,
    const std::vector<double>& analytic_grad,
    double h) {
    if (x.size() != analytic_grad.size())
        throw std::invalid_argument("facesculpt: gradient length does not match input length");
    const std::vector<double> numeric = finite_difference_grad(f, x, h);
    double scale = 1e-6;
    for (std::size_t i = 0; i < x.size(); ++i)
        scale = std::max({scale, std::abs(analytic_grad[i]), std::abs(numeric[i])});
    GradCheckResult r;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double abs_err = std::abs(analytic_grad[i] - numeric[i]);
        if (abs_err > r.max_abs_err) {
            r.max_abs_err = abs_err;
            r.worst_index = i;
        }
    }
    r.max_rel_err = r.max_abs_err / scale;
    return r;
}

}  // namespace facesculpt::ad
