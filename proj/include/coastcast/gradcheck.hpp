#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "coastcast/tensor.hpp"

namespace coastcast {

// Central-difference gradient: (f(x + h e_i) - f(x - h e_i)) / (2h) per element.
// The numeric oracle the analytic backward pass is checked against.
inline TensorD finite_diff_grad(const std::function<double(const TensorD&)>& f,
                                const TensorD& x, double step) {
    if (step <= 0.0) throw ValueError("finite_diff_grad needs step > 0");
    TensorD g = TensorD::zeros(x.shape);
    TensorD probe = x;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + step;
        const double fp = f(probe);
        probe[i] = orig - step;
        const double fm = f(probe);
        probe[i] = orig;
        g[i] = (fp - fm) / (2.0 * step);
    }
    return g;
}

struct GradCheckResult {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    bool ok = true;
    std::size_t worst_index = 0;
};

// Relative comparison with an absolute floor where the true gradient is tiny.
inline GradCheckResult compare_grads(const TensorD& analytic, const TensorD& numeric,
                                     double rel_tol = 1e-4, double tiny = 1e-6, double abs_tol = 1e-7) {
    GradCheckResult r;
    for (std::size_t i = 0; i < analytic.numel(); ++i) {
        const double a = analytic[i];
        const double n = numeric[i];
        const double diff = std::abs(a - n);
        const double mag = std::max(std::abs(a), std::abs(n));
        if (mag < tiny) {
            if (diff > r.max_abs_err) r.max_abs_err = diff;
            if (diff > abs_tol) {
                r.ok = false;
                r.worst_index = i;
            }
        } else {
            const double rel = diff / mag;
            if (rel > r.max_rel_err) {
                r.max_rel_err = rel;
                r.worst_index = i;
            }
            if (rel > rel_tol) r.ok = false;
        }
    }
    return r;
}

}  // namespace coastcast
