#pragma once

#include <functional>
#include <vector>

#include "amdl/tensor.hpp"

namespace amdl {

// Central finite differences against reverse-mode gradients. `fn` must map the
// given inputs to a scalar and be a pure function of them (stateful pieces
// like batch-norm statistics must be reset inside `fn`). Returns the maximum
// relative error over all elements of all requires_grad inputs, with
// denominator max(|analytic|, |numeric|, 1e-8). Meant for 64-bit tensors.
template <class T>
double grad_check(const std::function<TensorT<T>(std::vector<TensorT<T>>&)>& fn, std::vector<TensorT<T>> inputs,
                  double h = 1e-5) {
    TensorT<T> out = fn(inputs);
    if (!out.defined() || out.numel() != 1) throw DimensionError("grad_check: function output must be a scalar");
    for (auto& in : inputs) in.zero_grad();
    backward(out);

    std::vector<std::vector<T>> analytic;
    analytic.reserve(inputs.size());
    for (auto& in : inputs) analytic.push_back(in.has_grad() ? in.grad() : std::vector<T>(in.data().size(), T(0)));

    double max_rel = 0.0;
    for (size_t t = 0; t < inputs.size(); ++t) {
        if (!inputs[t].requires_grad()) continue;
        std::vector<T>& x = inputs[t].data();
        for (size_t j = 0; j < x.size(); ++j) {
            T orig = x[j];
            double fp, fm;
            {
                NoGradGuard ng;
                x[j] = orig + static_cast<T>(h);
                fp = static_cast<double>(fn(inputs).item());
                x[j] = orig - static_cast<T>(h);
                fm = static_cast<double>(fn(inputs).item());
                x[j] = orig;
            }
            double numeric = (fp - fm) / (2.0 * h);
            double a = static_cast<double>(analytic[t][j]);
            double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
        }
    }
    return max_rel;
}

}  // namespace amdl
