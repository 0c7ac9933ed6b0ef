#pragma once

#include <vector>

#include "amdl/tensor.hpp"

namespace amdl {

// SGD with momentum and L2 weight decay coupled into the gradient before the
// momentum update:
//
//   g' = g + wd * w
//   v  = momentum * v + g'
//   w  = w - lr * v
//
// Gradients are zeroed after each step. A parameter whose grad slot was never
// touched contributes g = 0.
template <class T>
class SgdT {
public:
    SgdT(std::vector<TensorT<T>> params, T lr, T momentum = T(0.9), T weight_decay = T(0))
        : params_(std::move(params)), lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
        velocity_.resize(params_.size());
        for (size_t i = 0; i < params_.size(); ++i) velocity_[i].assign(params_[i].data().size(), T(0));
    }

    void set_lr(T lr) { lr_ = lr; }
    T lr() const { return lr_; }
    const std::vector<TensorT<T>>& params() const { return params_; }

    void step() {
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i];
            auto& v = velocity_[i];
            std::vector<T>& w = p.data();
            if (p.has_grad()) {
                const std::vector<T>& g = p.grad();
                for (size_t j = 0; j < w.size(); ++j) {
                    T gj = g[j] + weight_decay_ * w[j];
                    v[j] = momentum_ * v[j] + gj;
                    w[j] -= lr_ * v[j];
                }
            } else {
                for (size_t j = 0; j < w.size(); ++j) {
                    T gj = weight_decay_ * w[j];
                    v[j] = momentum_ * v[j] + gj;
                    w[j] -= lr_ * v[j];
                }
            }
            p.zero_grad();
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

private:
    std::vector<TensorT<T>> params_;
    std::vector<std::vector<T>> velocity_;
    T lr_, momentum_, weight_decay_;
};

using Sgd = SgdT<float>;

}  // namespace amdl
