#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "amdl/errors.hpp"
#include "amdl/threads.hpp"

namespace amdl {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + ")";
}

// Toggles graph recording. Evaluation loops disable it to skip node bookkeeping.
bool grad_enabled();
void set_grad_enabled(bool on);

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_enabled()) { set_grad_enabled(false); }
    ~NoGradGuard() { set_grad_enabled(prev); }
};

namespace detail {

template <class T>
struct TensorImpl;

// One recorded operation. `backprop` reads the output gradient and accumulates
// into the inputs' gradient buffers; `inputs` drive the topological walk.
template <class T>
struct Node {
    const char* op = "";
    std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
    std::function<void(const TensorImpl<T>&)> backprop;
};

template <class T>
struct TensorImpl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until the first accumulation
    bool requires_grad = false;
    std::shared_ptr<Node<T>> grad_fn;

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    bool needs_path() const { return requires_grad || grad_fn != nullptr; }
    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), T(0));
    }
};

}  // namespace detail

// Dense n-dimensional array with an optional gradient slot. Copies share the
// underlying buffer (handle semantics); operator outputs are treated as
// immutable once produced.
template <class T>
class TensorT {
public:
    using Impl = detail::TensorImpl<T>;

    TensorT() = default;
    explicit TensorT(Shape shape, T fill = T(0), bool requires_grad = false)
        : impl_(std::make_shared<Impl>()) {
        impl_->shape = std::move(shape);
        impl_->data.assign(static_cast<size_t>(shape_numel(impl_->shape)), fill);
        impl_->requires_grad = requires_grad;
    }

    static TensorT from_data(Shape shape, std::vector<T> data, bool requires_grad = false) {
        if (static_cast<int64_t>(data.size()) != shape_numel(shape))
            throw DimensionError("tensor data size " + std::to_string(data.size()) + " does not match shape " +
                                 shape_str(shape));
        TensorT t;
        t.impl_ = std::make_shared<Impl>();
        t.impl_->shape = std::move(shape);
        t.impl_->data = std::move(data);
        t.impl_->requires_grad = requires_grad;
        return t;
    }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int64_t numel() const { return impl_->numel(); }
    int dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }

    std::vector<T>& data() { return impl_->data; }
    const std::vector<T>& data() const { return impl_->data; }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool v) { impl_->requires_grad = v; }

    bool has_grad() const { return !impl_->grad.empty(); }
    std::vector<T>& grad() {
        impl_->ensure_grad();
        return impl_->grad;
    }
    const std::vector<T>& grad() const {
        impl_->ensure_grad();
        return impl_->grad;
    }
    void zero_grad() {
        if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
    }

    T item() const {
        if (numel() != 1) throw DimensionError("item() on non-scalar tensor " + shape_str(shape()));
        return impl_->data[0];
    }

    // Deep copy of data (not graph, not grad).
    TensorT clone_detached() const {
        TensorT t;
        t.impl_ = std::make_shared<Impl>();
        t.impl_->shape = impl_->shape;
        t.impl_->data = impl_->data;
        t.impl_->requires_grad = impl_->requires_grad;
        return t;
    }

    std::shared_ptr<Impl> impl() const { return impl_; }

private:
    std::shared_ptr<Impl> impl_;
};

using Tensor = TensorT<float>;
using DTensor = TensorT<double>;

namespace detail {

template <class T>
void check_finite(const std::vector<T>& v, const char* op, const char* which) {
    for (const T& x : v)
        if (!std::isfinite(static_cast<double>(x)))
            throw NumericError(std::string(op) + ": non-finite value in " + which);
}

template <class T>
void accumulate(TensorImpl<T>& into, const std::vector<T>& delta) {
    into.ensure_grad();
    for (size_t i = 0; i < delta.size(); ++i) into.grad[i] += delta[i];
}

// Builds the output tensor and, when recording, attaches the node.
template <class T, class BackFn>
TensorT<T> make_op(const char* op, Shape out_shape, std::vector<T> out_data,
                   std::vector<std::shared_ptr<TensorImpl<T>>> inputs, BackFn&& back) {
    check_finite(out_data, op, "output");
    TensorT<T> out = TensorT<T>::from_data(std::move(out_shape), std::move(out_data));
    if (!grad_enabled()) return out;
    bool needs = false;
    for (const auto& in : inputs) needs = needs || in->needs_path();
    if (!needs) return out;
    auto node = std::make_shared<Node<T>>();
    node->op = op;
    node->inputs = std::move(inputs);
    node->backprop = std::forward<BackFn>(back);
    out.impl()->grad_fn = std::move(node);
    return out;
}

// C[m x n] (+)= A[m x k] * B[k x n], row-major, fixed accumulation order.
template <class T>
void gemm(int64_t m, int64_t k, int64_t n, const T* a, const T* b, T* c, bool accumulate_into) {
    if (!accumulate_into) std::fill(c, c + m * n, T(0));
    for (int64_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (int64_t p = 0; p < k; ++p) {
            T av = arow[p];
            if (av == T(0)) continue;
            const T* brow = b + p * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m x n] (+)= A[k x m]^T * B[k x n]
template <class T>
void gemm_tn(int64_t m, int64_t k, int64_t n, const T* a, const T* b, T* c, bool accumulate_into) {
    if (!accumulate_into) std::fill(c, c + m * n, T(0));
    for (int64_t p = 0; p < k; ++p) {
        const T* arow = a + p * m;
        const T* brow = b + p * n;
        for (int64_t i = 0; i < m; ++i) {
            T av = arow[i];
            if (av == T(0)) continue;
            T* crow = c + i * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m x n] (+)= A[m x k] * B[n x k]^T
template <class T>
void gemm_nt(int64_t m, int64_t k, int64_t n, const T* a, const T* b, T* c, bool accumulate_into) {
    for (int64_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (int64_t j = 0; j < n; ++j) {
            const T* bcol = b + j * k;
            T acc = accumulate_into ? crow[j] : T(0);
            for (int64_t p = 0; p < k; ++p) acc += arow[p] * bcol[p];
            crow[j] = acc;
        }
    }
}

struct ConvDims {
    int64_t batch, in_ch, in_h, in_w;
    int64_t out_ch, kh, kw;
    int64_t out_h, out_w;
    int stride, pad;
};

template <class T>
ConvDims conv_dims(const TensorT<T>& x, const TensorT<T>& w, int stride, int pad) {
    if (x.shape().size() != 4) throw DimensionError("conv2d: input must be NCHW, got " + shape_str(x.shape()));
    if (w.shape().size() != 4) throw DimensionError("conv2d: weight must be OIHW, got " + shape_str(w.shape()));
    if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
    if (pad < 0) throw DimensionError("conv2d: pad must be >= 0");
    ConvDims d;
    d.batch = x.dim(0);
    d.in_ch = x.dim(1);
    d.in_h = x.dim(2);
    d.in_w = x.dim(3);
    d.out_ch = w.dim(0);
    d.kh = w.dim(2);
    d.kw = w.dim(3);
    d.stride = stride;
    d.pad = pad;
    if (w.dim(1) != d.in_ch)
        throw DimensionError("conv2d: weight expects " + std::to_string(w.dim(1)) + " input channels, got " +
                             std::to_string(d.in_ch));
    d.out_h = (d.in_h + 2 * pad - d.kh) / stride + 1;
    d.out_w = (d.in_w + 2 * pad - d.kw) / stride + 1;
    if (d.out_h < 1 || d.out_w < 1) throw DimensionError("conv2d: kernel larger than padded input");
    return d;
}

// Scatters one sample into a (in_ch*kh*kw) x (out_h*out_w) patch matrix.
template <class T>
void im2col(const T* x, const ConvDims& d, T* col) {
    int64_t ohw = d.out_h * d.out_w;
    for (int64_t c = 0; c < d.in_ch; ++c) {
        for (int64_t ki = 0; ki < d.kh; ++ki) {
            for (int64_t kj = 0; kj < d.kw; ++kj) {
                T* row = col + ((c * d.kh + ki) * d.kw + kj) * ohw;
                for (int64_t oh = 0; oh < d.out_h; ++oh) {
                    int64_t ih = oh * d.stride - d.pad + ki;
                    if (ih < 0 || ih >= d.in_h) {
                        std::fill(row + oh * d.out_w, row + (oh + 1) * d.out_w, T(0));
                        continue;
                    }
                    const T* xrow = x + (c * d.in_h + ih) * d.in_w;
                    for (int64_t ow = 0; ow < d.out_w; ++ow) {
                        int64_t iw = ow * d.stride - d.pad + kj;
                        row[oh * d.out_w + ow] = (iw >= 0 && iw < d.in_w) ? xrow[iw] : T(0);
                    }
                }
            }
        }
    }
}

template <class T>
void col2im_add(const T* col, const ConvDims& d, T* x) {
    int64_t ohw = d.out_h * d.out_w;
    for (int64_t c = 0; c < d.in_ch; ++c) {
        for (int64_t ki = 0; ki < d.kh; ++ki) {
            for (int64_t kj = 0; kj < d.kw; ++kj) {
                const T* row = col + ((c * d.kh + ki) * d.kw + kj) * ohw;
                for (int64_t oh = 0; oh < d.out_h; ++oh) {
                    int64_t ih = oh * d.stride - d.pad + ki;
                    if (ih < 0 || ih >= d.in_h) continue;
                    T* xrow = x + (c * d.in_h + ih) * d.in_w;
                    for (int64_t ow = 0; ow < d.out_w; ++ow) {
                        int64_t iw = ow * d.stride - d.pad + kj;
                        if (iw >= 0 && iw < d.in_w) xrow[iw] += row[oh * d.out_w + ow];
                    }
                }
            }
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

// 2D convolution, im2col + GEMM on both passes. x: NCHW, w: OIkhkw, b: O.
// 1x1/stride-1/no-pad kernels skip the patch matrix and multiply in place.
template <class T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, int stride = 1, int pad = 0) {
    using namespace detail;
    ConvDims d = conv_dims(x, w, stride, pad);
    if (b.numel() != d.out_ch) throw DimensionError("conv2d: bias size must equal output channels");
    check_finite(x.data(), "conv2d", "input");

    int64_t ck = d.in_ch * d.kh * d.kw;
    int64_t ohw = d.out_h * d.out_w;
    bool pointwise = (d.kh == 1 && d.kw == 1 && stride == 1 && pad == 0);
    std::vector<T> out(static_cast<size_t>(d.batch * d.out_ch * ohw));

    parallel_for(d.batch, [&](int64_t n0, int64_t n1) {
        std::vector<T> col;
        if (!pointwise) col.resize(static_cast<size_t>(ck * ohw));
        for (int64_t n = n0; n < n1; ++n) {
            const T* xn = x.data().data() + n * d.in_ch * d.in_h * d.in_w;
            T* yn = out.data() + n * d.out_ch * ohw;
            const T* patches = pointwise ? xn : (im2col(xn, d, col.data()), col.data());
            gemm(d.out_ch, ck, ohw, w.data().data(), patches, yn, false);
            for (int64_t o = 0; o < d.out_ch; ++o) {
                T bias = b.data()[static_cast<size_t>(o)];
                T* row = yn + o * ohw;
                for (int64_t i = 0; i < ohw; ++i) row[i] += bias;
            }
        }
    });

    auto xi = x.impl();
    auto wi = w.impl();
    auto bi = b.impl();
    bool need_x = xi->needs_path();
    bool need_w = wi->needs_path();
    bool need_b = bi->needs_path();
    return make_op<T>(
        "conv2d", {static_cast<int>(d.batch), static_cast<int>(d.out_ch), static_cast<int>(d.out_h), static_cast<int>(d.out_w)},
        std::move(out), {xi, wi, bi}, [=](const detail::TensorImpl<T>& o) {
            const std::vector<T>& gy = o.grad;
            if (need_x) {
                xi->ensure_grad();
                parallel_for(d.batch, [&](int64_t n0, int64_t n1) {
                    std::vector<T> dcol(static_cast<size_t>(ck * ohw));
                    for (int64_t n = n0; n < n1; ++n) {
                        const T* gyn = gy.data() + n * d.out_ch * ohw;
                        T* gxn = xi->grad.data() + n * d.in_ch * d.in_h * d.in_w;
                        if (pointwise) {
                            gemm_tn(ck, d.out_ch, ohw, wi->data.data(), gyn, dcol.data(), false);
                            for (size_t i = 0; i < dcol.size(); ++i) gxn[i] += dcol[i];
                        } else {
                            gemm_tn(ck, d.out_ch, ohw, wi->data.data(), gyn, dcol.data(), false);
                            col2im_add(dcol.data(), d, gxn);
                        }
                    }
                });
            }
            if (need_w || need_b) {
                if (need_w) wi->ensure_grad();
                if (need_b) bi->ensure_grad();
                std::vector<T> col;
                if (!pointwise && need_w) col.resize(static_cast<size_t>(ck * ohw));
                for (int64_t n = 0; n < d.batch; ++n) {
                    const T* gyn = gy.data() + n * d.out_ch * ohw;
                    if (need_w) {
                        const T* xn = xi->data.data() + n * d.in_ch * d.in_h * d.in_w;
                        const T* patches = pointwise ? xn : (im2col(xn, d, col.data()), col.data());
                        gemm_nt(d.out_ch, ohw, ck, gyn, patches, wi->grad.data(), true);
                    }
                    if (need_b) {
                        for (int64_t o = 0; o < d.out_ch; ++o) {
                            T s = T(0);
                            const T* row = gyn + o * ohw;
                            for (int64_t i = 0; i < ohw; ++i) s += row[i];
                            bi->grad[static_cast<size_t>(o)] += s;
                        }
                    }
                }
            }
        });
}

// Elementwise max(0, x); gradient at exactly 0 is 0.
template <class T>
TensorT<T> relu(const TensorT<T>& x) {
    using namespace detail;
    std::vector<T> out(x.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] > T(0) ? x.data()[i] : T(0);
    auto xi = x.impl();
    return make_op<T>("relu", x.shape(), std::move(out), {xi}, [xi](const detail::TensorImpl<T>& o) {
        if (!xi->needs_path()) return;
        xi->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i)
            if (xi->data[i] > T(0)) xi->grad[i] += o.grad[i];
    });
}

// Running statistics for one batch-norm site.
template <class T>
struct BatchNormStats {
    std::vector<T> mean;
    std::vector<T> var;
    explicit BatchNormStats(int channels = 0) : mean(static_cast<size_t>(channels), T(0)), var(static_cast<size_t>(channels), T(1)) {}
};

// Batch normalization over NCHW per channel. Training mode normalizes by
// biased batch statistics and updates `stats` in place with momentum;
// eval mode applies the stored statistics as a fixed affine map.
template <class T>
TensorT<T> batchnorm(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta, BatchNormStats<T>& stats,
                     bool training, T eps = T(1e-5), T momentum = T(0.1)) {
    using namespace detail;
    if (x.shape().size() != 4) throw DimensionError("batchnorm: input must be NCHW");
    int64_t batch = x.dim(0), ch = x.dim(1), hw = static_cast<int64_t>(x.dim(2)) * x.dim(3);
    if (gamma.numel() != ch || beta.numel() != ch) throw DimensionError("batchnorm: gamma/beta must have C elements");
    if (static_cast<int64_t>(stats.mean.size()) != ch) throw DimensionError("batchnorm: stats channel mismatch");
    int64_t m = batch * hw;
    if (training && m < 2) throw DimensionError("batchnorm: training mode needs at least 2 values per channel");

    std::vector<T> mean(static_cast<size_t>(ch)), var(static_cast<size_t>(ch));
    if (training) {
        for (int64_t c = 0; c < ch; ++c) {
            T s = T(0);
            for (int64_t n = 0; n < batch; ++n) {
                const T* p = x.data().data() + (n * ch + c) * hw;
                for (int64_t i = 0; i < hw; ++i) s += p[i];
            }
            T mu = s / static_cast<T>(m);
            T sq = T(0);
            for (int64_t n = 0; n < batch; ++n) {
                const T* p = x.data().data() + (n * ch + c) * hw;
                for (int64_t i = 0; i < hw; ++i) {
                    T dlt = p[i] - mu;
                    sq += dlt * dlt;
                }
            }
            mean[static_cast<size_t>(c)] = mu;
            var[static_cast<size_t>(c)] = sq / static_cast<T>(m);
            stats.mean[static_cast<size_t>(c)] = (T(1) - momentum) * stats.mean[static_cast<size_t>(c)] + momentum * mu;
            stats.var[static_cast<size_t>(c)] = (T(1) - momentum) * stats.var[static_cast<size_t>(c)] + momentum * var[static_cast<size_t>(c)];
        }
    } else {
        mean = stats.mean;
        var = stats.var;
    }

    std::vector<T> xhat(x.data().size()), out(x.data().size());
    std::vector<T> inv_sd(static_cast<size_t>(ch));
    for (int64_t c = 0; c < ch; ++c) inv_sd[static_cast<size_t>(c)] = T(1) / std::sqrt(var[static_cast<size_t>(c)] + eps);
    for (int64_t n = 0; n < batch; ++n) {
        for (int64_t c = 0; c < ch; ++c) {
            const T* p = x.data().data() + (n * ch + c) * hw;
            T* xh = xhat.data() + (n * ch + c) * hw;
            T* y = out.data() + (n * ch + c) * hw;
            T mu = mean[static_cast<size_t>(c)], isd = inv_sd[static_cast<size_t>(c)];
            T g = gamma.data()[static_cast<size_t>(c)], bt = beta.data()[static_cast<size_t>(c)];
            for (int64_t i = 0; i < hw; ++i) {
                xh[i] = (p[i] - mu) * isd;
                y[i] = g * xh[i] + bt;
            }
        }
    }

    auto xi = x.impl();
    auto gi = gamma.impl();
    auto bi = beta.impl();
    auto saved_xhat = std::make_shared<std::vector<T>>(std::move(xhat));
    auto saved_isd = std::make_shared<std::vector<T>>(std::move(inv_sd));
    return make_op<T>("batchnorm", x.shape(), std::move(out), {xi, gi, bi},
                      [=](const detail::TensorImpl<T>& o) {
                          const std::vector<T>& gy = o.grad;
                          const std::vector<T>& xh = *saved_xhat;
                          for (int64_t c = 0; c < ch; ++c) {
                              T sum_gy = T(0), sum_gy_xh = T(0);
                              for (int64_t n = 0; n < batch; ++n) {
                                  const T* g = gy.data() + (n * ch + c) * hw;
                                  const T* h = xh.data() + (n * ch + c) * hw;
                                  for (int64_t i = 0; i < hw; ++i) {
                                      sum_gy += g[i];
                                      sum_gy_xh += g[i] * h[i];
                                  }
                              }
                              if (gi->needs_path()) {
                                  gi->ensure_grad();
                                  gi->grad[static_cast<size_t>(c)] += sum_gy_xh;
                              }
                              if (bi->needs_path()) {
                                  bi->ensure_grad();
                                  bi->grad[static_cast<size_t>(c)] += sum_gy;
                              }
                              if (xi->needs_path()) {
                                  xi->ensure_grad();
                                  T g = gi->data[static_cast<size_t>(c)];
                                  T isd = (*saved_isd)[static_cast<size_t>(c)];
                                  if (training) {
                                      T inv_m = T(1) / static_cast<T>(m);
                                      for (int64_t n = 0; n < batch; ++n) {
                                          const T* gp = gy.data() + (n * ch + c) * hw;
                                          const T* h = xh.data() + (n * ch + c) * hw;
                                          T* gx = xi->grad.data() + (n * ch + c) * hw;
                                          for (int64_t i = 0; i < hw; ++i)
                                              gx[i] += g * isd * (gp[i] - inv_m * sum_gy - h[i] * inv_m * sum_gy_xh);
                                      }
                                  } else {
                                      for (int64_t n = 0; n < batch; ++n) {
                                          const T* gp = gy.data() + (n * ch + c) * hw;
                                          T* gx = xi->grad.data() + (n * ch + c) * hw;
                                          for (int64_t i = 0; i < hw; ++i) gx[i] += g * isd * gp[i];
                                      }
                                  }
                              }
                          }
                      });
}

// Affine map: x[N x F] * w[F x M] + b[M].
template <class T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    using namespace detail;
    if (x.shape().size() != 2 || w.shape().size() != 2)
        throw DimensionError("linear: expected 2-d input and weight");
    int64_t n = x.dim(0), f = x.dim(1), mcols = w.dim(1);
    if (w.dim(0) != f) throw DimensionError("linear: weight rows " + std::to_string(w.dim(0)) +
                                            " do not match input features " + std::to_string(f));
    if (b.numel() != mcols) throw DimensionError("linear: bias size mismatch");

    std::vector<T> out(static_cast<size_t>(n * mcols));
    gemm(n, f, mcols, x.data().data(), w.data().data(), out.data(), false);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < mcols; ++j) out[static_cast<size_t>(i * mcols + j)] += b.data()[static_cast<size_t>(j)];

    auto xi = x.impl();
    auto wi = w.impl();
    auto bi = b.impl();
    return make_op<T>("linear", {static_cast<int>(n), static_cast<int>(mcols)}, std::move(out), {xi, wi, bi},
                      [=](const detail::TensorImpl<T>& o) {
                          const std::vector<T>& gy = o.grad;
                          if (xi->needs_path()) {
                              xi->ensure_grad();
                              gemm_nt(n, mcols, f, gy.data(), wi->data.data(), xi->grad.data(), true);
                          }
                          if (wi->needs_path()) {
                              wi->ensure_grad();
                              gemm_tn(f, n, mcols, xi->data.data(), gy.data(), wi->grad.data(), true);
                          }
                          if (bi->needs_path()) {
                              bi->ensure_grad();
                              for (int64_t i = 0; i < n; ++i)
                                  for (int64_t j = 0; j < mcols; ++j) bi->grad[static_cast<size_t>(j)] += gy[static_cast<size_t>(i * mcols + j)];
                          }
                      });
}

// Mean over the spatial dimensions: NCHW -> N x C.
template <class T>
TensorT<T> global_avg_pool(const TensorT<T>& x) {
    using namespace detail;
    if (x.shape().size() != 4) throw DimensionError("global_avg_pool: input must be NCHW");
    int64_t batch = x.dim(0), ch = x.dim(1), hw = static_cast<int64_t>(x.dim(2)) * x.dim(3);
    if (hw < 1) throw DimensionError("global_avg_pool: empty spatial extent");
    std::vector<T> out(static_cast<size_t>(batch * ch));
    for (int64_t n = 0; n < batch; ++n)
        for (int64_t c = 0; c < ch; ++c) {
            const T* p = x.data().data() + (n * ch + c) * hw;
            T s = T(0);
            for (int64_t i = 0; i < hw; ++i) s += p[i];
            out[static_cast<size_t>(n * ch + c)] = s / static_cast<T>(hw);
        }
    auto xi = x.impl();
    return make_op<T>("global_avg_pool", {static_cast<int>(batch), static_cast<int>(ch)}, std::move(out), {xi},
                      [xi, batch, ch, hw](const detail::TensorImpl<T>& o) {
                          if (!xi->needs_path()) return;
                          xi->ensure_grad();
                          T inv = T(1) / static_cast<T>(hw);
                          for (int64_t n = 0; n < batch; ++n)
                              for (int64_t c = 0; c < ch; ++c) {
                                  T g = o.grad[static_cast<size_t>(n * ch + c)] * inv;
                                  T* gx = xi->grad.data() + (n * ch + c) * hw;
                                  for (int64_t i = 0; i < hw; ++i) gx[i] += g;
                              }
                      });
}

// Mean over rows of -log softmax(logits)[label], stabilized by max-subtraction.
template <class T>
TensorT<T> softmax_cross_entropy(const TensorT<T>& logits, const std::vector<int>& labels) {
    using namespace detail;
    if (logits.shape().size() != 2) throw DimensionError("softmax_cross_entropy: logits must be N x C");
    int64_t n = logits.dim(0), c = logits.dim(1);
    if (static_cast<int64_t>(labels.size()) != n) throw DimensionError("softmax_cross_entropy: one label per row required");
    for (int lbl : labels)
        if (lbl < 0 || lbl >= c)
            throw DimensionError("softmax_cross_entropy: label " + std::to_string(lbl) + " out of range [0," +
                                 std::to_string(c) + ")");

    std::vector<T> probs(static_cast<size_t>(n * c));
    T total = T(0);
    for (int64_t i = 0; i < n; ++i) {
        const T* row = logits.data().data() + i * c;
        T mx = row[0];
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        T denom = T(0);
        for (int64_t j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
        T log_denom = std::log(denom);
        total += log_denom - (row[labels[static_cast<size_t>(i)]] - mx);
        for (int64_t j = 0; j < c; ++j) probs[static_cast<size_t>(i * c + j)] = std::exp(row[j] - mx) / denom;
    }
    total /= static_cast<T>(n);

    auto li = logits.impl();
    auto saved_probs = std::make_shared<std::vector<T>>(std::move(probs));
    auto saved_labels = std::make_shared<std::vector<int>>(labels);
    return make_op<T>("softmax_cross_entropy", {1}, std::vector<T>{total}, {li},
                      [=](const detail::TensorImpl<T>& o) {
                          if (!li->needs_path()) return;
                          li->ensure_grad();
                          T g = o.grad[0] / static_cast<T>(n);
                          const auto& p = *saved_probs;
                          for (int64_t i = 0; i < n; ++i) {
                              for (int64_t j = 0; j < c; ++j)
                                  li->grad[static_cast<size_t>(i * c + j)] += g * p[static_cast<size_t>(i * c + j)];
                              li->grad[static_cast<size_t>(i * c + (*saved_labels)[static_cast<size_t>(i)])] -= g;
                          }
                      });
}

template <class T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    using namespace detail;
    if (a.shape() != b.shape())
        throw DimensionError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::vector<T> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    auto ai = a.impl();
    auto bi = b.impl();
    return make_op<T>("add", a.shape(), std::move(out), {ai, bi}, [ai, bi](const detail::TensorImpl<T>& o) {
        if (ai->needs_path()) accumulate(*ai, o.grad);
        if (bi->needs_path()) accumulate(*bi, o.grad);
    });
}

template <class T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    using namespace detail;
    if (a.shape() != b.shape())
        throw DimensionError("mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::vector<T> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    auto ai = a.impl();
    auto bi = b.impl();
    return make_op<T>("mul", a.shape(), std::move(out), {ai, bi}, [ai, bi](const detail::TensorImpl<T>& o) {
        if (ai->needs_path()) {
            ai->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) ai->grad[i] += o.grad[i] * bi->data[i];
        }
        if (bi->needs_path()) {
            bi->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) bi->grad[i] += o.grad[i] * ai->data[i];
        }
    });
}

template <class T>
TensorT<T> sum(const TensorT<T>& x) {
    using namespace detail;
    T s = T(0);
    for (const T& v : x.data()) s += v;
    auto xi = x.impl();
    return make_op<T>("sum", {1}, std::vector<T>{s}, {xi}, [xi](const detail::TensorImpl<T>& o) {
        if (!xi->needs_path()) return;
        xi->ensure_grad();
        for (T& g : xi->grad) g += o.grad[0];
    });
}

// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
// reachable requires_grad leaf; repeated calls without zeroing add up.
template <class T>
void backward(const TensorT<T>& loss) {
    using detail::TensorImpl;
    if (!loss.defined() || loss.numel() != 1) throw DimensionError("backward: loss must be a defined scalar");
    auto root = loss.impl();
    if (!root->grad_fn && !root->requires_grad) return;

    // Post-order DFS; reversal gives a valid reverse-topological visit order.
    std::vector<std::shared_ptr<TensorImpl<T>>> order;
    std::unordered_set<const TensorImpl<T>*> seen;
    std::vector<std::pair<std::shared_ptr<TensorImpl<T>>, size_t>> stack;
    stack.emplace_back(root, 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [impl, next] = stack.back();
        if (impl->grad_fn && next < impl->grad_fn->inputs.size()) {
            auto child = impl->grad_fn->inputs[next++];
            if (seen.insert(child.get()).second && child->grad_fn) stack.emplace_back(child, 0);
        } else {
            order.push_back(impl);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto& impl = *it;
        if (impl->grad_fn && !impl->grad.empty()) impl->grad_fn->backprop(*impl);
    }
}

}  // namespace amdl
