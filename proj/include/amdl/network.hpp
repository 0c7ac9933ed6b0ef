#pragma once

#include <optional>
#include <string>
#include <vector>

#include "amdl/crc32.hpp"
#include "amdl/rng.hpp"
#include "amdl/tensor.hpp"

namespace amdl {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct NetworkConfig {
    int input_h = 32;
    int input_w = 32;
    int input_c = 3;
    int num_blocks = 3;  // K
    int units_per_block = 1;
    std::vector<int> block_channels = {8, 16, 32};
    int kernel_size = 3;  // c, odd

    // Three macro-blocks of four two-conv residual units, 64/128/256 channels,
    // 72x72x3 inputs.
    static NetworkConfig resnet26() {
        NetworkConfig c;
        c.input_h = 72;
        c.input_w = 72;
        c.input_c = 3;
        c.num_blocks = 3;
        c.units_per_block = 4;
        c.block_channels = {64, 128, 256};
        c.kernel_size = 3;
        return c;
    }

    // Desk-scale analogue: one unit per block, 8/16/32 channels, 32x32x3.
    static NetworkConfig tiny() { return NetworkConfig{}; }

    void validate() const {
        if (num_blocks < 1) throw DimensionError("config: need at least one block");
        if (units_per_block < 1) throw DimensionError("config: need at least one unit per block");
        if (static_cast<int>(block_channels.size()) != num_blocks)
            throw DimensionError("config: block_channels must list one channel count per block");
        for (int ch : block_channels)
            if (ch < 1) throw DimensionError("config: channel counts must be positive");
        if (kernel_size < 1 || kernel_size % 2 == 0) throw DimensionError("config: kernel size must be odd");
        if (input_h < (1 << (num_blocks - 1)) || input_w < (1 << (num_blocks - 1)))
            throw DimensionError("config: input too small for the per-block downsampling");
        if (input_c < 1) throw DimensionError("config: input channels must be positive");
    }

    std::string canonical() const {
        std::string s = "h=" + std::to_string(input_h) + ";w=" + std::to_string(input_w) + ";c=" +
                        std::to_string(input_c) + ";blocks=" + std::to_string(num_blocks) + ";units=" +
                        std::to_string(units_per_block) + ";channels=";
        for (size_t i = 0; i < block_channels.size(); ++i)
            s += (i ? "/" : "") + std::to_string(block_channels[i]);
        s += ";kernel=" + std::to_string(kernel_size);
        return s;
    }

    uint32_t hash() const {
        std::string s = canonical();
        return crc32(s.data(), s.size());
    }

    static NetworkConfig parse(const std::string& canonical_str);
    static NetworkConfig preset(const std::string& name) {
        if (name == "tiny") return tiny();
        if (name == "resnet26") return resnet26();
        throw ConfigError("unknown network preset '" + name + "' (expected tiny or resnet26)");
    }

    bool operator==(const NetworkConfig&) const = default;
};

inline NetworkConfig NetworkConfig::parse(const std::string& str) {
    NetworkConfig c;
    c.block_channels.clear();
    size_t pos = 0;
    while (pos < str.size()) {
        size_t semi = str.find(';', pos);
        if (semi == std::string::npos) semi = str.size();
        std::string field = str.substr(pos, semi - pos);
        size_t eq = field.find('=');
        if (eq == std::string::npos) throw ConfigError("bad config field '" + field + "'");
        std::string key = field.substr(0, eq), val = field.substr(eq + 1);
        if (key == "h") c.input_h = std::stoi(val);
        else if (key == "w") c.input_w = std::stoi(val);
        else if (key == "c") c.input_c = std::stoi(val);
        else if (key == "blocks") c.num_blocks = std::stoi(val);
        else if (key == "units") c.units_per_block = std::stoi(val);
        else if (key == "kernel") c.kernel_size = std::stoi(val);
        else if (key == "channels") {
            size_t p = 0;
            while (p < val.size()) {
                size_t slash = val.find('/', p);
                if (slash == std::string::npos) slash = val.size();
                c.block_channels.push_back(std::stoi(val.substr(p, slash - p)));
                p = slash + 1;
            }
        } else {
            throw ConfigError("unknown config field '" + key + "'");
        }
        pos = semi + 1;
    }
    c.validate();
    return c;
}

// Exit-module variants: plain pool+classifier, pooled MLP, or 1x1 conv.
struct ExitTopology {
    enum class Kind { basic, mlp, conv1x1 };
    Kind kind = Kind::basic;
    std::vector<int> mlp_widths;

    static ExitTopology basic() { return {}; }
    static ExitTopology mlp(std::vector<int> widths) {
        if (widths.empty()) throw ConfigError("mlp exit topology needs at least one width");
        return {Kind::mlp, std::move(widths)};
    }
    static ExitTopology conv1x1() { return {Kind::conv1x1, {}}; }

    static ExitTopology parse(const std::string& s) {
        if (s == "basic") return basic();
        if (s == "conv1x1") return conv1x1();
        if (s.rfind("mlp:", 0) == 0) {
            std::vector<int> widths;
            size_t p = 4;
            while (p < s.size()) {
                size_t comma = s.find(',', p);
                if (comma == std::string::npos) comma = s.size();
                int w = std::stoi(s.substr(p, comma - p));
                if (w < 1) throw ConfigError("mlp width must be positive");
                widths.push_back(w);
                p = comma + 1;
            }
            return mlp(std::move(widths));
        }
        throw ConfigError("unknown exit topology '" + s + "' (expected basic, mlp:<w>[,<w>...], or conv1x1)");
    }

    std::string tag() const {
        switch (kind) {
            case Kind::basic: return "basic";
            case Kind::conv1x1: return "conv1x1";
            case Kind::mlp: {
                std::string s = "mlp:";
                for (size_t i = 0; i < mlp_widths.size(); ++i) s += (i ? "," : "") + std::to_string(mlp_widths[i]);
                return s;
            }
        }
        return "basic";
    }

    bool operator==(const ExitTopology&) const = default;
};

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

template <class T>
struct Conv2dLayer {
    TensorT<T> w, b;
    int stride = 1, pad = 0;

    static Conv2dLayer make(int in_ch, int out_ch, int k, int stride, int pad, CounterRng& rng,
                            double init_scale = 1.0) {
        Conv2dLayer l;
        l.stride = stride;
        l.pad = pad;
        double sd = init_scale * std::sqrt(2.0 / (static_cast<double>(in_ch) * k * k));
        std::vector<T> wdata(static_cast<size_t>(out_ch) * in_ch * k * k);
        for (auto& v : wdata) v = static_cast<T>(rng.next_normal() * sd);
        l.w = TensorT<T>::from_data({out_ch, in_ch, k, k}, std::move(wdata), true);
        l.b = TensorT<T>({out_ch}, T(0), true);
        return l;
    }

    TensorT<T> forward(const TensorT<T>& x) const { return conv2d(x, w, b, stride, pad); }
    int in_channels() const { return w.dim(1); }
    int out_channels() const { return w.dim(0); }
    int64_t param_count() const { return w.numel() + b.numel(); }
};

template <class T>
struct BatchNormLayer {
    TensorT<T> gamma, beta;
    BatchNormStats<T> stats;
    T eps = T(1e-5);
    T momentum = T(0.1);

    static BatchNormLayer make(int ch) {
        BatchNormLayer l;
        l.gamma = TensorT<T>({ch}, T(1), true);
        l.beta = TensorT<T>({ch}, T(0), true);
        l.stats = BatchNormStats<T>(ch);
        return l;
    }

    TensorT<T> forward(const TensorT<T>& x, bool training) {
        return batchnorm(x, gamma, beta, stats, training, eps, momentum);
    }
    int channels() const { return gamma.dim(0); }
    int64_t param_count() const { return gamma.numel() + beta.numel(); }
};

template <class T>
struct LinearLayer {
    TensorT<T> w, b;

    static LinearLayer make(int in_f, int out_f, CounterRng& rng) {
        LinearLayer l;
        double sd = std::sqrt(2.0 / static_cast<double>(in_f));
        std::vector<T> wdata(static_cast<size_t>(in_f) * out_f);
        for (auto& v : wdata) v = static_cast<T>(rng.next_normal() * sd);
        l.w = TensorT<T>::from_data({in_f, out_f}, std::move(wdata), true);
        l.b = TensorT<T>({out_f}, T(0), true);
        return l;
    }

    TensorT<T> forward(const TensorT<T>& x) const { return linear(x, w, b); }
    int64_t param_count() const { return w.numel() + b.numel(); }
};

// ---------------------------------------------------------------------------
// Residual units
// ---------------------------------------------------------------------------

// Frozen convolutional part of one pre-activation residual unit. The first
// unit of every block after the first downsamples with stride 2 and a 1x1
// projection shortcut; the projection is never adapted.
template <class T>
struct UnitParams {
    Conv2dLayer<T> conv1, conv2;
    std::optional<Conv2dLayer<T>> proj;
    int in_ch = 0, out_ch = 0, stride = 1;

    int64_t param_count() const {
        return conv1.param_count() + conv2.param_count() + (proj ? proj->param_count() : 0);
    }
};

// Normalization sites of one unit; owned per domain.
template <class T>
struct UnitBn {
    BatchNormLayer<T> bn1;  // over the unit input
    BatchNormLayer<T> bn2;  // over conv1 output
    int64_t param_count() const { return bn1.param_count() + bn2.param_count(); }
};

// Two 1x1 filter banks running in parallel with the unit's convolutions.
template <class T>
struct UnitAdapters {
    Conv2dLayer<T> a1, a2;
    int64_t param_count() const { return a1.param_count() + a2.param_count(); }
};

// Sum of a frozen convolution and a parallel 1x1 adapter over the same input,
// then the activation. With a zero adapter the result follows the exact same
// arithmetic path as the plain convolution plus zeros.
template <class T>
TensorT<T> conv_pair_sum(const TensorT<T>& x, const Conv2dLayer<T>& base, const Conv2dLayer<T>& adapter) {
    if (adapter.w.dim(2) != 1 || adapter.w.dim(3) != 1) throw DimensionError("adapter filters must be 1x1");
    if (adapter.in_channels() != base.in_channels() || adapter.out_channels() != base.out_channels())
        throw DimensionError("adapter channels " + std::to_string(adapter.in_channels()) + "->" +
                             std::to_string(adapter.out_channels()) + " do not match base convolution " +
                             std::to_string(base.in_channels()) + "->" + std::to_string(base.out_channels()));
    return add(base.forward(x), conv2d(x, adapter.w, adapter.b, base.stride, 0));
}

template <class T>
TensorT<T> adapted_conv(const TensorT<T>& x, const Conv2dLayer<T>& base, const Conv2dLayer<T>& adapter) {
    return relu(conv_pair_sum(x, base, adapter));
}

// ---------------------------------------------------------------------------
// Base network
// ---------------------------------------------------------------------------

template <class T>
struct NamedBufferRef {
    std::string name;
    Shape shape;
    std::vector<T>* data;
};

template <class T>
class DomainAdapterSetT;

// The shared backbone: a stem convolution and K blocks of residual units,
// plus the base-training domain's own BN set and classifier. Once frozen, no
// buffer listed by visit_buffers may change under any domain training.
template <class T>
class BaseNetworkT {
public:
    NetworkConfig config;
    int num_classes = 0;
    Conv2dLayer<T> stem;
    std::vector<std::vector<UnitParams<T>>> blocks;
    std::vector<std::vector<UnitBn<T>>> bn;
    BatchNormLayer<T> final_bn;
    LinearLayer<T> classifier;

    bool frozen() const { return frozen_; }
    uint32_t frozen_checksum() const { return frozen_checksum_; }

    // Clears requires_grad on every base parameter and records the checksum.
    void freeze() {
        for (auto& p : trainable_params()) p.set_requires_grad(false);
        frozen_ = true;
        frozen_checksum_ = checksum();
    }

    void mark_frozen(bool value) {
        frozen_ = value;
        if (frozen_) {
            for (auto& p : trainable_params()) p.set_requires_grad(false);
            frozen_checksum_ = checksum();
        }
    }

    // CRC over every buffer (parameters and running statistics) in a fixed order.
    uint32_t checksum() const {
        uint32_t c = 0;
        const_cast<BaseNetworkT*>(this)->visit_buffers([&](const NamedBufferRef<T>& ref) {
            c = crc32(ref.data->data(), ref.data->size() * sizeof(T), c);
        });
        return c;
    }

    std::vector<TensorT<T>> trainable_params() {
        std::vector<TensorT<T>> out;
        out.push_back(stem.w);
        out.push_back(stem.b);
        for (size_t k = 0; k < blocks.size(); ++k)
            for (size_t u = 0; u < blocks[k].size(); ++u) {
                auto& unit = blocks[k][u];
                auto& ubn = bn[k][u];
                out.insert(out.end(), {ubn.bn1.gamma, ubn.bn1.beta, unit.conv1.w, unit.conv1.b, ubn.bn2.gamma,
                                       ubn.bn2.beta, unit.conv2.w, unit.conv2.b});
                if (unit.proj) {
                    out.push_back(unit.proj->w);
                    out.push_back(unit.proj->b);
                }
            }
        out.insert(out.end(), {final_bn.gamma, final_bn.beta, classifier.w, classifier.b});
        return out;
    }

    template <class Fn>
    void visit_buffers(Fn&& fn) {
        auto tensor = [&](const std::string& name, TensorT<T>& t) { fn(NamedBufferRef<T>{name, t.shape(), &t.data()}); };
        auto stats = [&](const std::string& name, BatchNormLayer<T>& l) {
            fn(NamedBufferRef<T>{name + ".running_mean", {l.channels()}, &l.stats.mean});
            fn(NamedBufferRef<T>{name + ".running_var", {l.channels()}, &l.stats.var});
        };
        tensor("stem.w", stem.w);
        tensor("stem.b", stem.b);
        for (size_t k = 0; k < blocks.size(); ++k)
            for (size_t u = 0; u < blocks[k].size(); ++u) {
                std::string prefix = "block" + std::to_string(k + 1) + ".unit" + std::to_string(u + 1) + ".";
                auto& unit = blocks[k][u];
                auto& ubn = bn[k][u];
                tensor(prefix + "bn1.gamma", ubn.bn1.gamma);
                tensor(prefix + "bn1.beta", ubn.bn1.beta);
                stats(prefix + "bn1", ubn.bn1);
                tensor(prefix + "conv1.w", unit.conv1.w);
                tensor(prefix + "conv1.b", unit.conv1.b);
                tensor(prefix + "bn2.gamma", ubn.bn2.gamma);
                tensor(prefix + "bn2.beta", ubn.bn2.beta);
                stats(prefix + "bn2", ubn.bn2);
                tensor(prefix + "conv2.w", unit.conv2.w);
                tensor(prefix + "conv2.b", unit.conv2.b);
                if (unit.proj) {
                    tensor(prefix + "proj.w", unit.proj->w);
                    tensor(prefix + "proj.b", unit.proj->b);
                }
            }
        tensor("final_bn.gamma", final_bn.gamma);
        tensor("final_bn.beta", final_bn.beta);
        stats("final_bn", final_bn);
        tensor("classifier.w", classifier.w);
        tensor("classifier.b", classifier.b);
    }

    BaseNetworkT clone() const {
        BaseNetworkT out = *this;
        auto deep = [](TensorT<T>& t) { t = t.clone_detached(); };
        out.visit_tensors_for_clone(deep);
        return out;
    }

private:
    template <class Fn>
    void visit_tensors_for_clone(Fn&& deep) {
        deep(stem.w);
        deep(stem.b);
        for (auto& blk : blocks)
            for (auto& unit : blk) {
                deep(unit.conv1.w);
                deep(unit.conv1.b);
                deep(unit.conv2.w);
                deep(unit.conv2.b);
                if (unit.proj) {
                    deep(unit.proj->w);
                    deep(unit.proj->b);
                }
            }
        for (auto& blk : bn)
            for (auto& ubn : blk) {
                deep(ubn.bn1.gamma);
                deep(ubn.bn1.beta);
                deep(ubn.bn2.gamma);
                deep(ubn.bn2.beta);
            }
        deep(final_bn.gamma);
        deep(final_bn.beta);
        deep(classifier.w);
        deep(classifier.b);
    }

    bool frozen_ = false;
    uint32_t frozen_checksum_ = 0;
};

using BaseNetwork = BaseNetworkT<float>;

template <class T>
BaseNetworkT<T> build_base(const NetworkConfig& config, int num_classes, uint64_t seed) {
    config.validate();
    if (num_classes < 2) throw DimensionError("build_base: need at least two classes");
    CounterRng rng(CounterRng::derive(seed, "base-init"));
    int k = config.kernel_size;
    int pad = (k - 1) / 2;

    BaseNetworkT<T> net;
    net.config = config;
    net.num_classes = num_classes;
    net.stem = Conv2dLayer<T>::make(config.input_c, config.block_channels[0], k, 1, pad, rng);
    net.blocks.resize(static_cast<size_t>(config.num_blocks));
    net.bn.resize(static_cast<size_t>(config.num_blocks));
    int in_ch = config.block_channels[0];
    for (int blk = 0; blk < config.num_blocks; ++blk) {
        int out_ch = config.block_channels[static_cast<size_t>(blk)];
        for (int u = 0; u < config.units_per_block; ++u) {
            int stride = (blk > 0 && u == 0) ? 2 : 1;
            UnitParams<T> unit;
            unit.in_ch = in_ch;
            unit.out_ch = out_ch;
            unit.stride = stride;
            UnitBn<T> ubn;
            ubn.bn1 = BatchNormLayer<T>::make(in_ch);
            unit.conv1 = Conv2dLayer<T>::make(in_ch, out_ch, k, stride, pad, rng);
            ubn.bn2 = BatchNormLayer<T>::make(out_ch);
            unit.conv2 = Conv2dLayer<T>::make(out_ch, out_ch, k, 1, pad, rng);
            if (stride != 1 || in_ch != out_ch) unit.proj = Conv2dLayer<T>::make(in_ch, out_ch, 1, stride, 0, rng);
            net.blocks[static_cast<size_t>(blk)].push_back(std::move(unit));
            net.bn[static_cast<size_t>(blk)].push_back(std::move(ubn));
            in_ch = out_ch;
        }
    }
    net.final_bn = BatchNormLayer<T>::make(in_ch);
    net.classifier = LinearLayer<T>::make(in_ch, num_classes, rng);
    return net;
}

// ---------------------------------------------------------------------------
// Domain adapter sets
// ---------------------------------------------------------------------------

template <class T>
struct ExitHeadT {
    BatchNormLayer<T> bn;
    std::vector<LinearLayer<T>> mlp;
    std::optional<Conv2dLayer<T>> conv;
    LinearLayer<T> classifier;
};

// Everything one domain adds on top of the frozen base: per-unit BN
// replacements, optional 1x1 adapters, early-exit heads, and the final
// classifier. Distinct domains own disjoint parameter collections.
template <class T>
class DomainAdapterSetT {
public:
    std::string domain;
    uint32_t base_config_hash = 0;
    int num_classes = 0;
    ExitTopology topology;
    bool adapted = true;

    std::vector<std::vector<UnitBn<T>>> bn;
    std::vector<std::vector<UnitAdapters<T>>> adapters;  // empty when !adapted
    BatchNormLayer<T> final_bn;
    std::vector<ExitHeadT<T>> heads;  // exits 1..K-1
    LinearLayer<T> classifier;        // exit K

    int num_exits() const { return static_cast<int>(heads.size()) + 1; }

    std::vector<TensorT<T>> trainable_params() {
        std::vector<TensorT<T>> out;
        for (int k = 0; k < static_cast<int>(bn.size()); ++k) append_block_params(out, k);
        for (int e = 1; e <= num_exits(); ++e) append_head_params(out, e);
        return out;
    }

    // Parameters of block k's adapters and BN sites (k is 0-based).
    void append_block_params(std::vector<TensorT<T>>& out, int k) {
        for (size_t u = 0; u < bn[static_cast<size_t>(k)].size(); ++u) {
            auto& ubn = bn[static_cast<size_t>(k)][u];
            out.insert(out.end(), {ubn.bn1.gamma, ubn.bn1.beta, ubn.bn2.gamma, ubn.bn2.beta});
            if (adapted) {
                auto& ua = adapters[static_cast<size_t>(k)][u];
                out.insert(out.end(), {ua.a1.w, ua.a1.b, ua.a2.w, ua.a2.b});
            }
        }
    }

    // Parameters of exit head e (1-based; exit K is final_bn + classifier).
    void append_head_params(std::vector<TensorT<T>>& out, int e) {
        if (e == num_exits()) {
            out.insert(out.end(), {final_bn.gamma, final_bn.beta, classifier.w, classifier.b});
            return;
        }
        auto& head = heads[static_cast<size_t>(e - 1)];
        out.push_back(head.bn.gamma);
        out.push_back(head.bn.beta);
        if (head.conv) {
            out.push_back(head.conv->w);
            out.push_back(head.conv->b);
        }
        for (auto& fc : head.mlp) {
            out.push_back(fc.w);
            out.push_back(fc.b);
        }
        out.push_back(head.classifier.w);
        out.push_back(head.classifier.b);
    }

    template <class Fn>
    void visit_buffers(Fn&& fn) {
        auto tensor = [&](const std::string& name, TensorT<T>& t) { fn(NamedBufferRef<T>{name, t.shape(), &t.data()}); };
        auto stats = [&](const std::string& name, BatchNormLayer<T>& l) {
            fn(NamedBufferRef<T>{name + ".running_mean", {l.channels()}, &l.stats.mean});
            fn(NamedBufferRef<T>{name + ".running_var", {l.channels()}, &l.stats.var});
        };
        auto bn_site = [&](const std::string& name, BatchNormLayer<T>& l) {
            tensor(name + ".gamma", l.gamma);
            tensor(name + ".beta", l.beta);
            stats(name, l);
        };
        for (size_t k = 0; k < bn.size(); ++k)
            for (size_t u = 0; u < bn[k].size(); ++u) {
                std::string prefix = "block" + std::to_string(k + 1) + ".unit" + std::to_string(u + 1) + ".";
                bn_site(prefix + "bn1", bn[k][u].bn1);
                bn_site(prefix + "bn2", bn[k][u].bn2);
                if (adapted) {
                    auto& ua = adapters[k][u];
                    tensor(prefix + "adapter1.w", ua.a1.w);
                    tensor(prefix + "adapter1.b", ua.a1.b);
                    tensor(prefix + "adapter2.w", ua.a2.w);
                    tensor(prefix + "adapter2.b", ua.a2.b);
                }
            }
        for (size_t e = 0; e < heads.size(); ++e) {
            std::string prefix = "head" + std::to_string(e + 1) + ".";
            bn_site(prefix + "bn", heads[e].bn);
            if (heads[e].conv) {
                tensor(prefix + "conv.w", heads[e].conv->w);
                tensor(prefix + "conv.b", heads[e].conv->b);
            }
            for (size_t i = 0; i < heads[e].mlp.size(); ++i) {
                tensor(prefix + "fc" + std::to_string(i + 1) + ".w", heads[e].mlp[i].w);
                tensor(prefix + "fc" + std::to_string(i + 1) + ".b", heads[e].mlp[i].b);
            }
            tensor(prefix + "classifier.w", heads[e].classifier.w);
            tensor(prefix + "classifier.b", heads[e].classifier.b);
        }
        bn_site("final_bn", final_bn);
        tensor("classifier.w", classifier.w);
        tensor("classifier.b", classifier.b);
    }

    uint32_t checksum() const {
        uint32_t c = 0;
        const_cast<DomainAdapterSetT*>(this)->visit_buffers(
            [&](const NamedBufferRef<T>& ref) { c = crc32(ref.data->data(), ref.data->size() * sizeof(T), c); });
        return c;
    }

    // Copies BN parameters/statistics and the final classifier from the base
    // and zeroes every adapter, making the exit-K path reproduce the base
    // network exactly. Requires matching class counts.
    void align_with_base(const BaseNetworkT<T>& base) {
        if (base.num_classes != num_classes)
            throw DimensionError("align_with_base: class count mismatch (" + std::to_string(base.num_classes) +
                                 " vs " + std::to_string(num_classes) + ")");
        for (size_t k = 0; k < bn.size(); ++k)
            for (size_t u = 0; u < bn[k].size(); ++u) {
                copy_bn(bn[k][u].bn1, base.bn[k][u].bn1);
                copy_bn(bn[k][u].bn2, base.bn[k][u].bn2);
            }
        copy_bn(final_bn, base.final_bn);
        classifier.w.data() = base.classifier.w.data();
        classifier.b.data() = base.classifier.b.data();
        if (adapted)
            for (auto& blk : adapters)
                for (auto& ua : blk) {
                    std::fill(ua.a1.w.data().begin(), ua.a1.w.data().end(), T(0));
                    std::fill(ua.a1.b.data().begin(), ua.a1.b.data().end(), T(0));
                    std::fill(ua.a2.w.data().begin(), ua.a2.w.data().end(), T(0));
                    std::fill(ua.a2.b.data().begin(), ua.a2.b.data().end(), T(0));
                }
    }

    DomainAdapterSetT clone() const {
        DomainAdapterSetT out = *this;
        out.deep_copy_tensors();
        return out;
    }

private:
    static void copy_bn(BatchNormLayer<T>& dst, const BatchNormLayer<T>& src) {
        dst.gamma.data() = src.gamma.data();
        dst.beta.data() = src.beta.data();
        dst.stats = src.stats;
    }

    void deep_copy_tensors() {
        auto deep = [](TensorT<T>& t) { t = t.clone_detached(); };
        for (auto& blk : bn)
            for (auto& ubn : blk) {
                deep(ubn.bn1.gamma);
                deep(ubn.bn1.beta);
                deep(ubn.bn2.gamma);
                deep(ubn.bn2.beta);
            }
        for (auto& blk : adapters)
            for (auto& ua : blk) {
                deep(ua.a1.w);
                deep(ua.a1.b);
                deep(ua.a2.w);
                deep(ua.a2.b);
            }
        deep(final_bn.gamma);
        deep(final_bn.beta);
        for (auto& head : heads) {
            deep(head.bn.gamma);
            deep(head.bn.beta);
            if (head.conv) {
                deep(head.conv->w);
                deep(head.conv->b);
            }
            for (auto& fc : head.mlp) {
                deep(fc.w);
                deep(fc.b);
            }
            deep(head.classifier.w);
            deep(head.classifier.b);
        }
        deep(classifier.w);
        deep(classifier.b);
    }
};

using DomainAdapterSet = DomainAdapterSetT<float>;

// Adapter filters start near zero (He scaled by 0.1) so early training stays
// close to the frozen base path.
inline constexpr double kAdapterInitScale = 0.1;

template <class T>
DomainAdapterSetT<T> attach_domain(const BaseNetworkT<T>& base, const std::string& domain, int num_classes,
                                   const ExitTopology& topology, bool adapt, uint64_t seed) {
    if (!base.frozen()) throw ConfigError("attach_domain: base network must be frozen first");
    if (num_classes < 2) throw DimensionError("attach_domain: need at least two classes");
    CounterRng rng(CounterRng::derive(seed, "domain-init:" + domain));

    DomainAdapterSetT<T> dom;
    dom.domain = domain;
    dom.base_config_hash = base.config.hash();
    dom.num_classes = num_classes;
    dom.topology = topology;
    dom.adapted = adapt;

    int num_blocks = base.config.num_blocks;
    dom.bn.resize(static_cast<size_t>(num_blocks));
    if (adapt) dom.adapters.resize(static_cast<size_t>(num_blocks));
    for (int k = 0; k < num_blocks; ++k) {
        for (const auto& unit : base.blocks[static_cast<size_t>(k)]) {
            UnitBn<T> ubn;
            ubn.bn1 = BatchNormLayer<T>::make(unit.in_ch);
            ubn.bn2 = BatchNormLayer<T>::make(unit.out_ch);
            dom.bn[static_cast<size_t>(k)].push_back(std::move(ubn));
            if (adapt) {
                UnitAdapters<T> ua;
                ua.a1 = Conv2dLayer<T>::make(unit.in_ch, unit.out_ch, 1, unit.stride, 0, rng, kAdapterInitScale);
                ua.a2 = Conv2dLayer<T>::make(unit.out_ch, unit.out_ch, 1, 1, 0, rng, kAdapterInitScale);
                dom.adapters[static_cast<size_t>(k)].push_back(std::move(ua));
            }
        }
    }

    for (int e = 1; e < num_blocks; ++e) {
        int ch = base.config.block_channels[static_cast<size_t>(e - 1)];
        ExitHeadT<T> head;
        head.bn = BatchNormLayer<T>::make(ch);
        int feat = ch;
        switch (topology.kind) {
            case ExitTopology::Kind::basic:
                break;
            case ExitTopology::Kind::conv1x1:
                head.conv = Conv2dLayer<T>::make(ch, ch, 1, 1, 0, rng);
                break;
            case ExitTopology::Kind::mlp:
                for (int wdt : topology.mlp_widths) {
                    head.mlp.push_back(LinearLayer<T>::make(feat, wdt, rng));
                    feat = wdt;
                }
                break;
        }
        head.classifier = LinearLayer<T>::make(feat, num_classes, rng);
        dom.heads.push_back(std::move(head));
    }
    dom.final_bn = BatchNormLayer<T>::make(base.config.block_channels.back());
    dom.classifier = LinearLayer<T>::make(base.config.block_channels.back(), num_classes, rng);
    return dom;
}

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
TensorT<T> forward_unit(const TensorT<T>& x, const UnitParams<T>& unit, UnitBn<T>& ubn, const UnitAdapters<T>* ua,
                        bool training) {
    auto h1 = relu(ubn.bn1.forward(x, training));
    auto c1 = ua ? conv_pair_sum(h1, unit.conv1, ua->a1) : unit.conv1.forward(h1);
    auto h2 = relu(ubn.bn2.forward(c1, training));
    auto c2 = ua ? conv_pair_sum(h2, unit.conv2, ua->a2) : unit.conv2.forward(h2);
    auto skip = unit.proj ? unit.proj->forward(h1) : x;
    return add(c2, skip);
}

template <class T>
void check_input(const BaseNetworkT<T>& base, const TensorT<T>& x) {
    if (x.shape().size() != 4 || x.dim(1) != base.config.input_c || x.dim(2) != base.config.input_h ||
        x.dim(3) != base.config.input_w)
        throw DimensionError("forward: input " + shape_str(x.shape()) + " does not match configured shape (N," +
                             std::to_string(base.config.input_c) + "," + std::to_string(base.config.input_h) + "," +
                             std::to_string(base.config.input_w) + ")");
}

// Logits of exit e (1-based) from the output of block e.
template <class T>
TensorT<T> forward_head(DomainAdapterSetT<T>& dom, const TensorT<T>& block_out, int e, bool training) {
    if (e < dom.num_exits()) {
        auto& head = dom.heads[static_cast<size_t>(e - 1)];
        auto hb = relu(head.bn.forward(block_out, training));
        if (head.conv) hb = relu(head.conv->forward(hb));
        auto p = global_avg_pool(hb);
        for (auto& fc : head.mlp) p = relu(fc.forward(p));
        return head.classifier.forward(p);
    }
    auto f = relu(dom.final_bn.forward(block_out, training));
    return dom.classifier.forward(global_avg_pool(f));
}

}  // namespace detail

// Base network alone: stem, blocks with the base BN set, final classifier.
template <class T>
TensorT<T> forward_base(BaseNetworkT<T>& base, const TensorT<T>& x, bool training) {
    detail::check_input(base, x);
    auto h = base.stem.forward(x);
    for (size_t k = 0; k < base.blocks.size(); ++k)
        for (size_t u = 0; u < base.blocks[k].size(); ++u)
            h = detail::forward_unit(h, base.blocks[k][u], base.bn[k][u], static_cast<UnitAdapters<T>*>(nullptr),
                                     training);
    auto f = relu(base.final_bn.forward(h, training));
    return base.classifier.forward(global_avg_pool(f));
}

// Domain path: frozen base convolutions, the domain's BN everywhere, optional
// parallel adapters, and one logit tensor per exit. `max_exit` limits the
// traversal (block-wise training of early stages).
template <class T>
std::vector<TensorT<T>> forward_multi_exit(const BaseNetworkT<T>& base, DomainAdapterSetT<T>& dom,
                                           const TensorT<T>& x, bool training, int max_exit = -1) {
    detail::check_input(base, x);
    if (dom.base_config_hash != base.config.hash())
        throw ConfigError("forward_multi_exit: adapter set was built against a different base configuration");
    int num_exits = dom.num_exits();
    if (max_exit < 0) max_exit = num_exits;
    if (max_exit < 1 || max_exit > num_exits) throw DimensionError("forward_multi_exit: max_exit out of range");

    std::vector<TensorT<T>> logits;
    auto h = base.stem.forward(x);
    for (int k = 0; k < max_exit; ++k) {
        auto& block = base.blocks[static_cast<size_t>(k)];
        for (size_t u = 0; u < block.size(); ++u) {
            const UnitAdapters<T>* ua = dom.adapted ? &dom.adapters[static_cast<size_t>(k)][u] : nullptr;
            h = detail::forward_unit(h, block[u], dom.bn[static_cast<size_t>(k)][u], ua, training);
        }
        logits.push_back(detail::forward_head(dom, h, k + 1, training));
    }
    return logits;
}

// Single-exit forward for block-wise training of stage `exit_index` (1-based):
// only blocks 1..exit_index are traversed, and BN sites in blocks whose stage
// already finished (block index < train_bn_from_block, 0-based) normalize with
// their stored statistics even in training mode.
template <class T>
TensorT<T> forward_exit(const BaseNetworkT<T>& base, DomainAdapterSetT<T>& dom, const TensorT<T>& x, bool training,
                        int exit_index, int train_bn_from_block = 0) {
    detail::check_input(base, x);
    int num_exits = dom.num_exits();
    if (exit_index < 1 || exit_index > num_exits) throw DimensionError("forward_exit: exit index out of range");

    auto h = base.stem.forward(x);
    for (int k = 0; k < exit_index; ++k) {
        bool block_training = training && k >= train_bn_from_block;
        auto& block = base.blocks[static_cast<size_t>(k)];
        for (size_t u = 0; u < block.size(); ++u) {
            const UnitAdapters<T>* ua = dom.adapted ? &dom.adapters[static_cast<size_t>(k)][u] : nullptr;
            h = detail::forward_unit(h, block[u], dom.bn[static_cast<size_t>(k)][u], ua, block_training);
        }
    }
    return detail::forward_head(dom, h, exit_index, training);
}

// ---------------------------------------------------------------------------
// Parameter accounting
// ---------------------------------------------------------------------------

// Element counts of live tensors by scope. Every entry is a sum over actual
// buffers; closed-form expressions are only ever used to cross-check these.
struct ParamLedger {
    int64_t stem = 0;
    std::vector<int64_t> base_block;                 // frozen conv parameters per block
    std::vector<std::vector<int64_t>> unit_base;     // per-unit frozen conv parameters
    std::vector<std::vector<int64_t>> unit_adapter;  // per-unit adapter + BN parameters
    int64_t base_bn = 0;                             // base's own BN (gamma/beta, incl final BN)
    int64_t base_classifier = 0;
    std::vector<int64_t> adapter_block;  // per-block domain adapters + BN
    int64_t adapter_filters = 0;         // 1x1 filter banks alone (no BN)
    std::vector<int64_t> head;           // per exit: head BN + layers + classifier
    int64_t domain_final_bn = 0;

    int64_t base_shared() const {
        int64_t t = stem;
        for (int64_t b : base_block) t += b;
        return t;
    }
    int64_t domain_total() const {
        int64_t t = domain_final_bn;
        for (int64_t b : adapter_block) t += b;
        for (int64_t h : head) t += h;
        return t;
    }
    int64_t combined_total() const { return base_shared() + domain_total(); }

    // Everything needed to run inference through exit k (1-based).
    int64_t cumulative_at_exit(int k) const {
        int64_t t = stem;
        for (int j = 0; j < k; ++j) {
            t += base_block[static_cast<size_t>(j)];
            if (j < static_cast<int>(adapter_block.size())) t += adapter_block[static_cast<size_t>(j)];
        }
        if (k - 1 < static_cast<int>(head.size())) t += head[static_cast<size_t>(k - 1)];
        if (k == static_cast<int>(base_block.size())) t += domain_final_bn;
        return t;
    }
    double fraction_at_exit(int k) const {
        return static_cast<double>(cumulative_at_exit(k)) / static_cast<double>(combined_total());
    }
};

template <class T>
ParamLedger count_params(const BaseNetworkT<T>& base, const DomainAdapterSetT<T>* dom = nullptr) {
    ParamLedger led;
    led.stem = base.stem.param_count();
    led.base_block.resize(base.blocks.size(), 0);
    led.unit_base.resize(base.blocks.size());
    led.unit_adapter.resize(base.blocks.size());
    for (size_t k = 0; k < base.blocks.size(); ++k)
        for (size_t u = 0; u < base.blocks[k].size(); ++u) {
            int64_t n = base.blocks[k][u].param_count();
            led.unit_base[k].push_back(n);
            led.base_block[k] += n;
            led.base_bn += base.bn[k][u].param_count();
        }
    led.base_bn += base.final_bn.param_count();
    led.base_classifier = base.classifier.param_count();

    if (dom) {
        led.adapter_block.resize(dom->bn.size(), 0);
        for (size_t k = 0; k < dom->bn.size(); ++k)
            for (size_t u = 0; u < dom->bn[k].size(); ++u) {
                int64_t n = dom->bn[k][u].param_count();
                if (dom->adapted) {
                    n += dom->adapters[k][u].param_count();
                    led.adapter_filters += dom->adapters[k][u].param_count();
                }
                led.unit_adapter[k].push_back(n);
                led.adapter_block[k] += n;
            }
        led.domain_final_bn = dom->final_bn.param_count();
        led.head.resize(static_cast<size_t>(dom->num_exits()), 0);
        for (size_t e = 0; e < dom->heads.size(); ++e) {
            const auto& h = dom->heads[e];
            int64_t n = h.bn.param_count() + h.classifier.param_count();
            if (h.conv) n += h.conv->param_count();
            for (const auto& fc : h.mlp) n += fc.param_count();
            led.head[e] = n;
        }
        led.head.back() = dom->classifier.param_count();
    }
    return led;
}

}  // namespace amdl
