#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "amdl/checkpoint.hpp"
#include "amdl/network.hpp"
#include "amdl/optim.hpp"
#include "amdl/preprocess.hpp"

namespace amdl {

// joint      - one optimizer over every domain parameter, summed multi-exit loss
// blockwise  - stage s trains block-s adapters/BN and exit-s head on the
//              exit-s loss alone; finished stages stay frozen
// exits_only - no adapters; BN sites and heads are the only learners
enum class Strategy { joint, blockwise, exits_only };

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct TrainConfig {
    int epochs = 30;
    int batch_size = 32;
    double base_lr = 0.1;
    std::vector<int> milestones = {20, 26};  // lr steps down by lr_decay at each
    double lr_decay = 0.1;
    double momentum = 0.9;
    double weight_decay = -1.0;  // negative: derive from the train-split size
    Strategy strategy = Strategy::joint;
    uint64_t seed = 1;
    bool use_f64 = false;

    // 30 epochs with steps at 20/26: the 120/80/100 published schedule scaled
    // to a desk-sized run.
    static TrainConfig desk() { return {}; }
    static TrainConfig paper() {
        TrainConfig c;
        c.epochs = 120;
        c.milestones = {80, 100};
        c.batch_size = 128;
        return c;
    }

    void validate() const {
        if (epochs < 1) throw ConfigError("train config: epochs must be positive");
        if (batch_size < 2) throw ConfigError("train config: batch size must be at least 2 (batch-norm)");
        if (base_lr <= 0) throw ConfigError("train config: base_lr must be positive");
        for (size_t i = 0; i < milestones.size(); ++i) {
            if (milestones[i] >= epochs) throw ConfigError("train config: milestones must be below epochs");
            if (i > 0 && milestones[i] <= milestones[i - 1])
                throw ConfigError("train config: milestones must be strictly increasing");
        }
    }
};

// Piecewise-constant schedule: base_lr scaled by lr_decay once per milestone
// at or below `epoch`.
inline double lr_at(int epoch, const TrainConfig& cfg) {
    if (epoch < 0 || epoch >= cfg.epochs) throw ConfigError("lr_at: epoch out of range");
    double lr = cfg.base_lr;
    for (int m : cfg.milestones)
        if (epoch >= m) lr *= cfg.lr_decay;
    return lr;
}

// Smaller datasets get stronger regularization.
inline double weight_decay_for(int64_t train_size) {
    if (train_size <= 0) throw ConfigError("weight_decay_for: train size must be positive");
    if (train_size < 5000) return 5e-3;
    if (train_size < 50000) return 5e-4;
    return 1e-4;
}

// Sum of the per-exit cross entropies. The graph topology makes this realize
// every partial loss at once: parameters feeding block k receive exactly the
// gradient of the exits at or after k.
template <class T>
TensorT<T> multi_exit_loss(const std::vector<TensorT<T>>& logits, const std::vector<int>& labels) {
    if (logits.empty()) throw DimensionError("multi_exit_loss: need at least one exit");
    auto total = softmax_cross_entropy(logits[0], labels);
    for (size_t e = 1; e < logits.size(); ++e) total = add(total, softmax_cross_entropy(logits[e], labels));
    return total;
}

struct TrainHistory {
    struct Epoch {
        int epoch = 0;
        double lr = 0;
        std::vector<double> loss;  // mean train loss per exit
        std::vector<double> acc;   // val top-1 per exit
    };
    int num_exits = 0;
    std::vector<Epoch> epochs;
    int best_epoch = -1;  // by final-exit val accuracy
    double wall_seconds = 0;
};

std::string history_to_csv(const TrainHistory& h);
TrainHistory history_from_csv(const std::string& text);
void write_history_csv(const std::string& path, const TrainHistory& h);
TrainHistory read_history_csv(const std::string& path);

// Top-1 accuracy of one logit batch; ties resolve to the lowest class index.
template <class T>
int count_correct(const TensorT<T>& logits, const std::vector<int>& labels) {
    int n = logits.dim(0), c = logits.dim(1);
    int correct = 0;
    for (int i = 0; i < n; ++i) {
        const T* row = logits.data().data() + static_cast<int64_t>(i) * c;
        int best = 0;
        for (int j = 1; j < c; ++j)
            if (row[j] > row[best]) best = j;
        if (best == labels[static_cast<size_t>(i)]) ++correct;
    }
    return correct;
}

template <class T>
struct DomainDataT {
    PreparedDataset<T> train;
    PreparedDataset<T> val;
};

// Per-exit top-1 accuracy over a whole split, eval mode.
template <class T>
std::vector<double> evaluate(const BaseNetworkT<T>& base, DomainAdapterSetT<T>& dom, const PreparedDataset<T>& split,
                             int batch_size = 64) {
    if (split.count == 0) throw DimensionError("evaluate: empty split");
    NoGradGuard ng;
    int k = dom.num_exits();
    std::vector<int64_t> correct(static_cast<size_t>(k), 0);
    for (const auto& batch : make_batches(split.count, batch_size, 0, 0, false)) {
        auto x = split.gather(batch);
        auto labels = split.gather_labels(batch);
        auto logits = forward_multi_exit(base, dom, x, false);
        for (int e = 0; e < k; ++e) correct[static_cast<size_t>(e)] += count_correct(logits[static_cast<size_t>(e)], labels);
    }
    std::vector<double> acc(static_cast<size_t>(k));
    for (int e = 0; e < k; ++e) acc[static_cast<size_t>(e)] = static_cast<double>(correct[static_cast<size_t>(e)]) / split.count;
    return acc;
}

template <class T>
double evaluate_base(BaseNetworkT<T>& net, const PreparedDataset<T>& split, int batch_size = 64) {
    if (split.count == 0) throw DimensionError("evaluate: empty split");
    NoGradGuard ng;
    int64_t correct = 0;
    for (const auto& batch : make_batches(split.count, batch_size, 0, 0, false)) {
        auto x = split.gather(batch);
        auto labels = split.gather_labels(batch);
        correct += count_correct(forward_base(net, x, false), labels);
    }
    return static_cast<double>(correct) / split.count;
}

namespace detail {

inline void rethrow_with_position(const NumericError& e, int epoch, int batch) {
    throw NumericError("aborting at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ": " +
                       e.what());
}

}  // namespace detail

// Trains one domain against a frozen base. Returns the full history; when
// `best_out` is given it receives a copy of the adapter set at the epoch with
// the best final-exit val accuracy.
template <class T>
TrainHistory train_domain(const BaseNetworkT<T>& base, DomainAdapterSetT<T>& dom, const DomainDataT<T>& data,
                          const TrainConfig& cfg, DomainAdapterSetT<T>* best_out = nullptr) {
    cfg.validate();
    if (cfg.use_f64 != (sizeof(T) == 8))
        throw ConfigError("train_domain: config numeric width does not match the tensor type");
    if (!base.frozen()) throw ConfigError("train_domain: refusing to train against an unfrozen base");
    if (cfg.strategy == Strategy::exits_only && dom.adapted)
        throw ConfigError("train_domain: exits_only strategy expects a no-adapter domain");
    double wd = cfg.weight_decay < 0 ? weight_decay_for(data.train.count) : cfg.weight_decay;
    int k = dom.num_exits();

    TrainHistory history;
    history.num_exits = k;
    auto started = std::chrono::steady_clock::now();
    double best_acc = -1.0;

    auto record_epoch = [&](int epoch_index, double lr, std::vector<double> losses) {
        TrainHistory::Epoch row;
        row.epoch = epoch_index;
        row.lr = lr;
        row.loss = std::move(losses);
        row.acc = evaluate(base, dom, data.val);
        if (row.acc.back() > best_acc) {
            best_acc = row.acc.back();
            history.best_epoch = epoch_index;
            if (best_out) *best_out = dom.clone();
        }
        history.epochs.push_back(std::move(row));
    };

    if (cfg.strategy == Strategy::blockwise) {
        // stage s: exit-s loss only; earlier stages frozen, their BN fixed
        int epoch_index = 0;
        for (int stage = 1; stage <= k; ++stage) {
            std::vector<TensorT<T>> params;
            dom.append_block_params(params, stage - 1);
            dom.append_head_params(params, stage);
            SgdT<T> opt(params, static_cast<T>(lr_at(0, cfg)), static_cast<T>(cfg.momentum), static_cast<T>(wd));
            for (int epoch = 0; epoch < cfg.epochs; ++epoch, ++epoch_index) {
                double lr = lr_at(epoch, cfg);
                opt.set_lr(static_cast<T>(lr));
                double loss_sum = 0;
                int batches = 0;
                for (const auto& batch : make_batches(data.train.count, cfg.batch_size, cfg.seed, epoch_index, true)) {
                    auto x = data.train.gather(batch);
                    auto labels = data.train.gather_labels(batch);
                    try {
                        auto logits = forward_exit(base, dom, x, true, stage, stage - 1);
                        auto loss = softmax_cross_entropy(logits, labels);
                        loss_sum += static_cast<double>(loss.item());
                        backward(loss);
                    } catch (const NumericError& e) {
                        detail::rethrow_with_position(e, epoch_index, batches);
                    }
                    opt.step();
                    ++batches;
                }
                std::vector<double> losses(static_cast<size_t>(k), 0.0);
                losses[static_cast<size_t>(stage - 1)] = loss_sum / batches;
                record_epoch(epoch_index, lr, std::move(losses));
            }
            for (auto& p : params) p.set_requires_grad(false);
        }
        for (auto& p : dom.trainable_params()) p.set_requires_grad(true);
    } else {
        auto params = dom.trainable_params();
        SgdT<T> opt(params, static_cast<T>(lr_at(0, cfg)), static_cast<T>(cfg.momentum), static_cast<T>(wd));
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            double lr = lr_at(epoch, cfg);
            opt.set_lr(static_cast<T>(lr));
            std::vector<double> loss_sum(static_cast<size_t>(k), 0.0);
            int batches = 0;
            for (const auto& batch : make_batches(data.train.count, cfg.batch_size, cfg.seed, epoch, true)) {
                auto x = data.train.gather(batch);
                auto labels = data.train.gather_labels(batch);
                try {
                    auto logits = forward_multi_exit(base, dom, x, true);
                    std::vector<TensorT<T>> exit_losses;
                    exit_losses.reserve(logits.size());
                    for (auto& lg : logits) exit_losses.push_back(softmax_cross_entropy(lg, labels));
                    auto total = exit_losses[0];
                    for (size_t e = 1; e < exit_losses.size(); ++e) total = add(total, exit_losses[e]);
                    for (int e = 0; e < k; ++e) loss_sum[static_cast<size_t>(e)] += static_cast<double>(exit_losses[static_cast<size_t>(e)].item());
                    backward(total);
                } catch (const NumericError& e) {
                    detail::rethrow_with_position(e, epoch, batches);
                }
                opt.step();
                ++batches;
            }
            for (auto& s : loss_sum) s /= batches;
            record_epoch(epoch, lr, std::move(loss_sum));
        }
    }

    history.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return history;
}

// Standard single-exit training of the whole base network plus its classifier.
template <class T>
TrainHistory train_base(BaseNetworkT<T>& net, const DomainDataT<T>& data, const TrainConfig& cfg,
                        BaseNetworkT<T>* best_out = nullptr) {
    cfg.validate();
    if (cfg.use_f64 != (sizeof(T) == 8))
        throw ConfigError("train_base: config numeric width does not match the tensor type");
    if (net.frozen()) throw ConfigError("train_base: base network is frozen");
    double wd = cfg.weight_decay < 0 ? weight_decay_for(data.train.count) : cfg.weight_decay;

    TrainHistory history;
    history.num_exits = 1;
    auto started = std::chrono::steady_clock::now();
    double best_acc = -1.0;

    auto params = net.trainable_params();
    SgdT<T> opt(params, static_cast<T>(lr_at(0, cfg)), static_cast<T>(cfg.momentum), static_cast<T>(wd));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = lr_at(epoch, cfg);
        opt.set_lr(static_cast<T>(lr));
        double loss_sum = 0;
        int batches = 0;
        for (const auto& batch : make_batches(data.train.count, cfg.batch_size, cfg.seed, epoch, true)) {
            auto x = data.train.gather(batch);
            auto labels = data.train.gather_labels(batch);
            try {
                auto loss = softmax_cross_entropy(forward_base(net, x, true), labels);
                loss_sum += static_cast<double>(loss.item());
                backward(loss);
            } catch (const NumericError& e) {
                detail::rethrow_with_position(e, epoch, batches);
            }
            opt.step();
            ++batches;
        }
        TrainHistory::Epoch row;
        row.epoch = epoch;
        row.lr = lr;
        row.loss = {loss_sum / batches};
        row.acc = {evaluate_base(net, data.val)};
        if (row.acc[0] > best_acc) {
            best_acc = row.acc[0];
            history.best_epoch = epoch;
            if (best_out) *best_out = net.clone();
        }
        history.epochs.push_back(std::move(row));
    }
    history.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return history;
}

}  // namespace amdl
