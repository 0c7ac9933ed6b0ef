#include <doctest.h>

#include <cmath>

#include "amdl/synth.hpp"
#include "amdl/train.hpp"

using namespace amdl;

namespace {

NetworkConfig micro_config() {
    NetworkConfig cfg;
    cfg.input_h = cfg.input_w = 16;
    cfg.num_blocks = 3;
    cfg.units_per_block = 1;
    cfg.block_channels = {4, 6, 8};
    cfg.kernel_size = 3;
    return cfg;
}

template <class T>
DomainDataT<T> synth_data(SynthKind kind, int n_train, int n_val, int side, uint64_t seed) {
    auto splits = generate_synthetic_splits(kind, n_train, n_val, n_val, side, seed);
    auto stats = compute_pixel_stats(splits[0], side, side);
    DomainDataT<T> data;
    data.train = preprocess<T>(splits[0], stats, side, side);
    data.val = preprocess<T>(splits[1], stats, side, side);
    return data;
}

TrainConfig micro_train(int epochs, uint64_t seed) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = 16;
    cfg.milestones = {};
    cfg.seed = seed;
    return cfg;
}

template <class T>
uint64_t params_fingerprint(std::vector<TensorT<T>> params) {
    uint32_t c = 0;
    for (auto& p : params) c = crc32(p.data().data(), p.data().size() * sizeof(T), c);
    return c;
}

}  // namespace

TEST_CASE("lr_at: published milestone schedule") {
    auto cfg = TrainConfig::paper();
    CHECK(lr_at(0, cfg) == doctest::Approx(0.1));
    CHECK(lr_at(79, cfg) == doctest::Approx(0.1));
    CHECK(lr_at(80, cfg) == doctest::Approx(0.01));
    CHECK(lr_at(85, cfg) == doctest::Approx(0.01));
    CHECK(lr_at(100, cfg) == doctest::Approx(0.001));
    CHECK(lr_at(110, cfg) == doctest::Approx(0.001));
    CHECK_THROWS_AS(lr_at(120, cfg), ConfigError);
    CHECK_THROWS_AS(lr_at(-1, cfg), ConfigError);

    auto desk = TrainConfig::desk();
    CHECK(desk.epochs == 30);
    CHECK(lr_at(19, desk) == doctest::Approx(0.1));
    CHECK(lr_at(20, desk) == doctest::Approx(0.01));
    CHECK(lr_at(26, desk) == doctest::Approx(0.001));

    TrainConfig bad = desk;
    bad.milestones = {20, 20};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.milestones = {40};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("weight_decay_for: size-dependent regularization table") {
    CHECK(weight_decay_for(1020) == doctest::Approx(5e-3));      // Flwr-sized
    CHECK(weight_decay_for(31367) == doctest::Approx(5e-4));     // GTSRB-sized
    CHECK(weight_decay_for(1232167) == doctest::Approx(1e-4));   // ImNet-sized
    CHECK(weight_decay_for(4999) == doctest::Approx(5e-3));
    CHECK(weight_decay_for(5000) == doctest::Approx(5e-4));
    CHECK(weight_decay_for(50000) == doctest::Approx(1e-4));
    CHECK_THROWS_AS(weight_decay_for(0), ConfigError);
}

TEST_CASE("multi_exit_loss: single exit reduces to plain cross entropy") {
    CounterRng rng(3);
    auto logits = DTensor({4, 6});
    for (auto& v : logits.data()) v = rng.next_normal();
    std::vector<int> labels = {0, 5, 2, 3};
    auto a = multi_exit_loss<double>({logits}, labels);
    auto b = softmax_cross_entropy(logits, labels);
    CHECK(a.item() == doctest::Approx(b.item()).epsilon(1e-15));
}

TEST_CASE("multi_exit_loss: three uniform exits give 3 ln 10") {
    std::vector<DTensor> logits(3, DTensor({2, 10}));
    auto loss = multi_exit_loss<double>(logits, {1, 9});
    CHECK(loss.item() == doctest::Approx(3.0 * std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("multi_exit_loss: total gradient is the sum of per-exit gradients") {
    auto net = build_base<double>(micro_config(), 4, 11);
    net.freeze();
    auto dom = attach_domain(net, "sumcheck", 4, ExitTopology::mlp({6}), true, 12);
    CounterRng rng(13);
    std::vector<double> xd(2 * 3 * 16 * 16);
    for (auto& v : xd) v = rng.next_normal();
    auto x = DTensor::from_data({2, 3, 16, 16}, std::move(xd));
    std::vector<int> labels = {0, 3};

    // total loss on one clone
    auto dom_total = dom.clone();
    {
        auto logits = forward_multi_exit(net, dom_total, x, true);
        backward(multi_exit_loss<double>(logits, labels));
    }
    std::vector<TensorT<double>> total_params;
    dom_total.append_block_params(total_params, 0);

    // per-exit losses on separate clones, summed by hand
    std::vector<std::vector<double>> summed;
    for (int e = 1; e <= 3; ++e) {
        auto dom_e = dom.clone();
        auto logits = forward_multi_exit(net, dom_e, x, true);
        backward(softmax_cross_entropy(logits[static_cast<size_t>(e - 1)], labels));
        std::vector<TensorT<double>> params;
        dom_e.append_block_params(params, 0);
        if (summed.empty()) summed.resize(params.size());
        for (size_t p = 0; p < params.size(); ++p) {
            auto g = params[p].has_grad() ? params[p].grad() : std::vector<double>(params[p].numel(), 0.0);
            if (summed[p].empty()) summed[p].assign(g.size(), 0.0);
            for (size_t i = 0; i < g.size(); ++i) summed[p][i] += g[i];
        }
    }

    for (size_t p = 0; p < total_params.size(); ++p) {
        auto g = total_params[p].has_grad() ? total_params[p].grad() : std::vector<double>(total_params[p].numel(), 0.0);
        REQUIRE(g.size() == summed[p].size());
        for (size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(summed[p][i]).epsilon(1e-6));
    }
}

TEST_CASE("loss topology: block-k gradients under the summed loss equal those of its own partial loss") {
    auto net = build_base<double>(micro_config(), 4, 21);
    net.freeze();
    auto dom = attach_domain(net, "topology", 5, ExitTopology::mlp({6}), true, 22);
    CounterRng rng(23);
    std::vector<double> xd(4 * 3 * 16 * 16);
    for (auto& v : xd) v = rng.next_normal();
    auto x = DTensor::from_data({4, 3, 16, 16}, std::move(xd));
    std::vector<int> labels = {0, 1, 2, 4};

    auto dom_total = dom.clone();
    {
        auto logits = forward_multi_exit(net, dom_total, x, true);
        backward(multi_exit_loss<double>(logits, labels));
    }

    for (int k = 1; k <= 3; ++k) {
        // partial loss: exits k..K only, fresh clone for identical activations
        auto dom_partial = dom.clone();
        auto logits = forward_multi_exit(net, dom_partial, x, true);
        auto partial = softmax_cross_entropy(logits[static_cast<size_t>(k - 1)], labels);
        for (int e = k + 1; e <= 3; ++e)
            partial = add(partial, softmax_cross_entropy(logits[static_cast<size_t>(e - 1)], labels));
        backward(partial);

        std::vector<TensorT<double>> a, b;
        dom_total.append_block_params(a, k - 1);
        dom_partial.append_block_params(b, k - 1);
        REQUIRE(a.size() == b.size());
        for (size_t p = 0; p < a.size(); ++p) {
            auto ga = a[p].has_grad() ? a[p].grad() : std::vector<double>(a[p].numel(), 0.0);
            auto gb = b[p].has_grad() ? b[p].grad() : std::vector<double>(b[p].numel(), 0.0);
            REQUIRE(ga.size() == gb.size());
            for (size_t i = 0; i < ga.size(); ++i) {
                double denom = std::max({std::abs(ga[i]), std::abs(gb[i]), 1e-12});
                CHECK(std::abs(ga[i] - gb[i]) / denom < 1e-6);
            }
        }
    }
}

TEST_CASE("train_domain: frozen base bytes never change, any strategy") {
    auto data = synth_data<float>(SynthKind::easy, 64, 32, 16, 31);
    for (Strategy strategy : {Strategy::joint, Strategy::blockwise, Strategy::exits_only}) {
        auto net = build_base<float>(micro_config(), 4, 32);
        net.freeze();
        uint32_t before = net.checksum();
        auto dom = attach_domain(net, "inv", 2, ExitTopology::basic(), strategy != Strategy::exits_only, 33);
        auto cfg = micro_train(strategy == Strategy::blockwise ? 1 : 2, 34);
        cfg.strategy = strategy;
        auto history = train_domain(net, dom, data, cfg);
        CHECK(net.checksum() == before);
        CHECK(net.frozen_checksum() == before);
        CHECK_FALSE(history.epochs.empty());
    }
}

TEST_CASE("train_domain: refuses an unfrozen base and mismatched strategies") {
    auto net = build_base<float>(micro_config(), 4, 41);
    auto data = synth_data<float>(SynthKind::easy, 32, 16, 16, 42);
    net.freeze();
    auto dom = attach_domain(net, "x", 2, ExitTopology::basic(), true, 43);

    auto unfrozen = build_base<float>(micro_config(), 4, 41);
    auto cfg = micro_train(1, 44);
    CHECK_THROWS_AS(train_domain(unfrozen, dom, data, cfg), ConfigError);

    cfg.strategy = Strategy::exits_only;
    CHECK_THROWS_AS(train_domain(net, dom, data, cfg), ConfigError);  // adapters present
}

TEST_CASE("train_domain: deterministic under the seed, sensitive to it") {
    auto data = synth_data<float>(SynthKind::medium, 60, 30, 16, 51);
    auto run = [&](uint64_t seed) {
        auto net = build_base<float>(micro_config(), 4, 52);
        net.freeze();
        auto dom = attach_domain(net, "det", 10, ExitTopology::mlp({8}), true, 53);
        auto cfg = micro_train(2, seed);
        auto history = train_domain(net, dom, data, cfg);
        return std::make_pair(dom.checksum(), history_to_csv(history));
    };
    auto [sum_a, csv_a] = run(7);
    auto [sum_b, csv_b] = run(7);
    auto [sum_c, csv_c] = run(8);
    CHECK(sum_a == sum_b);
    CHECK(csv_a == csv_b);
    CHECK(sum_a != sum_c);
}

TEST_CASE("train_domain: history is well formed") {
    auto data = synth_data<float>(SynthKind::easy, 48, 24, 16, 61);
    auto net = build_base<float>(micro_config(), 4, 62);
    net.freeze();
    auto dom = attach_domain(net, "hist", 2, ExitTopology::basic(), true, 63);
    TrainConfig cfg = micro_train(3, 64);
    cfg.milestones = {2};
    auto history = train_domain(net, dom, data, cfg);
    REQUIRE(history.epochs.size() == 3);
    CHECK(history.num_exits == 3);
    for (const auto& row : history.epochs) {
        CHECK(row.lr == doctest::Approx(lr_at(row.epoch, cfg)));
        REQUIRE(row.acc.size() == 3);
        for (double a : row.acc) {
            CHECK(a >= 0.0);
            CHECK(a <= 1.0);
        }
    }
    CHECK(history.best_epoch >= 0);
    CHECK(history.best_epoch < 3);
}

TEST_CASE("train_domain: blockwise stage 1 is exactly reproducible in isolation") {
    auto data = synth_data<float>(SynthKind::easy, 48, 24, 16, 71);
    auto cfg = micro_train(2, 72);
    cfg.strategy = Strategy::blockwise;

    auto net = build_base<float>(micro_config(), 4, 73);
    net.freeze();
    auto dom_full = attach_domain(net, "bw", 2, ExitTopology::basic(), true, 74);
    auto dom_manual = dom_full.clone();
    auto dom_init = dom_full.clone();

    train_domain(net, dom_full, data, cfg);

    // manual replication of stage 1 through public APIs
    {
        std::vector<Tensor> params;
        dom_manual.append_block_params(params, 0);
        dom_manual.append_head_params(params, 1);
        SgdT<float> opt(params, static_cast<float>(lr_at(0, cfg)), static_cast<float>(cfg.momentum),
                        static_cast<float>(weight_decay_for(data.train.count)));
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            opt.set_lr(static_cast<float>(lr_at(epoch, cfg)));
            for (const auto& batch : make_batches(data.train.count, cfg.batch_size, cfg.seed, epoch, true)) {
                auto x = data.train.gather(batch);
                auto labels = data.train.gather_labels(batch);
                backward(softmax_cross_entropy(forward_exit(net, dom_manual, x, true, 1, 0), labels));
                opt.step();
            }
        }
    }

    // stage-1 state (block-1 adapters/BN and head 1) matches the full run bit for bit
    std::vector<Tensor> full_s1, manual_s1;
    dom_full.append_block_params(full_s1, 0);
    dom_full.append_head_params(full_s1, 1);
    dom_manual.append_block_params(manual_s1, 0);
    dom_manual.append_head_params(manual_s1, 1);
    REQUIRE(full_s1.size() == manual_s1.size());
    for (size_t p = 0; p < full_s1.size(); ++p) CHECK(full_s1[p].data() == manual_s1[p].data());
    CHECK(dom_full.bn[0][0].bn1.stats.mean == dom_manual.bn[0][0].bn1.stats.mean);
    CHECK(dom_full.bn[0][0].bn1.stats.var == dom_manual.bn[0][0].bn1.stats.var);

    // and stage 1 alone never touched later blocks or heads
    for (int k = 1; k < 3; ++k) {
        std::vector<Tensor> manual_later, init_later;
        dom_manual.append_block_params(manual_later, k);
        dom_init.append_block_params(init_later, k);
        for (size_t p = 0; p < manual_later.size(); ++p) CHECK(manual_later[p].data() == init_later[p].data());
    }
    CHECK(dom_manual.bn[1][0].bn1.stats.mean == dom_init.bn[1][0].bn1.stats.mean);

    // all domain parameters are trainable again after the blockwise session
    for (auto& p : dom_full.trainable_params()) CHECK(p.requires_grad());
}

TEST_CASE("train_domain: joint and blockwise produce different exit-1 heads") {
    auto data = synth_data<float>(SynthKind::easy, 48, 24, 16, 81);
    auto make = [&](Strategy s) {
        auto net = build_base<float>(micro_config(), 4, 82);
        net.freeze();
        auto dom = attach_domain(net, "cmp", 2, ExitTopology::basic(), true, 83);
        auto cfg = micro_train(2, 84);
        cfg.strategy = s;
        train_domain(net, dom, data, cfg);
        return dom.heads[0].classifier.w.data();
    };
    CHECK(make(Strategy::joint) != make(Strategy::blockwise));
}

TEST_CASE("train_base: loss decreases and training is deterministic") {
    auto data = synth_data<float>(SynthKind::hard, 100, 40, 16, 91);
    auto run = [&] {
        auto net = build_base<float>(micro_config(), 20, 92);
        auto cfg = micro_train(6, 93);
        auto history = train_base(net, data, cfg);
        return std::make_pair(net.checksum(), history);
    };
    auto [sum_a, hist_a] = run();
    auto [sum_b, hist_b] = run();
    CHECK(sum_a == sum_b);
    CHECK(history_to_csv(hist_a) == history_to_csv(hist_b));
    CHECK(hist_a.epochs.back().loss[0] < hist_a.epochs.front().loss[0]);

    // negative control: one step of unfrozen training changes the checksum
    auto net = build_base<float>(micro_config(), 20, 92);
    uint32_t before = net.checksum();
    auto cfg = micro_train(1, 94);
    train_base(net, data, cfg);
    CHECK(net.checksum() != before);

    net.freeze();
    CHECK_THROWS_AS(train_base(net, data, cfg), ConfigError);
}

TEST_CASE("evaluate: one-hot stub logits score perfect accuracy") {
    std::vector<int> labels = {3, 1, 0, 2, 3};
    auto logits = Tensor({5, 4});
    for (size_t i = 0; i < labels.size(); ++i)
        logits.data()[i * 4 + static_cast<size_t>(labels[i])] = 1.0f;
    CHECK(count_correct(logits, labels) == 5);
}

TEST_CASE("evaluate: hand count on five samples") {
    // predictions: argmax per row -> {2, 0, 1, 1, 3}; only row 2 misses
    auto logits = Tensor::from_data({5, 4}, {
        0.1f, 0.2f, 0.9f, 0.0f,
        0.8f, 0.1f, 0.0f, 0.2f,
        0.0f, 0.7f, 0.1f, 0.3f,
        0.2f, 0.6f, 0.1f, 0.0f,
        0.1f, 0.0f, 0.2f, 0.5f,
    });
    std::vector<int> labels = {2, 0, 3, 1, 3};
    CHECK(count_correct(logits, labels) == 4);
}

TEST_CASE("evaluate: untrained ten-class head stays near chance") {
    auto splits = generate_synthetic_splits(SynthKind::medium, 64, 1000, 10, 16, 101);
    auto stats = compute_pixel_stats(splits[0], 16, 16);
    auto val = preprocess<float>(splits[1], stats, 16, 16);

    auto net = build_base<float>(micro_config(), 4, 102);
    net.freeze();
    auto dom = attach_domain(net, "chance", 10, ExitTopology::basic(), true, 103);
    auto acc = evaluate(net, dom, val);
    REQUIRE(acc.size() == 3);
    for (double a : acc) {
        CHECK(a >= 0.02);
        CHECK(a <= 0.25);
    }

    PreparedDataset<float> empty;
    CHECK_THROWS_AS(evaluate(net, dom, empty), DimensionError);
}

TEST_CASE("history CSV: lossless round trip") {
    TrainHistory h;
    h.num_exits = 3;
    CounterRng rng(111);
    for (int e = 0; e < 5; ++e) {
        TrainHistory::Epoch row;
        row.epoch = e;
        row.lr = 0.1 * std::pow(0.1, e / 2);
        for (int i = 0; i < 3; ++i) row.loss.push_back(rng.next_double() * 3.0);
        for (int i = 0; i < 3; ++i) row.acc.push_back(rng.next_double());
        h.epochs.push_back(row);
    }
    auto csv = history_to_csv(h);
    auto parsed = history_from_csv(csv);
    REQUIRE(parsed.epochs.size() == h.epochs.size());
    CHECK(parsed.num_exits == 3);
    for (size_t e = 0; e < h.epochs.size(); ++e) {
        CHECK(parsed.epochs[e].epoch == h.epochs[e].epoch);
        CHECK(parsed.epochs[e].lr == h.epochs[e].lr);  // bitwise, via %.17g
        CHECK(parsed.epochs[e].loss == h.epochs[e].loss);
        CHECK(parsed.epochs[e].acc == h.epochs[e].acc);
    }
    CHECK(history_to_csv(parsed) == csv);
}

TEST_CASE("train_domain: quick learning sanity on the easy domain") {
    auto data = synth_data<float>(SynthKind::easy, 128, 64, 16, 121);
    auto net = build_base<float>(micro_config(), 4, 122);
    net.freeze();
    auto dom = attach_domain(net, "easy", 2, ExitTopology::mlp({8}), true, 123);
    TrainConfig cfg = micro_train(5, 124);
    cfg.milestones = {4};
    auto history = train_domain(net, dom, data, cfg);
    // the dominant-channel task is separable from block-1 features
    CHECK(history.epochs.back().acc[0] >= 0.9);
}
