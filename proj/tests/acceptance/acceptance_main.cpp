// Acceptance suite: one line per criterion, nonzero exit on any failure.
//
//   acceptance fast        criteria 1-6 and 8 (seconds)
//   acceptance behavioral  criteria 7 and 9 (the desk-scale experiment, minutes)
//   acceptance all         everything
//
// Criteria 7 and 9 drive the installed amdl binary end to end; everything
// else exercises the library directly.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "amdl/checkpoint.hpp"
#include "amdl/gradcheck.hpp"
#include "amdl/policy.hpp"
#include "amdl/synth.hpp"
#include "amdl/train.hpp"

namespace fs = std::filesystem;
using namespace amdl;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& what, const std::string& detail = "") {
    std::printf("[%s] criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", criterion, what.c_str(),
                detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

template <class T>
TensorT<T> random_tensor(Shape shape, uint64_t seed, bool requires_grad = false, double scale = 1.0) {
    CounterRng rng(seed);
    std::vector<T> data(static_cast<size_t>(shape_numel(shape)));
    for (auto& v : data) v = static_cast<T>(rng.next_normal() * scale);
    return TensorT<T>::from_data(std::move(shape), std::move(data), requires_grad);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// criterion 1: finite-difference gradient checks, h=1e-5, 64-bit, < 1 minute
// ---------------------------------------------------------------------------

void criterion1() {
    auto started = std::chrono::steady_clock::now();
    double worst = 0;
    std::string worst_op;
    auto track = [&](const char* op, double err) {
        if (err > worst) {
            worst = err;
            worst_op = op;
        }
    };

    {
        auto x = random_tensor<double>({2, 3, 5, 5}, 7, true);
        auto w = random_tensor<double>({4, 3, 3, 3}, 7001, true, 0.5);
        auto b = random_tensor<double>({4}, 7002, true, 0.1);
        auto mask = random_tensor<double>({2, 4, 5, 5}, 7003);
        track("conv2d", grad_check<double>(
                            [&](std::vector<DTensor>& in) { return sum(mul(conv2d(in[0], in[1], in[2], 1, 1), mask)); },
                            {x, w, b}));
        auto mask2 = random_tensor<double>({2, 4, 3, 3}, 7004);
        track("conv2d/stride2", grad_check<double>(
                                    [&](std::vector<DTensor>& in) {
                                        return sum(mul(conv2d(in[0], in[1], in[2], 2, 1), mask2));
                                    },
                                    {x, w, b}));
    }
    {
        auto x = random_tensor<double>({32}, 11, true);
        auto mask = random_tensor<double>({32}, 12);
        track("relu", grad_check<double>(
                          [&](std::vector<DTensor>& in) { return sum(mul(relu(in[0]), mask)); }, {x}));
    }
    for (bool training : {true, false}) {
        auto x = random_tensor<double>({3, 2, 4, 4}, 21, true);
        auto gamma = random_tensor<double>({2}, 22, true, 0.2);
        for (auto& g : gamma.data()) g += 1.0;
        auto beta = random_tensor<double>({2}, 23, true, 0.2);
        BatchNormStats<double> base_stats(2);
        base_stats.mean = {0.2, -0.3};
        base_stats.var = {1.4, 0.7};
        auto mask = random_tensor<double>({3, 2, 4, 4}, 24);
        track(training ? "batchnorm/train" : "batchnorm/eval",
              grad_check<double>(
                  [&, training](std::vector<DTensor>& in) {
                      BatchNormStats<double> stats = base_stats;
                      return sum(mul(batchnorm(in[0], in[1], in[2], stats, training), mask));
                  },
                  {x, gamma, beta}));
    }
    {
        auto x = random_tensor<double>({3, 4}, 31, true);
        auto w = random_tensor<double>({4, 2}, 32, true);
        auto b = random_tensor<double>({2}, 33, true);
        auto mask = random_tensor<double>({3, 2}, 34);
        track("linear", grad_check<double>(
                            [&](std::vector<DTensor>& in) { return sum(mul(linear(in[0], in[1], in[2]), mask)); },
                            {x, w, b}));
    }
    {
        auto x = random_tensor<double>({2, 3, 4, 5}, 41, true);
        auto mask = random_tensor<double>({2, 3}, 42);
        track("global_avg_pool", grad_check<double>(
                                     [&](std::vector<DTensor>& in) { return sum(mul(global_avg_pool(in[0]), mask)); },
                                     {x}));
    }
    {
        auto logits = random_tensor<double>({4, 6}, 51, true);
        std::vector<int> labels = {0, 5, 2, 3};
        track("softmax_cross_entropy",
              grad_check<double>([&](std::vector<DTensor>& in) { return softmax_cross_entropy(in[0], labels); },
                                 {logits}));
    }
    {
        auto a = random_tensor<double>({8}, 61, true);
        auto b = random_tensor<double>({8}, 62, true);
        auto mask = random_tensor<double>({8}, 63);
        track("add", grad_check<double>(
                         [&](std::vector<DTensor>& in) { return sum(mul(add(in[0], in[1]), mask)); }, {a, b}));
        track("mul", grad_check<double>(
                         [&](std::vector<DTensor>& in) { return sum(mul(mul(in[0], in[1]), mask)); }, {a, b}));
        track("sum", grad_check<double>([&](std::vector<DTensor>& in) { return sum(in[0]); }, {a}));
    }
    {
        // full tiny adapted network, eval-mode BN (train-mode batch statistics
        // make conv biases exact zero-gradient directions, which finite
        // differences cannot resolve against the 1e-8 denominator floor)
        NetworkConfig cfg;
        cfg.input_h = cfg.input_w = 8;
        cfg.num_blocks = 2;
        cfg.units_per_block = 1;
        cfg.block_channels = {4, 6};
        cfg.kernel_size = 3;
        auto net = build_base<double>(cfg, 3, 71);
        net.freeze();
        auto dom = attach_domain(net, "gc", 3, ExitTopology::mlp({5}), true, 72);
        for (int i = 0; i < 2; ++i)
            (void)forward_multi_exit(net, dom, random_tensor<double>({4, 3, 8, 8}, 73 + static_cast<uint64_t>(i)),
                                     true);
        auto x = random_tensor<double>({2, 3, 8, 8}, 75);
        std::vector<int> labels = {0, 2};
        auto params = dom.trainable_params();
        track("tiny adapted network",
              grad_check<double>(
                  [&](std::vector<DTensor>&) {
                      auto logits = forward_multi_exit(net, dom, x, false);
                      return multi_exit_loss<double>(logits, labels);
                  },
                  params));
    }

    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    bool ok = worst < 1e-4 && seconds < 60.0;
    report(1, ok, "gradient correctness (operators + tiny adapted network)",
           "max rel err " + fmt(worst) + " (" + worst_op + "), " + fmt(seconds) + " s");
}

// ---------------------------------------------------------------------------
// criterion 2: zero adapters + base statistics reproduce base logits, 1e-5
// ---------------------------------------------------------------------------

void criterion2() {
    auto net = build_base<float>(NetworkConfig::tiny(), 10, 201);
    for (int i = 0; i < 3; ++i)
        (void)forward_base(net, random_tensor<float>({8, 3, 32, 32}, 210 + static_cast<uint64_t>(i)), true);
    net.freeze();
    auto dom = attach_domain(net, "mirror", 10, ExitTopology::basic(), true, 202);
    dom.align_with_base(net);

    double max_diff = 0;
    for (int batch = 0; batch < 10; ++batch) {
        auto x = random_tensor<float>({10, 3, 32, 32}, 220 + static_cast<uint64_t>(batch));
        auto base_logits = forward_base(net, x, false);
        auto exits = forward_multi_exit(net, dom, x, false);
        const auto& last = exits.back();
        for (size_t i = 0; i < last.data().size(); ++i)
            max_diff = std::max(max_diff, std::abs(static_cast<double>(last.data()[i] - base_logits.data()[i])));
    }
    report(2, max_diff < 1e-5, "zero-adapter equivalence on 100 random inputs", "max |diff| " + fmt(max_diff));
}

// ---------------------------------------------------------------------------
// criterion 3: frozen-base checkpoint bytes invariant under domain training
// ---------------------------------------------------------------------------

void criterion3(const fs::path& work) {
    auto splits = generate_synthetic_splits(SynthKind::easy, 64, 32, 32, 32, 301);
    auto stats = compute_pixel_stats(splits[0], 32, 32);
    DomainDataT<float> data;
    data.train = preprocess<float>(splits[0], stats, 32, 32);
    data.val = preprocess<float>(splits[1], stats, 32, 32);

    bool all_ok = true;
    std::string detail;
    for (Strategy strategy : {Strategy::joint, Strategy::blockwise, Strategy::exits_only}) {
        auto net = build_base<float>(NetworkConfig::tiny(), 4, 302);
        net.freeze();
        auto before_path = (work / (std::string("base_before_") + strategy_name(strategy) + ".ckpt")).string();
        save_base_checkpoint(before_path, net);
        auto before = read_file_bytes(before_path);

        auto dom = attach_domain(net, "inv", 2, ExitTopology::mlp({16}), strategy != Strategy::exits_only, 303);
        TrainConfig cfg;
        cfg.epochs = 2;
        cfg.batch_size = 16;
        cfg.milestones = {};
        cfg.seed = 304;
        cfg.strategy = strategy;
        train_domain(net, dom, data, cfg);

        auto after_path = (work / (std::string("base_after_") + strategy_name(strategy) + ".ckpt")).string();
        save_base_checkpoint(after_path, net);
        bool same = read_file_bytes(after_path) == before;
        all_ok = all_ok && same;
        detail += std::string(strategy_name(strategy)) + (same ? " ok " : " CHANGED ");
    }
    report(3, all_ok, "frozen-base invariance across joint/blockwise/exits_only", detail);
}

// ---------------------------------------------------------------------------
// criterion 4: multi-exit loss topology, tol 1e-6, 64-bit
// ---------------------------------------------------------------------------

void criterion4() {
    NetworkConfig cfg;
    cfg.input_h = cfg.input_w = 16;
    cfg.num_blocks = 3;
    cfg.units_per_block = 1;
    cfg.block_channels = {4, 6, 8};
    cfg.kernel_size = 3;
    auto net = build_base<double>(cfg, 4, 401);
    net.freeze();
    auto dom = attach_domain(net, "topology", 5, ExitTopology::mlp({6}), true, 402);
    auto x = random_tensor<double>({4, 3, 16, 16}, 403);
    std::vector<int> labels = {0, 1, 2, 4};

    auto dom_total = dom.clone();
    {
        auto logits = forward_multi_exit(net, dom_total, x, true);
        backward(multi_exit_loss<double>(logits, labels));
    }

    double worst = 0;
    for (int k = 1; k <= 3; ++k) {
        auto dom_partial = dom.clone();
        auto logits = forward_multi_exit(net, dom_partial, x, true);
        auto partial = softmax_cross_entropy(logits[static_cast<size_t>(k - 1)], labels);
        for (int e = k + 1; e <= 3; ++e)
            partial = add(partial, softmax_cross_entropy(logits[static_cast<size_t>(e - 1)], labels));
        backward(partial);

        std::vector<TensorT<double>> a, b;
        dom_total.append_block_params(a, k - 1);
        dom_partial.append_block_params(b, k - 1);
        for (size_t p = 0; p < a.size(); ++p) {
            auto ga = a[p].has_grad() ? a[p].grad() : std::vector<double>(a[p].numel(), 0.0);
            auto gb = b[p].has_grad() ? b[p].grad() : std::vector<double>(b[p].numel(), 0.0);
            for (size_t i = 0; i < ga.size(); ++i) {
                double denom = std::max({std::abs(ga[i]), std::abs(gb[i]), 1e-12});
                worst = std::max(worst, std::abs(ga[i] - gb[i]) / denom);
            }
        }
    }
    report(4, worst < 1e-6, "summed-loss gradients equal each block's own partial loss", "max rel dev " + fmt(worst));
}

// ---------------------------------------------------------------------------
// criterion 5: parameter accounting against the closed forms
// ---------------------------------------------------------------------------

void criterion5() {
    bool ok = true;
    std::string detail;
    for (int I : {8, 16, 64}) {
        NetworkConfig cfg;
        cfg.input_h = cfg.input_w = 8;
        cfg.num_blocks = 1;
        cfg.units_per_block = 1;
        cfg.block_channels = {I};
        cfg.kernel_size = 3;
        auto net = build_base<float>(cfg, 4, 501);
        net.freeze();
        auto dom = attach_domain(net, "forms", 4, ExitTopology::basic(), true, 502);
        auto led = count_params(net, &dom);
        int64_t i64 = I;
        bool unit_ok = led.unit_base[0][0] == 2 * (9 * i64 * i64 + i64) &&
                       led.unit_adapter[0][0] == 2 * (i64 * i64 + 3 * i64);
        if (I == 64) unit_ok = unit_ok && led.unit_base[0][0] == 73856 && led.unit_adapter[0][0] == 8576;
        ok = ok && unit_ok;
        detail += "I=" + std::to_string(I) + (unit_ok ? " ok " : " WRONG ");
    }

    auto net = build_base<float>(NetworkConfig::resnet26(), 10, 503);
    net.freeze();
    auto dom = attach_domain(net, "frac", 10, ExitTopology::basic(), true, 504);
    auto led = count_params(net, &dom);
    double f1 = led.fraction_at_exit(1) * 100.0;
    double f2 = led.fraction_at_exit(2) * 100.0;
    bool frac_ok = std::abs(f1 - 4.7) < 1.0 && std::abs(f2 - 23.8) < 1.0;
    ok = ok && frac_ok;
    detail += "fractions " + fmt(f1) + "% / " + fmt(f2) + "%";
    report(5, ok, "ledger matches closed forms and cumulative exit fractions", detail);
}

// ---------------------------------------------------------------------------
// criterion 6: Table-2 oracle replay, < 1 second
// ---------------------------------------------------------------------------

void criterion6() {
    auto started = std::chrono::steady_clock::now();
    auto table = table2_fixture();
    auto result = best_row(table, 3.5);

    const std::array<const char*, 10> order = {"ImNet", "Airc", "C100", "DPed", "DTD",
                                               "GTSR",  "Flwr", "OGlt", "SVHN", "UCF"};
    const std::array<double, 10> expected = {60.32, 50.62, 81.01, 87.72, 49.53, 97.00, 70.24, 87.13, 95.35, 49.04};
    bool ok = result.selections.size() == 10;
    double worst = 0;
    for (size_t i = 0; i < order.size() && ok; ++i) {
        const SelectionResult* sel = nullptr;
        for (const auto& s : result.selections)
            if (s.domain == order[i]) sel = &s;
        if (!sel) {
            ok = false;
            break;
        }
        worst = std::max(worst, std::abs(sel->accuracy - expected[i]));
    }
    ok = ok && worst <= 0.01;
    double mean_err = std::abs(result.mean_accuracy - 72.79);
    ok = ok && mean_err <= 0.01;

    // monotone in T: the chosen exit never grows as the threshold loosens
    bool monotone = true;
    std::array<double, 5> grid = {0.0, 1.0, 3.5, 10.0, 100.0};
    std::vector<int> prev;
    for (double threshold : grid) {
        auto r = best_row(table, threshold);
        std::vector<int> exits;
        for (const auto& s : r.selections) exits.push_back(s.exit_index);
        if (!prev.empty())
            for (size_t i = 0; i < exits.size(); ++i) monotone = monotone && exits[i] <= prev[i];
        prev = exits;
    }
    ok = ok && monotone;

    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    ok = ok && seconds < 1.0;
    report(6, ok, "Table-2 best-row replay and T-monotonicity",
           "max |acc err| " + fmt(worst) + ", |mean err| " + fmt(mean_err) + (monotone ? ", monotone" : ", NOT monotone") +
               ", " + fmt(seconds) + " s");
}

// ---------------------------------------------------------------------------
// criterion 8: byte-exact format round trips with CRC detection
// ---------------------------------------------------------------------------

void criterion8(const fs::path& work) {
    bool ok = true;
    std::string detail;

    {
        auto net = build_base<float>(NetworkConfig::tiny(), 6, 801);
        net.freeze();
        auto p1 = (work / "rt_base1.ckpt").string();
        auto p2 = (work / "rt_base2.ckpt").string();
        save_base_checkpoint(p1, net);
        auto loaded = load_base_checkpoint<float>(p1);
        save_base_checkpoint(p2, loaded);
        bool same = read_file_bytes(p1) == read_file_bytes(p2);
        ok = ok && same;
        detail += std::string("base ") + (same ? "ok" : "DIFFERS") + " ";

        auto dom = attach_domain(net, "rt", 5, ExitTopology::mlp({12}), true, 802);
        auto b1 = (work / "rt_dom1.adpt").string();
        auto b2 = (work / "rt_dom2.adpt").string();
        save_domain_bundle(b1, dom);
        auto dld = load_domain_bundle<float>(b1, net);
        save_domain_bundle(b2, dld);
        same = read_file_bytes(b1) == read_file_bytes(b2);
        ok = ok && same;
        detail += std::string("bundle ") + (same ? "ok" : "DIFFERS") + " ";

        auto corrupt = read_file_bytes(b1);
        corrupt[corrupt.size() / 2] ^= 0x40;
        bool caught = false;
        try {
            decode_checkpoint(corrupt);
        } catch (const FormatError&) {
            caught = true;
        }
        ok = ok && caught;
        detail += std::string("crc ") + (caught ? "detected" : "MISSED") + " ";
    }
    {
        auto ds = generate_synthetic(SynthKind::medium, 40, Split::val, 32, 803);
        auto p1 = (work / "rt1.amds").string();
        auto p2 = (work / "rt2.amds").string();
        save_dataset(ds, p1);
        auto loaded = load_dataset(p1);
        save_dataset(loaded, p2);
        bool same = read_file_bytes(p1) == read_file_bytes(p2);
        ok = ok && same;
        detail += std::string("dataset ") + (same ? "ok" : "DIFFERS") + " ";

        auto corrupt = read_file_bytes(p1);
        corrupt[100] ^= 0x01;
        bool caught = false;
        try {
            decode_dataset(corrupt);
        } catch (const FormatError&) {
            caught = true;
        }
        ok = ok && caught;
        detail += std::string("dataset crc ") + (caught ? "detected" : "MISSED");
    }
    report(8, ok, "checkpoint, bundle, and dataset round trips", detail);
}

// ---------------------------------------------------------------------------
// criteria 7 and 9: the desk-scale behavioral experiment through the CLI
// ---------------------------------------------------------------------------

struct CliRun {
    int exit_code;
    std::string output;
};

CliRun shell(const std::string& cmd) {
    std::FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
    if (!pipe) return {-1, "popen failed"};
    std::string out;
    std::array<char, 4096> buf;
    size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
    int status = pclose(pipe);
    return {(status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1, out};
}

// One full pipeline: generate the three domains, train the base on the hard
// one, attach and train all three, then select and report at T=3.5.
bool run_pipeline(const fs::path& dir, int threads, std::string& log) {
    fs::create_directories(dir / "data");
    std::string cli = std::string("AMDL_THREADS=") + std::to_string(threads) + " " + AMDL_CLI_PATH;
    std::string data = (dir / "data").string();
    const uint64_t seed = 1;

    std::vector<std::string> commands = {
        cli + " gen-data --kind easy --n 400 --n-val 400 --n-test 400 --side 32 --seed " + std::to_string(seed) +
            " --out " + data,
        cli + " gen-data --kind medium --n 600 --n-val 400 --n-test 400 --side 32 --seed " + std::to_string(seed) +
            " --out " + data,
        cli + " gen-data --kind hard --n 1200 --n-val 500 --n-test 500 --side 32 --seed " + std::to_string(seed) +
            " --out " + data,
        cli + " train-base --data " + data + " --domain hard --preset tiny --seed " + std::to_string(seed) +
            " --out " + (dir / "base.ckpt").string() + " --history " + (dir / "base_hist.csv").string(),
    };
    for (const char* domain : {"easy", "medium", "hard"}) {
        commands.push_back(cli + " train-domain --base " + (dir / "base.ckpt").string() + " --data " + data +
                           " --domain " + domain + " --topology mlp:128 --strategy joint --seed " +
                           std::to_string(seed) + " --out " + (dir / (std::string(domain) + ".adpt")).string() +
                           " --history " + (dir / (std::string(domain) + "_hist.csv")).string() + " --results " +
                           (dir / "results.csv").string());
    }
    commands.push_back(cli + " select --results " + (dir / "results.csv").string() + " --T 3.5 --out " +
                       (dir / "selections.json").string());
    commands.push_back(cli + " report --results " + (dir / "results.csv").string() + " --T 3.5 --out-prefix " +
                       (dir / "report").string());

    for (const auto& cmd : commands) {
        auto r = shell(cmd);
        log += "$ " + cmd + "\n" + r.output;
        if (r.exit_code != 0) {
            log += "exit code " + std::to_string(r.exit_code) + "\n";
            return false;
        }
    }
    return true;
}

double result_accuracy(const std::vector<ResultRecord>& records, const std::string& domain, int exit_index) {
    for (const auto& r : records)
        if (r.domain == domain && r.exit_index == exit_index) return r.accuracy;
    throw std::runtime_error("missing result for " + domain + " exit " + std::to_string(exit_index));
}

void criterion7_and_9(const fs::path& work, bool& pipeline_ok, fs::path& run1) {
    run1 = work / "run1";
    auto started = std::chrono::steady_clock::now();
    std::string log;
    pipeline_ok = run_pipeline(run1, 2, log);
    double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() / 60.0;
    if (!pipeline_ok) {
        std::fputs(log.c_str(), stdout);
        report(7, false, "behavioral desk-scale experiment", "pipeline failed");
        return;
    }

    auto bytes = read_file_bytes((run1 / "results.csv").string());
    auto records = results_from_csv(std::string(bytes.begin(), bytes.end()));
    auto table = table_from_results(records);
    auto easy_sel = select_exit(table, "easy", 3.5);
    auto hard_sel = select_exit(table, "hard", 3.5);

    double easy_gap = result_accuracy(records, "easy", 3) - result_accuracy(records, "easy", 1);
    double hard_gap = result_accuracy(records, "hard", 3) - result_accuracy(records, "hard", 1);

    bool easy_ok = easy_sel.exit_index == 1 && easy_gap <= 3.5 && result_accuracy(records, "easy", 1) >= 90.0;
    bool hard_ok = (hard_sel.exit_index == 2 || hard_sel.exit_index == 3) && hard_gap > 3.5;
    bool sane = result_accuracy(records, "hard", 3) >= result_accuracy(records, "hard", 1) - 5.0;

    // the base itself must have learned its training domain well above chance
    auto base_hist = read_history_csv((run1 / "base_hist.csv").string());
    bool base_ok = !base_hist.epochs.empty() && base_hist.epochs.back().acc[0] > 1.0 / 20.0 + 0.10;

    // one report row per attached domain
    auto report_bytes = read_file_bytes((run1 / "report.csv").string());
    int report_rows = -1;  // minus the header
    for (uint8_t c : report_bytes)
        if (c == '\n') ++report_rows;
    bool report_ok = report_rows == 3;

    bool time_ok = minutes < 30.0;
    bool ok = easy_ok && hard_ok && sane && base_ok && report_ok && time_ok;

    report(7, ok, "behavioral desk-scale experiment (tiny net, 30-epoch preset)",
           "easy exit " + std::to_string(easy_sel.exit_index) + " gap " + fmt(easy_gap) + "; hard exit " +
               std::to_string(hard_sel.exit_index) + " gap " + fmt(hard_gap) + "; base val " +
               fmt(base_hist.epochs.empty() ? 0.0 : base_hist.epochs.back().acc[0]) + "; " +
               std::to_string(report_rows) + " report rows; " + fmt(minutes) + " min");
}

void criterion9(const fs::path& work, const fs::path& run1) {
    auto run2 = work / "run2";
    std::string log;
    if (!run_pipeline(run2, 1, log)) {
        std::fputs(log.c_str(), stdout);
        report(9, false, "pipeline determinism", "rerun failed");
        return;
    }

    std::vector<std::string> artifacts = {"results.csv",      "report.csv",      "report.json",
                                          "selections.json",  "base.ckpt",       "base_hist.csv",
                                          "easy.adpt",        "medium.adpt",     "hard.adpt",
                                          "easy_hist.csv",    "medium_hist.csv", "hard_hist.csv",
                                          "data/easy_train.amds", "data/hard_test.amds"};
    bool ok = true;
    std::string detail;
    for (const auto& name : artifacts) {
        bool same = read_file_bytes((run1 / name).string()) == read_file_bytes((run2 / name).string());
        ok = ok && same;
        if (!same) detail += name + " DIFFERS ";
    }
    if (ok) detail = std::to_string(artifacts.size()) + " artifacts byte-identical (threads 2 vs 1)";
    report(9, ok, "whole-pipeline determinism at AMDL_THREADS=1", detail);
}

}  // namespace

int main(int argc, char** argv) {
    std::string mode = argc > 1 ? argv[1] : "all";
    bool fast = mode == "fast" || mode == "all";
    bool behavioral = mode == "behavioral" || mode == "all";
    if (!fast && !behavioral) {
        std::fprintf(stderr, "usage: acceptance [fast|behavioral|all]\n");
        return 2;
    }

    fs::path work = fs::current_path() / "acceptance_work";
    fs::create_directories(work);

    if (fast) {
        criterion1();
        criterion2();
        criterion3(work);
        criterion4();
        criterion5();
        criterion6();
        criterion8(work);
    }
    if (behavioral) {
        fs::remove_all(work / "run1");
        fs::remove_all(work / "run2");
        bool pipeline_ok = false;
        fs::path run1;
        criterion7_and_9(work, pipeline_ok, run1);
        if (pipeline_ok) criterion9(work, run1);
    }

    if (g_failures == 0) {
        std::printf("acceptance: all criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criterion(s) failed\n", g_failures);
    return 1;
}
