// amdl: dataset generation, base training, incremental domain attachment,
// evaluation, threshold exit selection, and report emission in one binary.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "amdl/checkpoint.hpp"
#include "amdl/decathlon.hpp"
#include "amdl/policy.hpp"
#include "amdl/synth.hpp"
#include "amdl/train.hpp"

namespace fs = std::filesystem;
using namespace amdl;

namespace {

// ---------------------------------------------------------------------------
// shared option bundles
// ---------------------------------------------------------------------------

struct TrainFlags {
    std::string preset = "tiny";
    int epochs = 30;
    int batch_size = 32;
    double lr = 0.1;
    std::vector<int> milestones = {20, 26};
    double lr_decay = 0.1;
    double momentum = 0.9;
    double weight_decay = -1.0;
    uint64_t seed = 1;
    std::string precision = "f32";

    void attach(CLI::App* cmd) {
        cmd->add_option("--epochs", epochs, "training epochs")->capture_default_str();
        cmd->add_option("--batch-size", batch_size, "mini-batch size")->capture_default_str();
        cmd->add_option("--lr", lr, "initial learning rate")->capture_default_str();
        cmd->add_option("--milestones", milestones, "epochs at which the learning rate decays")
            ->delimiter(',')
            ->capture_default_str();
        cmd->add_option("--lr-decay", lr_decay, "learning-rate decay factor per milestone")->capture_default_str();
        cmd->add_option("--momentum", momentum, "SGD momentum")->capture_default_str();
        cmd->add_option("--weight-decay", weight_decay,
                        "L2 weight decay; negative selects the size-dependent default")
            ->capture_default_str();
        cmd->add_option("--seed", seed, "run seed; sub-seeds are derived per component")->capture_default_str();
        cmd->add_option("--precision", precision, "numeric width: f32 or f64")
            ->check(CLI::IsMember({"f32", "f64"}))
            ->capture_default_str();
    }

    TrainConfig to_config(Strategy strategy = Strategy::joint) const {
        TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.base_lr = lr;
        cfg.milestones = milestones;
        cfg.lr_decay = lr_decay;
        cfg.momentum = momentum;
        cfg.weight_decay = weight_decay;
        cfg.seed = seed;
        cfg.strategy = strategy;
        cfg.use_f64 = precision == "f64";
        cfg.validate();
        return cfg;
    }
};

std::string dataset_path(const std::string& dir, const std::string& domain, Split split) {
    return (fs::path(dir) / (domain + "_" + split_name(split) + ".amds")).string();
}

template <class T>
DomainDataT<T> load_domain_data(const std::string& dir, const std::string& domain, const NetworkConfig& config) {
    auto train = load_dataset(dataset_path(dir, domain, Split::train));
    auto val = load_dataset(dataset_path(dir, domain, Split::val));
    if (train.num_classes != val.num_classes)
        throw ConfigError("train/val splits of '" + domain + "' disagree on the class count");
    auto stats = compute_pixel_stats(train, config.input_h, config.input_w);
    DomainDataT<T> data;
    data.train = preprocess<T>(train, stats, config.input_h, config.input_w);
    data.val = preprocess<T>(val, stats, config.input_h, config.input_w);
    return data;
}

void append_results(const std::string& path, const std::vector<ResultRecord>& records) {
    std::string text;
    if (fs::exists(path)) {
        auto bytes = read_file_bytes(path);
        text.assign(bytes.begin(), bytes.end());
    } else {
        text = results_csv_header();
    }
    for (const auto& r : records) text += result_record_to_csv(r);
    write_file_bytes(path, std::vector<uint8_t>(text.begin(), text.end()));
}

ExitTopology topology_for_fixture_config(const std::string& config) {
    if (config == "Basic" || config == "No-adp" || config == "base") return ExitTopology::basic();
    if (config == "MLP128" || config == "MLP128-B") return ExitTopology::mlp({128});
    if (config == "MLP512") return ExitTopology::mlp({512});
    if (config == "MLP-2L") return ExitTopology::mlp({128, 128});
    if (config == "CL") return ExitTopology::conv1x1();
    return ExitTopology::basic();
}

// Parameter cost of the fixture selections under this artifact's own ledger:
// a ResNet-26 base plus the chosen head configuration at the domain's class
// count. The published absolute figures are not reproduced.
std::vector<ReportEntry> fixture_report_entries(const BestRowResult& result) {
    auto base = build_base<float>(NetworkConfig::resnet26(), 1000, 1);
    base.freeze();
    auto base_ledger = count_params(base);
    int64_t base_only = base_ledger.base_shared() + base_ledger.base_bn + base_ledger.base_classifier;

    std::vector<ReportEntry> entries;
    for (const auto& sel : result.selections) {
        ReportEntry e;
        e.sel = sel;
        if (sel.config == "base") {
            e.params = base_only;
            e.param_fraction = 1.0;
        } else {
            const DomainSpec* spec = find_domain_spec(sel.domain);
            int classes = spec ? spec->num_classes : 10;
            auto dom = attach_domain(base, sel.domain, classes, topology_for_fixture_config(sel.config),
                                     sel.config != "No-adp", 1);
            auto led = count_params(base, &dom);
            e.params = led.cumulative_at_exit(sel.exit_index);
            e.param_fraction = led.fraction_at_exit(sel.exit_index);
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

std::vector<ReportEntry> live_report_entries(const BestRowResult& result, const std::vector<ResultRecord>& records) {
    std::vector<ReportEntry> entries;
    for (const auto& sel : result.selections) {
        ReportEntry e;
        e.sel = sel;
        for (const auto& r : records)
            if (r.domain == sel.domain && r.config == sel.config && r.exit_index == sel.exit_index) {
                e.params = r.params;
                e.param_fraction = r.param_fraction;
            }
        entries.push_back(std::move(e));
    }
    return entries;
}

void print_selections(const BestRowResult& result) {
    std::printf("%-8s %-10s %4s %9s %9s %7s  %s\n", "domain", "config", "exit", "accuracy", "baseline", "loss",
                "difficulty");
    for (const auto& s : result.selections)
        std::printf("%-8s %-10s %4d %9.2f %9.2f %7.2f  %s\n", s.domain.c_str(), s.config.c_str(), s.exit_index,
                    s.accuracy, s.baseline, s.loss, s.difficulty.c_str());
    std::printf("mean accuracy: %.3f\n", result.mean_accuracy);
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

struct GenDataArgs {
    std::string kind;
    int n = 2000;
    int n_val = -1;
    int n_test = -1;
    int side = 32;
    uint64_t seed = 1;
    std::string out;
};

int run_gen_data(const GenDataArgs& a) {
    SynthKind kind = synth_kind_from_name(a.kind);
    int n_val = a.n_val > 0 ? a.n_val : std::max(synth_num_classes(kind), a.n / 4);
    int n_test = a.n_test > 0 ? a.n_test : n_val;
    fs::create_directories(a.out);
    auto splits = generate_synthetic_splits(kind, a.n, n_val, n_test, a.side, a.seed);
    for (const auto& ds : splits) save_dataset(ds, dataset_path(a.out, a.kind, ds.split));
    std::printf("domain %s: %d classes, %dx%dx3 u8, splits %d/%d/%d, seed %llu\n", a.kind.c_str(),
                synth_num_classes(kind), a.side, a.side, a.n, n_val, n_test,
                static_cast<unsigned long long>(a.seed));
    for (const auto& ds : splits)
        std::printf("  wrote %s (%d images)\n", dataset_path(a.out, a.kind, ds.split).c_str(), ds.count);
    return 0;
}

struct TrainBaseArgs {
    TrainFlags flags;
    std::string data_dir;
    std::string domain;
    std::string out = "base.ckpt";
    std::string history;
    std::string best_out;
};

template <class T>
int run_train_base(const TrainBaseArgs& a) {
    auto config = NetworkConfig::preset(a.flags.preset);
    auto data = load_domain_data<T>(a.data_dir, a.domain, config);
    int num_classes = 0;
    {
        auto train = load_dataset(dataset_path(a.data_dir, a.domain, Split::train));
        num_classes = train.num_classes;
    }
    auto net = build_base<T>(config, num_classes, CounterRng::derive(a.flags.seed, "base"));
    auto cfg = a.flags.to_config();

    BaseNetworkT<T> best;
    auto history = train_base(net, data, cfg, a.best_out.empty() ? nullptr : &best);
    std::printf("trained base on %s: final val accuracy %.4f (best epoch %d)\n", a.domain.c_str(),
                history.epochs.back().acc[0], history.best_epoch);

    net.freeze();
    save_base_checkpoint(a.out, net);
    std::printf("wrote frozen base checkpoint %s (config %s)\n", a.out.c_str(), hex_u32(net.config.hash()).c_str());
    if (!a.best_out.empty()) {
        best.freeze();
        save_base_checkpoint(a.best_out, best);
    }
    if (!a.history.empty()) write_history_csv(a.history, history);
    return 0;
}

struct TrainDomainArgs {
    TrainFlags flags;
    std::string base_path;
    std::string data_dir;
    std::string domain;
    std::string topology = "mlp:128";
    std::string strategy = "joint";
    bool no_adapt = false;
    std::string resume;
    std::string out;
    std::string history;
    std::string best_out;
    std::string results;
    std::string label;
};

template <class T>
int run_train_domain(const TrainDomainArgs& a) {
    auto base = load_base_checkpoint<T>(a.base_path);
    if (!base.frozen()) throw ConfigError("base checkpoint " + a.base_path + " is not frozen");
    auto data = load_domain_data<T>(a.data_dir, a.domain, base.config);
    int num_classes = load_dataset(dataset_path(a.data_dir, a.domain, Split::train)).num_classes;

    Strategy strategy = strategy_from_name(a.strategy);
    bool adapt = !a.no_adapt && strategy != Strategy::exits_only;

    DomainAdapterSetT<T> dom;
    if (!a.resume.empty()) {
        auto file = read_checkpoint_file(a.resume);
        if (bundle_base_hash(file) != base.config.hash())
            throw ConfigError("bundle " + a.resume + " was trained against a different base configuration");
        dom = domain_from_file(file, base);
    } else {
        dom = attach_domain(base, a.domain, num_classes, ExitTopology::parse(a.topology), adapt,
                            CounterRng::derive(a.flags.seed, "domain:" + a.domain));
    }

    auto cfg = a.flags.to_config(strategy);
    DomainAdapterSetT<T> best;
    auto history = train_domain(base, dom, data, cfg, a.best_out.empty() ? nullptr : &best);

    const auto& final_acc = history.epochs.back().acc;
    std::printf("trained domain %s (%s, %s):", a.domain.c_str(), dom.topology.tag().c_str(), a.strategy.c_str());
    for (size_t e = 0; e < final_acc.size(); ++e) std::printf(" exit%zu=%.4f", e + 1, final_acc[e]);
    std::printf(" (best epoch %d)\n", history.best_epoch);

    std::string out = a.out.empty() ? a.domain + ".adpt" : a.out;
    save_domain_bundle(out, dom);
    if (!a.best_out.empty()) save_domain_bundle(a.best_out, best);
    if (!a.history.empty()) write_history_csv(a.history, history);

    if (!a.results.empty()) {
        std::string label = a.label.empty()
                                ? dom.topology.tag() + (strategy == Strategy::blockwise ? "-B" : "")
                                : a.label;
        auto led = count_params(base, &dom);
        std::vector<ResultRecord> records;
        for (int e = 1; e <= dom.num_exits(); ++e)
            records.push_back({a.domain, label, e, final_acc[static_cast<size_t>(e - 1)] * 100.0,
                               led.cumulative_at_exit(e), led.fraction_at_exit(e)});
        append_results(a.results, records);
    }
    return 0;
}

struct EvaluateArgs {
    std::string base_path;
    std::string bundle;
    std::string data_dir;
    std::string domain;
    std::string split = "val";
    std::string results;
    std::string label;
    std::string precision = "f32";
};

template <class T>
int run_evaluate(const EvaluateArgs& a) {
    auto base = load_base_checkpoint<T>(a.base_path);
    auto file = read_checkpoint_file(a.bundle);
    if (bundle_base_hash(file) != base.config.hash())
        throw ConfigError("bundle " + a.bundle + " was trained against a different base configuration");
    auto dom = domain_from_file(file, base);

    Split split = split_from_name(a.split);
    auto train = load_dataset(dataset_path(a.data_dir, a.domain, Split::train));
    auto target = load_dataset(dataset_path(a.data_dir, a.domain, split));
    auto stats = compute_pixel_stats(train, base.config.input_h, base.config.input_w);
    auto prepared = preprocess<T>(target, stats, base.config.input_h, base.config.input_w);

    auto acc = evaluate(base, dom, prepared);
    std::printf("%s %s:", a.domain.c_str(), a.split.c_str());
    for (size_t e = 0; e < acc.size(); ++e) std::printf(" exit%zu=%.4f", e + 1, acc[e]);
    std::printf("\n");

    if (!a.results.empty()) {
        std::string label = a.label.empty() ? dom.topology.tag() : a.label;
        auto led = count_params(base, &dom);
        std::vector<ResultRecord> records;
        for (int e = 1; e <= dom.num_exits(); ++e)
            records.push_back({a.domain, label, e, acc[static_cast<size_t>(e - 1)] * 100.0,
                               led.cumulative_at_exit(e), led.fraction_at_exit(e)});
        append_results(a.results, records);
    }
    return 0;
}

struct SelectArgs {
    std::string results;
    std::string fixture;
    double threshold = 3.5;
    std::string out_json;
};

int run_select(const SelectArgs& a) {
    if (a.fixture.empty() == a.results.empty())
        throw ConfigError("select needs exactly one of --results or --fixture");
    BestRowResult result;
    std::vector<ReportEntry> entries;
    if (!a.fixture.empty()) {
        if (a.fixture != "table2") throw ConfigError("unknown fixture '" + a.fixture + "' (expected table2)");
        result = best_row(table2_fixture(), a.threshold);
        entries = fixture_report_entries(result);
    } else {
        auto bytes = read_file_bytes(a.results);
        auto records = results_from_csv(std::string(bytes.begin(), bytes.end()));
        auto table = table_from_results(records);
        result = best_row(table, a.threshold, {});
        entries = live_report_entries(result, records);
    }
    print_selections(result);
    if (!a.out_json.empty()) {
        std::string json = report_to_json(entries);
        write_file_bytes(a.out_json, std::vector<uint8_t>(json.begin(), json.end()));
    }
    return 0;
}

struct ReportArgs {
    std::string results;
    std::string fixture;
    double threshold = 3.5;
    std::string out_prefix = "report";
};

int run_report(const ReportArgs& a) {
    if (a.fixture.empty() == a.results.empty())
        throw ConfigError("report needs exactly one of --results or --fixture");
    BestRowResult result;
    std::vector<ReportEntry> entries;
    if (!a.fixture.empty()) {
        if (a.fixture != "table2") throw ConfigError("unknown fixture '" + a.fixture + "' (expected table2)");
        result = best_row(table2_fixture(), a.threshold);
        entries = fixture_report_entries(result);
    } else {
        auto bytes = read_file_bytes(a.results);
        auto records = results_from_csv(std::string(bytes.begin(), bytes.end()));
        result = best_row(table_from_results(records), a.threshold, {});
        entries = live_report_entries(result, records);
    }
    std::string csv_path = a.out_prefix + ".csv";
    std::string json_path = a.out_prefix + ".json";
    write_report_files(csv_path, json_path, entries);
    std::printf("wrote %s and %s (%zu domains, mean accuracy %.3f)\n", csv_path.c_str(), json_path.c_str(),
                entries.size(), result.mean_accuracy);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive incremental multi-domain learning harness"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "key = value file with [subcommand] sections; command-line flags win");

    GenDataArgs gen;
    auto* cmd_gen = app.add_subcommand("gen-data", "generate a synthetic domain (train/val/test AMDS files)");
    cmd_gen->add_option("--kind", gen.kind, "easy, medium, or hard")->required();
    cmd_gen->add_option("--n", gen.n, "train split size")->capture_default_str();
    cmd_gen->add_option("--n-val", gen.n_val, "val split size (default n/4)");
    cmd_gen->add_option("--n-test", gen.n_test, "test split size (default n/4)");
    cmd_gen->add_option("--side", gen.side, "square image side in pixels")->capture_default_str();
    cmd_gen->add_option("--seed", gen.seed, "generator seed")->capture_default_str();
    cmd_gen->add_option("--out", gen.out, "output directory")->required();

    TrainBaseArgs tb;
    auto* cmd_tb = app.add_subcommand("train-base", "train the shared base network on one domain, freeze, save");
    tb.flags.attach(cmd_tb);
    cmd_tb->add_option("--preset", tb.flags.preset, "network preset: tiny or resnet26")->capture_default_str();
    cmd_tb->add_option("--data", tb.data_dir, "directory with <domain>_<split>.amds files")->required();
    cmd_tb->add_option("--domain", tb.domain, "domain name used for the base training")->required();
    cmd_tb->add_option("--out", tb.out, "frozen base checkpoint path")->capture_default_str();
    cmd_tb->add_option("--history", tb.history, "training-curve CSV path");
    cmd_tb->add_option("--best-out", tb.best_out, "additional checkpoint at the best val epoch");

    TrainDomainArgs td;
    auto* cmd_td = app.add_subcommand("train-domain", "attach and train one domain against a frozen base");
    td.flags.attach(cmd_td);
    cmd_td->add_option("--base", td.base_path, "frozen base checkpoint")->required();
    cmd_td->add_option("--data", td.data_dir, "directory with <domain>_<split>.amds files")->required();
    cmd_td->add_option("--domain", td.domain, "domain name")->required();
    cmd_td->add_option("--topology", td.topology, "exit head: basic, mlp:<w>[,<w>...], or conv1x1")
        ->capture_default_str();
    cmd_td->add_option("--strategy", td.strategy, "joint, blockwise, or exits_only")->capture_default_str();
    cmd_td->add_flag("--no-adapt", td.no_adapt, "train BN and heads only, no 1x1 adapters");
    cmd_td->add_option("--resume", td.resume, "existing bundle to continue training");
    cmd_td->add_option("--out", td.out, "adapter bundle output (default <domain>.adpt)");
    cmd_td->add_option("--history", td.history, "training-curve CSV path");
    cmd_td->add_option("--best-out", td.best_out, "additional bundle at the best val epoch");
    cmd_td->add_option("--results", td.results, "append final val accuracies to this results CSV");
    cmd_td->add_option("--label", td.label, "configuration label in the results CSV");

    EvaluateArgs ev;
    auto* cmd_ev = app.add_subcommand("evaluate", "per-exit accuracy of a trained bundle on one split");
    cmd_ev->add_option("--base", ev.base_path, "frozen base checkpoint")->required();
    cmd_ev->add_option("--bundle", ev.bundle, "adapter bundle")->required();
    cmd_ev->add_option("--data", ev.data_dir, "directory with <domain>_<split>.amds files")->required();
    cmd_ev->add_option("--domain", ev.domain, "domain name")->required();
    cmd_ev->add_option("--split", ev.split, "train, val, or test")->capture_default_str();
    cmd_ev->add_option("--results", ev.results, "append accuracies to this results CSV");
    cmd_ev->add_option("--label", ev.label, "configuration label in the results CSV");
    cmd_ev->add_option("--precision", ev.precision, "numeric width: f32 or f64")
        ->check(CLI::IsMember({"f32", "f64"}))
        ->capture_default_str();

    SelectArgs se;
    auto* cmd_se = app.add_subcommand("select", "apply the threshold exit-selection rule");
    cmd_se->add_option("--results", se.results, "results CSV accumulated by train-domain/evaluate");
    cmd_se->add_option("--fixture", se.fixture, "named fixture replay (table2)");
    cmd_se->add_option("--T,--threshold", se.threshold, "acceptable accuracy drop in percent")
        ->capture_default_str();
    cmd_se->add_option("--out", se.out_json, "write the selection report as JSON");

    ReportArgs re;
    auto* cmd_re = app.add_subcommand("report", "emit the selection report as CSV and JSON");
    cmd_re->add_option("--results", re.results, "results CSV accumulated by train-domain/evaluate");
    cmd_re->add_option("--fixture", re.fixture, "named fixture replay (table2)");
    cmd_re->add_option("--T,--threshold", re.threshold, "acceptable accuracy drop in percent")
        ->capture_default_str();
    cmd_re->add_option("--out-prefix", re.out_prefix, "writes <prefix>.csv and <prefix>.json")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (cmd_gen->parsed()) return run_gen_data(gen);
        if (cmd_tb->parsed()) return tb.flags.precision == "f64" ? run_train_base<double>(tb) : run_train_base<float>(tb);
        if (cmd_td->parsed())
            return td.flags.precision == "f64" ? run_train_domain<double>(td) : run_train_domain<float>(td);
        if (cmd_ev->parsed()) return ev.precision == "f64" ? run_evaluate<double>(ev) : run_evaluate<float>(ev);
        if (cmd_se->parsed()) return run_select(se);
        if (cmd_re->parsed()) return run_report(re);
        std::fprintf(stderr, "no subcommand selected\n");
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const DimensionError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "file format error: %s\n", e.what());
        return 3;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 3;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 1;
    }
}
