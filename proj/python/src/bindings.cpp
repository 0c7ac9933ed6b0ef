// Python bindings for the core operations: tensor ops with autograd-backed
// forward passes, synthetic data generation, dataset and checkpoint I/O,
// parameter accounting, training, and threshold exit selection.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "amdl/checkpoint.hpp"
#include "amdl/decathlon.hpp"
#include "amdl/gradcheck.hpp"
#include "amdl/policy.hpp"
#include "amdl/synth.hpp"
#include "amdl/train.hpp"

namespace py = pybind11;
using namespace amdl;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor tensor_from_array(const FloatArray& arr) {
    Shape shape(arr.ndim());
    for (py::ssize_t i = 0; i < arr.ndim(); ++i) shape[static_cast<size_t>(i)] = static_cast<int>(arr.shape(i));
    std::vector<float> data(arr.data(), arr.data() + arr.size());
    return Tensor::from_data(std::move(shape), std::move(data));
}

py::array_t<float> array_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<float> out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

py::dict dataset_to_dict(const DatasetContainer& ds) {
    py::dict d;
    std::vector<py::ssize_t> pix_shape = {ds.count, ds.height, ds.width, ds.channels};
    py::array_t<uint8_t> pixels(pix_shape);
    std::copy(ds.pixels.begin(), ds.pixels.end(), pixels.mutable_data());
    std::vector<py::ssize_t> label_shape = {ds.count};
    py::array_t<uint16_t> labels(label_shape);
    std::copy(ds.labels.begin(), ds.labels.end(), labels.mutable_data());
    d["pixels"] = pixels;
    d["labels"] = labels;
    d["num_classes"] = ds.num_classes;
    d["split"] = split_name(ds.split);
    d["provenance"] = ds.provenance;
    return d;
}

py::dict selection_to_dict(const SelectionResult& s) {
    py::dict d;
    d["domain"] = s.domain;
    d["config"] = s.config;
    d["exit"] = s.exit_index;
    d["accuracy"] = s.accuracy;
    d["baseline"] = s.baseline;
    d["loss"] = s.loss;
    d["difficulty"] = s.difficulty;
    return d;
}

py::dict ledger_to_dict(const ParamLedger& led) {
    py::dict d;
    d["stem"] = led.stem;
    d["base_block"] = led.base_block;
    d["base_bn"] = led.base_bn;
    d["base_classifier"] = led.base_classifier;
    d["base_shared"] = led.base_shared();
    d["adapter_block"] = led.adapter_block;
    d["adapter_filters"] = led.adapter_filters;
    d["head"] = led.head;
    d["domain_total"] = led.domain_total();
    d["combined_total"] = led.combined_total();
    py::list cumulative, fraction;
    for (size_t e = 1; e <= led.base_block.size(); ++e) {
        cumulative.append(led.cumulative_at_exit(static_cast<int>(e)));
        fraction.append(led.fraction_at_exit(static_cast<int>(e)));
    }
    d["cumulative_at_exit"] = cumulative;
    d["fraction_at_exit"] = fraction;
    d["unit_base"] = led.unit_base;
    d["unit_adapter"] = led.unit_adapter;
    return d;
}

TrainConfig config_from_kwargs(int epochs, int batch_size, double lr, std::vector<int> milestones, double momentum,
                               double weight_decay, const std::string& strategy, uint64_t seed) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.base_lr = lr;
    cfg.milestones = std::move(milestones);
    cfg.momentum = momentum;
    cfg.weight_decay = weight_decay;
    cfg.strategy = strategy_from_name(strategy);
    cfg.seed = seed;
    cfg.validate();
    return cfg;
}

py::list history_to_list(const TrainHistory& h) {
    py::list rows;
    for (const auto& e : h.epochs) {
        py::dict row;
        row["epoch"] = e.epoch;
        row["lr"] = e.lr;
        row["loss"] = e.loss;
        row["acc"] = e.acc;
        rows.append(std::move(row));
    }
    return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "adaptive incremental multi-domain learning core";

    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigurationError", PyExc_ValueError);

    // ---- tensor operations (forward) ----
    m.def(
        "conv2d",
        [](const FloatArray& x, const FloatArray& w, const FloatArray& b, int stride, int pad) {
            return array_from_tensor(conv2d(tensor_from_array(x), tensor_from_array(w), tensor_from_array(b), stride, pad));
        },
        py::arg("x"), py::arg("w"), py::arg("b"), py::arg("stride") = 1, py::arg("pad") = 0,
        "2D convolution over NCHW input with OIkk filters");
    m.def(
        "relu", [](const FloatArray& x) { return array_from_tensor(relu(tensor_from_array(x))); }, py::arg("x"));
    m.def(
        "linear",
        [](const FloatArray& x, const FloatArray& w, const FloatArray& b) {
            return array_from_tensor(linear(tensor_from_array(x), tensor_from_array(w), tensor_from_array(b)));
        },
        py::arg("x"), py::arg("w"), py::arg("b"));
    m.def(
        "global_avg_pool",
        [](const FloatArray& x) { return array_from_tensor(global_avg_pool(tensor_from_array(x))); }, py::arg("x"));
    m.def(
        "batchnorm",
        [](const FloatArray& x, const FloatArray& gamma, const FloatArray& beta, const FloatArray& running_mean,
           const FloatArray& running_var, bool training, double eps, double momentum) {
            BatchNormStats<float> stats(static_cast<int>(gamma.size()));
            stats.mean.assign(running_mean.data(), running_mean.data() + running_mean.size());
            stats.var.assign(running_var.data(), running_var.data() + running_var.size());
            auto y = batchnorm(tensor_from_array(x), tensor_from_array(gamma), tensor_from_array(beta), stats,
                               training, static_cast<float>(eps), static_cast<float>(momentum));
            py::dict out;
            out["y"] = array_from_tensor(y);
            out["running_mean"] = py::cast(stats.mean);
            out["running_var"] = py::cast(stats.var);
            return out;
        },
        py::arg("x"), py::arg("gamma"), py::arg("beta"), py::arg("running_mean"), py::arg("running_var"),
        py::arg("training") = false, py::arg("eps") = 1e-5, py::arg("momentum") = 0.1);
    m.def(
        "softmax_cross_entropy",
        [](const FloatArray& logits, const std::vector<int>& labels) {
            return softmax_cross_entropy(tensor_from_array(logits), labels).item();
        },
        py::arg("logits"), py::arg("labels"));
    m.def(
        "conv2d_grads",
        [](const FloatArray& x, const FloatArray& w, const FloatArray& b, int stride, int pad) {
            auto xt = tensor_from_array(x);
            auto wt = tensor_from_array(w);
            auto bt = tensor_from_array(b);
            xt.set_requires_grad(true);
            wt.set_requires_grad(true);
            bt.set_requires_grad(true);
            backward(sum(conv2d(xt, wt, bt, stride, pad)));
            py::dict out;
            out["x"] = py::cast(xt.grad());
            out["w"] = py::cast(wt.grad());
            out["b"] = py::cast(bt.grad());
            return out;
        },
        py::arg("x"), py::arg("w"), py::arg("b"), py::arg("stride") = 1, py::arg("pad") = 0,
        "gradients of sum(conv2d(x, w, b)) with respect to every input");

    // ---- schedules ----
    m.def(
        "lr_at",
        [](int epoch, int epochs, double base_lr, std::vector<int> milestones, double decay) {
            TrainConfig cfg;
            cfg.epochs = epochs;
            cfg.base_lr = base_lr;
            cfg.milestones = std::move(milestones);
            cfg.lr_decay = decay;
            return lr_at(epoch, cfg);
        },
        py::arg("epoch"), py::arg("epochs") = 120, py::arg("base_lr") = 0.1,
        py::arg("milestones") = std::vector<int>{80, 100}, py::arg("decay") = 0.1);
    m.def("weight_decay_for", &weight_decay_for, py::arg("train_size"));

    // ---- data ----
    m.def(
        "generate_synthetic",
        [](const std::string& kind, int n, const std::string& split, int side, uint64_t seed) {
            return dataset_to_dict(
                generate_synthetic(synth_kind_from_name(kind), n, split_from_name(split), side, seed));
        },
        py::arg("kind"), py::arg("n"), py::arg("split") = "train", py::arg("side") = 32, py::arg("seed") = 1);
    m.def(
        "write_synthetic_domain",
        [](const std::string& kind, int n_train, int n_val, int n_test, int side, uint64_t seed,
           const std::string& out_dir) {
            auto splits = generate_synthetic_splits(synth_kind_from_name(kind), n_train, n_val, n_test, side, seed);
            std::vector<std::string> paths;
            for (auto& ds : splits) {
                std::string path = out_dir + "/" + kind + "_" + split_name(ds.split) + ".amds";
                save_dataset(ds, path);
                paths.push_back(path);
            }
            return paths;
        },
        py::arg("kind"), py::arg("n_train"), py::arg("n_val"), py::arg("n_test"), py::arg("side"), py::arg("seed"),
        py::arg("out_dir"));
    m.def(
        "load_dataset", [](const std::string& path) { return dataset_to_dict(load_dataset(path)); }, py::arg("path"));
    m.def("decathlon_fixture", [] {
        py::list out;
        for (const auto& s : decathlon_fixture()) {
            py::dict d;
            d["name"] = s.name;
            d["num_classes"] = s.num_classes;
            d["train_size"] = s.train_size;
            d["val_size"] = s.val_size;
            d["test_size"] = s.test_size;
            out.append(std::move(d));
        }
        return out;
    });

    // ---- parameter accounting ----
    m.def(
        "count_params",
        [](const std::string& preset, int num_classes, const std::string& topology, bool adapt, uint64_t seed) {
            auto net = build_base<float>(NetworkConfig::preset(preset), num_classes, seed);
            net.freeze();
            auto dom = attach_domain(net, "ledger", num_classes, ExitTopology::parse(topology), adapt, seed);
            return ledger_to_dict(count_params(net, &dom));
        },
        py::arg("preset") = "resnet26", py::arg("num_classes") = 10, py::arg("topology") = "basic",
        py::arg("adapt") = true, py::arg("seed") = 1);

    // ---- training pipeline over files ----
    m.def(
        "train_base",
        [](const std::string& data_dir, const std::string& domain, const std::string& preset,
           const std::string& out_path, int epochs, int batch_size, double lr, std::vector<int> milestones,
           double momentum, double weight_decay, uint64_t seed) {
            auto config = NetworkConfig::preset(preset);
            auto train = load_dataset(data_dir + "/" + domain + "_train.amds");
            auto val = load_dataset(data_dir + "/" + domain + "_val.amds");
            auto stats = compute_pixel_stats(train, config.input_h, config.input_w);
            DomainDataT<float> data;
            data.train = preprocess<float>(train, stats, config.input_h, config.input_w);
            data.val = preprocess<float>(val, stats, config.input_h, config.input_w);
            auto net = build_base<float>(config, train.num_classes, CounterRng::derive(seed, "base"));
            auto history = train_base(net, data, config_from_kwargs(epochs, batch_size, lr, std::move(milestones),
                                                                    momentum, weight_decay, "joint", seed));
            net.freeze();
            save_base_checkpoint(out_path, net);
            return history_to_list(history);
        },
        py::arg("data_dir"), py::arg("domain"), py::arg("preset"), py::arg("out_path"), py::arg("epochs") = 30,
        py::arg("batch_size") = 32, py::arg("lr") = 0.1, py::arg("milestones") = std::vector<int>{20, 26},
        py::arg("momentum") = 0.9, py::arg("weight_decay") = -1.0, py::arg("seed") = 1);
    m.def(
        "train_domain",
        [](const std::string& base_path, const std::string& data_dir, const std::string& domain,
           const std::string& topology, const std::string& strategy, bool adapt, const std::string& out_path,
           int epochs, int batch_size, double lr, std::vector<int> milestones, double momentum, double weight_decay,
           uint64_t seed) {
            auto base = load_base_checkpoint<float>(base_path);
            auto train = load_dataset(data_dir + "/" + domain + "_train.amds");
            auto val = load_dataset(data_dir + "/" + domain + "_val.amds");
            auto stats = compute_pixel_stats(train, base.config.input_h, base.config.input_w);
            DomainDataT<float> data;
            data.train = preprocess<float>(train, stats, base.config.input_h, base.config.input_w);
            data.val = preprocess<float>(val, stats, base.config.input_h, base.config.input_w);
            auto dom = attach_domain(base, domain, train.num_classes, ExitTopology::parse(topology), adapt,
                                     CounterRng::derive(seed, "domain:" + domain));
            auto history = train_domain(base, dom, data,
                                        config_from_kwargs(epochs, batch_size, lr, std::move(milestones), momentum,
                                                           weight_decay, strategy, seed));
            if (!out_path.empty()) save_domain_bundle(out_path, dom);
            return history_to_list(history);
        },
        py::arg("base_path"), py::arg("data_dir"), py::arg("domain"), py::arg("topology") = "mlp:128",
        py::arg("strategy") = "joint", py::arg("adapt") = true, py::arg("out_path") = "", py::arg("epochs") = 30,
        py::arg("batch_size") = 32, py::arg("lr") = 0.1, py::arg("milestones") = std::vector<int>{20, 26},
        py::arg("momentum") = 0.9, py::arg("weight_decay") = -1.0, py::arg("seed") = 1);
    m.def(
        "evaluate",
        [](const std::string& base_path, const std::string& bundle_path, const std::string& data_dir,
           const std::string& domain, const std::string& split) {
            auto base = load_base_checkpoint<float>(base_path);
            auto dom = load_domain_bundle<float>(bundle_path, base);
            auto train = load_dataset(data_dir + "/" + domain + "_train.amds");
            auto target = load_dataset(data_dir + "/" + domain + "_" + split + ".amds");
            auto stats = compute_pixel_stats(train, base.config.input_h, base.config.input_w);
            auto prepared = preprocess<float>(target, stats, base.config.input_h, base.config.input_w);
            return evaluate(base, dom, prepared);
        },
        py::arg("base_path"), py::arg("bundle_path"), py::arg("data_dir"), py::arg("domain"),
        py::arg("split") = "val");

    // ---- exit policy ----
    m.def(
        "table2_best_row",
        [](double threshold) {
            auto result = best_row(table2_fixture(), threshold);
            py::dict out;
            py::list sels;
            for (const auto& s : result.selections) sels.append(selection_to_dict(s));
            out["selections"] = sels;
            out["mean_accuracy"] = result.mean_accuracy;
            return out;
        },
        py::arg("threshold") = 3.5, "threshold exit selection replayed over the embedded accuracy fixture");
    m.def(
        "select_exit",
        [](const std::vector<std::map<std::string, std::string>>& rows, const std::string& domain, double threshold) {
            AccuracyTable table;
            for (const auto& r : rows) {
                AccuracyRow row;
                row.config = r.at("config");
                row.exit_index = std::stoi(r.at("exit"));
                row.cost = std::stod(r.at("cost"));
                for (const auto& [k, v] : r) {
                    if (k == "config" || k == "exit" || k == "cost") continue;
                    row.acc[k] = std::stod(v);
                    if (std::find(table.domains.begin(), table.domains.end(), k) == table.domains.end())
                        table.domains.push_back(k);
                }
                table.num_exits = std::max(table.num_exits, row.exit_index);
                table.rows.push_back(std::move(row));
            }
            table.validate();
            return selection_to_dict(select_exit(table, domain, threshold));
        },
        py::arg("rows"), py::arg("domain"), py::arg("threshold") = 3.5,
        "rows: dicts with config/exit/cost plus <domain>: accuracy entries");
}
