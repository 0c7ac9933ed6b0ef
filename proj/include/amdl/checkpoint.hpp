#pragma once

#include <map>
#include <string>
#include <vector>

#include "amdl/bytes.hpp"
#include "amdl/network.hpp"

namespace amdl {

// Container behind both checkpoint kinds:
//
//   "AMDL" | u16 version | u32 meta_count | { str key, str value }*
//         | u32 tensor_count | { str name, u8 rank, u32 dims[rank], f32 values }*
//         | u32 crc32 over all preceding bytes
//
// Strings are u16-length-prefixed UTF-8; all integers and floats little-endian.
struct NamedTensorEntry {
    std::string name;
    Shape shape;
    std::vector<float> values;
};

struct NamedTensorFile {
    std::map<std::string, std::string> meta;
    std::vector<NamedTensorEntry> tensors;
};

inline constexpr uint16_t kCheckpointVersion = 1;

std::vector<uint8_t> encode_checkpoint(const NamedTensorFile& file);
NamedTensorFile decode_checkpoint(const std::vector<uint8_t>& bytes);

void write_checkpoint_file(const std::string& path, const NamedTensorFile& file);
NamedTensorFile read_checkpoint_file(const std::string& path);

std::string hex_u32(uint32_t v);

// ---------------------------------------------------------------------------
// Base network checkpoints
// ---------------------------------------------------------------------------

template <class T>
NamedTensorFile base_to_file(BaseNetworkT<T>& net) {
    NamedTensorFile file;
    file.meta["kind"] = "base";
    file.meta["config"] = net.config.canonical();
    file.meta["config_hash"] = hex_u32(net.config.hash());
    file.meta["num_classes"] = std::to_string(net.num_classes);
    file.meta["frozen"] = net.frozen() ? "1" : "0";
    net.visit_buffers([&](const NamedBufferRef<T>& ref) {
        NamedTensorEntry e;
        e.name = ref.name;
        e.shape = ref.shape;
        e.values.assign(ref.data->begin(), ref.data->end());
        file.tensors.push_back(std::move(e));
    });
    return file;
}

namespace detail {

template <class Net, class T>
void fill_buffers_from_file(Net& net, const NamedTensorFile& file) {
    std::map<std::string, const NamedTensorEntry*> by_name;
    for (const auto& e : file.tensors) by_name[e.name] = &e;
    size_t used = 0;
    net.visit_buffers([&](const NamedBufferRef<T>& ref) {
        auto it = by_name.find(ref.name);
        if (it == by_name.end()) throw FormatError("checkpoint is missing tensor '" + ref.name + "'", 0);
        const NamedTensorEntry& e = *it->second;
        if (e.shape != ref.shape)
            throw FormatError("checkpoint tensor '" + ref.name + "' has shape " + shape_str(e.shape) +
                                  ", expected " + shape_str(ref.shape),
                              0);
        ref.data->assign(e.values.begin(), e.values.end());
        ++used;
    });
    if (used != file.tensors.size())
        throw FormatError("checkpoint carries " + std::to_string(file.tensors.size()) + " tensors, expected " +
                              std::to_string(used),
                          0);
}

inline const std::string& require_meta(const NamedTensorFile& file, const std::string& key) {
    auto it = file.meta.find(key);
    if (it == file.meta.end()) throw FormatError("checkpoint is missing metadata key '" + key + "'", 0);
    return it->second;
}

}  // namespace detail

template <class T>
void save_base_checkpoint(const std::string& path, BaseNetworkT<T>& net) {
    write_checkpoint_file(path, base_to_file(net));
}

template <class T>
BaseNetworkT<T> load_base_checkpoint(const std::string& path) {
    NamedTensorFile file = read_checkpoint_file(path);
    if (detail::require_meta(file, "kind") != "base") throw FormatError("not a base checkpoint: " + path, 0);
    auto config = NetworkConfig::parse(detail::require_meta(file, "config"));
    int num_classes = std::stoi(detail::require_meta(file, "num_classes"));
    auto net = build_base<T>(config, num_classes, 0);
    detail::fill_buffers_from_file<BaseNetworkT<T>, T>(net, file);
    net.mark_frozen(detail::require_meta(file, "frozen") == "1");
    return net;
}

// ---------------------------------------------------------------------------
// Domain adapter bundles
// ---------------------------------------------------------------------------

template <class T>
NamedTensorFile domain_to_file(DomainAdapterSetT<T>& dom) {
    NamedTensorFile file;
    file.meta["kind"] = "domain";
    file.meta["domain"] = dom.domain;
    file.meta["num_classes"] = std::to_string(dom.num_classes);
    file.meta["topology"] = dom.topology.tag();
    file.meta["adapted"] = dom.adapted ? "1" : "0";
    file.meta["base_config_hash"] = hex_u32(dom.base_config_hash);
    dom.visit_buffers([&](const NamedBufferRef<T>& ref) {
        NamedTensorEntry e;
        e.name = ref.name;
        e.shape = ref.shape;
        e.values.assign(ref.data->begin(), ref.data->end());
        file.tensors.push_back(std::move(e));
    });
    return file;
}

template <class T>
void save_domain_bundle(const std::string& path, DomainAdapterSetT<T>& dom) {
    write_checkpoint_file(path, domain_to_file(dom));
}

inline uint32_t bundle_base_hash(const NamedTensorFile& file) {
    if (detail::require_meta(file, "kind") != "domain") throw FormatError("not an adapter bundle", 0);
    return static_cast<uint32_t>(std::stoul(detail::require_meta(file, "base_config_hash"), nullptr, 16));
}

template <class T>
DomainAdapterSetT<T> domain_from_file(const NamedTensorFile& file, const BaseNetworkT<T>& base) {
    uint32_t expect_hash = bundle_base_hash(file);
    if (expect_hash != base.config.hash())
        throw FormatError("adapter bundle was trained against base config " + hex_u32(expect_hash) +
                              ", loaded base is " + hex_u32(base.config.hash()),
                          0);
    auto dom = attach_domain(base, detail::require_meta(file, "domain"),
                             std::stoi(detail::require_meta(file, "num_classes")),
                             ExitTopology::parse(detail::require_meta(file, "topology")),
                             detail::require_meta(file, "adapted") == "1", 0);
    detail::fill_buffers_from_file<DomainAdapterSetT<T>, T>(dom, file);
    return dom;
}

template <class T>
DomainAdapterSetT<T> load_domain_bundle(const std::string& path, const BaseNetworkT<T>& base) {
    return domain_from_file(read_checkpoint_file(path), base);
}

}  // namespace amdl
