#include "amdl/dataset.hpp"

#include <cstring>

#include "amdl/bytes.hpp"
#include "amdl/crc32.hpp"

namespace amdl {

namespace {
constexpr char kMagic[4] = {'A', 'M', 'D', 'S'};
}

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "train";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw ConfigError("unknown split '" + name + "' (expected train, val, or test)");
}

std::vector<uint8_t> encode_dataset(const DatasetContainer& ds) {
    ds.validate();
    ByteWriter w;
    w.bytes(kMagic, 4);
    w.u16(kDatasetVersion);
    w.u32(static_cast<uint32_t>(ds.count));
    w.u16(static_cast<uint16_t>(ds.height));
    w.u16(static_cast<uint16_t>(ds.width));
    w.u16(static_cast<uint16_t>(ds.channels));
    w.u16(static_cast<uint16_t>(ds.num_classes));
    w.u8(static_cast<uint8_t>(ds.split));
    for (uint16_t l : ds.labels) w.u16(l);
    w.bytes(ds.pixels.data(), ds.pixels.size());
    w.u32(crc32(w.buffer().data(), w.size()));
    return w.buffer();
}

DatasetContainer decode_dataset(const std::vector<uint8_t>& bytes, std::string provenance) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError("bad magic, not an AMDS dataset", 0);
    if (bytes.size() < kDatasetHeaderBytes + 4) throw FormatError("truncated dataset header", bytes.size());
    uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i) stored_crc |= static_cast<uint32_t>(bytes[bytes.size() - 4 + i]) << (8 * i);
    if (stored_crc != crc32(bytes.data(), bytes.size() - 4))
        throw FormatError("checksum mismatch", bytes.size() - 4);

    ByteReader r(bytes.data(), bytes.size() - 4);
    uint8_t magic[4];
    r.bytes(magic, 4);
    uint16_t version = r.u16();
    if (version != kDatasetVersion) throw FormatError("unsupported dataset version " + std::to_string(version), 4);

    DatasetContainer ds;
    ds.count = static_cast<int>(r.u32());
    ds.height = r.u16();
    ds.width = r.u16();
    ds.channels = r.u16();
    ds.num_classes = r.u16();
    uint8_t split = r.u8();
    if (split > 2) throw FormatError("bad split tag " + std::to_string(split), r.offset() - 1);
    ds.split = static_cast<Split>(split);
    ds.provenance = std::move(provenance);

    if (ds.count <= 0) throw FormatError("dataset with non-positive count", 6);
    ds.labels.resize(static_cast<size_t>(ds.count));
    for (auto& l : ds.labels) l = r.u16();
    ds.pixels.resize(static_cast<size_t>(ds.count) * ds.image_bytes());
    r.bytes(ds.pixels.data(), ds.pixels.size());
    if (r.remaining() != 0) throw FormatError("trailing bytes after pixel data", r.offset());
    ds.validate();
    return ds;
}

void save_dataset(const DatasetContainer& ds, const std::string& path) { write_file_bytes(path, encode_dataset(ds)); }

DatasetContainer load_dataset(const std::string& path) { return decode_dataset(read_file_bytes(path), path); }

}  // namespace amdl
