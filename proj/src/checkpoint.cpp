#include "amdl/checkpoint.hpp"

#include <cstdio>

#include "amdl/crc32.hpp"

namespace amdl {

namespace {
constexpr char kMagic[4] = {'A', 'M', 'D', 'L'};
}

std::string hex_u32(uint32_t v) {
    char buf[9];
    std::snprintf(buf, sizeof(buf), "%08x", v);
    return buf;
}

std::vector<uint8_t> encode_checkpoint(const NamedTensorFile& file) {
    ByteWriter w;
    w.bytes(kMagic, 4);
    w.u16(kCheckpointVersion);
    w.u32(static_cast<uint32_t>(file.meta.size()));
    for (const auto& [key, value] : file.meta) {
        w.str(key);
        w.str(value);
    }
    w.u32(static_cast<uint32_t>(file.tensors.size()));
    for (const auto& t : file.tensors) {
        w.str(t.name);
        w.u8(static_cast<uint8_t>(t.shape.size()));
        for (int d : t.shape) w.u32(static_cast<uint32_t>(d));
        for (float v : t.values) w.f32(v);
    }
    w.u32(crc32(w.buffer().data(), w.size()));
    return w.buffer();
}

NamedTensorFile decode_checkpoint(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError("bad magic, not an AMDL checkpoint", 0);
    if (bytes.size() < 10) throw FormatError("truncated checkpoint header", bytes.size());
    uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i) stored_crc |= static_cast<uint32_t>(bytes[bytes.size() - 4 + i]) << (8 * i);
    uint32_t actual_crc = crc32(bytes.data(), bytes.size() - 4);
    if (stored_crc != actual_crc) throw FormatError("checksum mismatch", bytes.size() - 4);

    ByteReader r(bytes.data(), bytes.size() - 4);
    uint8_t magic[4];
    r.bytes(magic, 4);
    uint16_t version = r.u16();
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);

    NamedTensorFile file;
    uint32_t meta_count = r.u32();
    for (uint32_t i = 0; i < meta_count; ++i) {
        std::string key = r.str();
        file.meta[key] = r.str();
    }
    uint32_t tensor_count = r.u32();
    for (uint32_t i = 0; i < tensor_count; ++i) {
        NamedTensorEntry e;
        e.name = r.str();
        uint8_t rank = r.u8();
        int64_t numel = 1;
        for (int d = 0; d < rank; ++d) {
            e.shape.push_back(static_cast<int>(r.u32()));
            numel *= e.shape.back();
        }
        if (numel < 0 || numel > (1ll << 31)) throw FormatError("implausible tensor extent", r.offset());
        e.values.resize(static_cast<size_t>(numel));
        for (auto& v : e.values) v = r.f32();
        file.tensors.push_back(std::move(e));
    }
    if (r.remaining() != 0) throw FormatError("trailing bytes after tensor table", r.offset());
    return file;
}

void write_checkpoint_file(const std::string& path, const NamedTensorFile& file) {
    write_file_bytes(path, encode_checkpoint(file));
}

NamedTensorFile read_checkpoint_file(const std::string& path) { return decode_checkpoint(read_file_bytes(path)); }

}  // namespace amdl
