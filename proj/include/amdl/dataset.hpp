#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amdl/errors.hpp"

namespace amdl {

enum class Split : uint8_t { train = 0, val = 1, test = 2 };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

// Labeled u8 image set with a fixed shape. Pixels are HWC per image,
// contiguous over images. Immutable once created.
struct DatasetContainer {
    int count = 0;
    int height = 0;
    int width = 0;
    int channels = 0;
    int num_classes = 0;
    Split split = Split::train;
    std::string provenance;

    std::vector<uint16_t> labels;  // count entries, each < num_classes
    std::vector<uint8_t> pixels;   // count * height * width * channels

    size_t image_bytes() const { return static_cast<size_t>(height) * width * channels; }
    const uint8_t* image(int i) const { return pixels.data() + static_cast<size_t>(i) * image_bytes(); }

    void validate() const {
        if (count <= 0) throw DimensionError("dataset: count must be positive");
        if (height <= 0 || width <= 0 || channels <= 0) throw DimensionError("dataset: bad image shape");
        if (num_classes <= 0) throw DimensionError("dataset: num_classes must be positive");
        if (labels.size() != static_cast<size_t>(count)) throw DimensionError("dataset: label count mismatch");
        if (pixels.size() != static_cast<size_t>(count) * image_bytes())
            throw DimensionError("dataset: pixel buffer size mismatch");
        for (uint16_t l : labels)
            if (l >= num_classes) throw DimensionError("dataset: label " + std::to_string(l) + " out of range");
    }
};

// "AMDS" | u16 version | u32 count | u16 H | u16 W | u16 C | u16 num_classes
//        | u8 split | u16 labels[count] | u8 pixels[count*H*W*C] | u32 crc32
inline constexpr uint16_t kDatasetVersion = 1;
inline constexpr size_t kDatasetHeaderBytes = 19;

std::vector<uint8_t> encode_dataset(const DatasetContainer& ds);
DatasetContainer decode_dataset(const std::vector<uint8_t>& bytes, std::string provenance = "");

void save_dataset(const DatasetContainer& ds, const std::string& path);
DatasetContainer load_dataset(const std::string& path);

}  // namespace amdl
