#pragma once

#include <vector>

#include "amdl/dataset.hpp"
#include "amdl/rng.hpp"
#include "amdl/tensor.hpp"

namespace amdl {

// Bilinear resample of one u8 HWC image to CHW doubles in [0,1]. Half-pixel
// source mapping (src = (dst + 0.5) * scale - 0.5, clamped), which reduces to
// the identity when the sizes match.
inline std::vector<double> resize_image_01(const uint8_t* px, int h, int w, int channels, int th, int tw) {
    std::vector<double> out(static_cast<size_t>(channels) * th * tw);
    double sy = static_cast<double>(h) / th;
    double sx = static_cast<double>(w) / tw;
    for (int y = 0; y < th; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        if (fy < 0) fy = 0;
        if (fy > h - 1) fy = h - 1;
        int y0 = static_cast<int>(fy);
        int y1 = y0 + 1 < h ? y0 + 1 : y0;
        double wy = fy - y0;
        for (int x = 0; x < tw; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            if (fx < 0) fx = 0;
            if (fx > w - 1) fx = w - 1;
            int x0 = static_cast<int>(fx);
            int x1 = x0 + 1 < w ? x0 + 1 : x0;
            double wx = fx - x0;
            for (int c = 0; c < channels; ++c) {
                auto at = [&](int yy, int xx) {
                    return px[(static_cast<size_t>(yy) * w + xx) * channels + c] / 255.0;
                };
                double top = at(y0, x0) * (1 - wx) + at(y0, x1) * wx;
                double bot = at(y1, x0) * (1 - wx) + at(y1, x1) * wx;
                out[(static_cast<size_t>(c) * th + y) * tw + x] = top * (1 - wy) + bot * wy;
            }
        }
    }
    return out;
}

// Per-channel moments of the resized train split, in [0,1] units. The
// standard deviation is floored at 1e-6 so constant inputs stay finite.
struct PixelStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

inline PixelStats compute_pixel_stats(const DatasetContainer& train, int th, int tw) {
    train.validate();
    PixelStats st;
    st.mean.assign(static_cast<size_t>(train.channels), 0.0);
    st.stddev.assign(static_cast<size_t>(train.channels), 0.0);
    std::vector<double> sq(static_cast<size_t>(train.channels), 0.0);
    double per_channel = static_cast<double>(train.count) * th * tw;
    for (int i = 0; i < train.count; ++i) {
        auto img = resize_image_01(train.image(i), train.height, train.width, train.channels, th, tw);
        for (int c = 0; c < train.channels; ++c) {
            const double* p = img.data() + static_cast<size_t>(c) * th * tw;
            for (int j = 0; j < th * tw; ++j) {
                st.mean[static_cast<size_t>(c)] += p[j];
                sq[static_cast<size_t>(c)] += p[j] * p[j];
            }
        }
    }
    for (int c = 0; c < train.channels; ++c) {
        double m = st.mean[static_cast<size_t>(c)] / per_channel;
        double var = sq[static_cast<size_t>(c)] / per_channel - m * m;
        if (var < 0) var = 0;
        st.mean[static_cast<size_t>(c)] = m;
        double sd = std::sqrt(var);
        st.stddev[static_cast<size_t>(c)] = sd > 1e-6 ? sd : 1e-6;
    }
    return st;
}

// A whole split resized, scaled to [0,1], and standardized with train-split
// statistics; images stored CHW, ready to gather into batches.
template <class T>
struct PreparedDataset {
    int count = 0, channels = 0, height = 0, width = 0;
    std::vector<T> data;
    std::vector<int> labels;

    TensorT<T> gather(const std::vector<int>& indices) const {
        size_t image = static_cast<size_t>(channels) * height * width;
        std::vector<T> out(indices.size() * image);
        for (size_t i = 0; i < indices.size(); ++i)
            std::copy_n(data.data() + static_cast<size_t>(indices[i]) * image, image, out.data() + i * image);
        return TensorT<T>::from_data({static_cast<int>(indices.size()), channels, height, width}, std::move(out));
    }

    std::vector<int> gather_labels(const std::vector<int>& indices) const {
        std::vector<int> out(indices.size());
        for (size_t i = 0; i < indices.size(); ++i) out[i] = labels[static_cast<size_t>(indices[i])];
        return out;
    }
};

template <class T>
PreparedDataset<T> preprocess(const DatasetContainer& ds, const PixelStats& stats, int th, int tw) {
    if (th < 8 || tw < 8) throw DimensionError("preprocess: target size must be at least 8x8");
    ds.validate();
    PreparedDataset<T> prep;
    prep.count = ds.count;
    prep.channels = ds.channels;
    prep.height = th;
    prep.width = tw;
    prep.data.resize(static_cast<size_t>(ds.count) * ds.channels * th * tw);
    prep.labels.assign(ds.labels.begin(), ds.labels.end());
    size_t image = static_cast<size_t>(ds.channels) * th * tw;
    for (int i = 0; i < ds.count; ++i) {
        auto img = resize_image_01(ds.image(i), ds.height, ds.width, ds.channels, th, tw);
        T* out = prep.data.data() + static_cast<size_t>(i) * image;
        for (int c = 0; c < ds.channels; ++c) {
            double m = stats.mean[static_cast<size_t>(c)];
            double sd = stats.stddev[static_cast<size_t>(c)];
            const double* p = img.data() + static_cast<size_t>(c) * th * tw;
            for (int j = 0; j < th * tw; ++j) out[static_cast<size_t>(c) * th * tw + j] = static_cast<T>((p[j] - m) / sd);
        }
    }
    return prep;
}

// Deterministic batch order: Fisher-Yates under a per-epoch counter stream;
// the final partial batch is kept.
inline std::vector<std::vector<int>> make_batches(int count, int batch_size, uint64_t seed, int epoch, bool shuffle) {
    if (batch_size < 1) throw DimensionError("make_batches: batch size must be positive");
    std::vector<int> order(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) order[static_cast<size_t>(i)] = i;
    if (shuffle) {
        CounterRng rng(CounterRng::mix(CounterRng::derive(seed, "batch-order"), static_cast<uint64_t>(epoch)));
        for (int i = count - 1; i > 0; --i) {
            int j = static_cast<int>(rng.next_below(static_cast<uint64_t>(i) + 1));
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
        }
    }
    std::vector<std::vector<int>> batches;
    for (int at = 0; at < count; at += batch_size) {
        int end = std::min(count, at + batch_size);
        batches.emplace_back(order.begin() + at, order.begin() + end);
    }
    return batches;
}

}  // namespace amdl
