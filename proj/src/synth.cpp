#include "amdl/synth.hpp"

#include <cmath>

#include "amdl/rng.hpp"

namespace amdl {

const char* synth_kind_name(SynthKind k) {
    switch (k) {
        case SynthKind::easy: return "easy";
        case SynthKind::medium: return "medium";
        case SynthKind::hard: return "hard";
    }
    return "easy";
}

SynthKind synth_kind_from_name(const std::string& name) {
    if (name == "easy") return SynthKind::easy;
    if (name == "medium") return SynthKind::medium;
    if (name == "hard") return SynthKind::hard;
    throw ConfigError("unknown synthetic kind '" + name + "' (expected easy, medium, or hard)");
}

int synth_num_classes(SynthKind k) {
    switch (k) {
        case SynthKind::easy: return 2;
        case SynthKind::medium: return 10;
        case SynthKind::hard: return 20;
    }
    return 2;
}

namespace {

struct Canvas {
    uint8_t* px;
    int side;

    void set(int y, int x, double r, double g, double b) {
        if (y < 0 || y >= side || x < 0 || x >= side) return;
        uint8_t* p = px + (static_cast<size_t>(y) * side + x) * 3;
        p[0] = static_cast<uint8_t>(std::min(255.0, std::max(0.0, r)));
        p[1] = static_cast<uint8_t>(std::min(255.0, std::max(0.0, g)));
        p[2] = static_cast<uint8_t>(std::min(255.0, std::max(0.0, b)));
    }
};

void fill_background(Canvas& c, CounterRng& rng, double hi) {
    for (int i = 0; i < c.side * c.side; ++i) {
        uint8_t* p = c.px + static_cast<size_t>(i) * 3;
        p[0] = static_cast<uint8_t>(rng.next_below(static_cast<uint64_t>(hi)));
        p[1] = static_cast<uint8_t>(rng.next_below(static_cast<uint64_t>(hi)));
        p[2] = static_cast<uint8_t>(rng.next_below(static_cast<uint64_t>(hi)));
    }
}

void draw_disc(Canvas& c, CounterRng& rng, double cy, double cx, double radius, double r, double g, double b) {
    int y0 = static_cast<int>(std::floor(cy - radius)), y1 = static_cast<int>(std::ceil(cy + radius));
    int x0 = static_cast<int>(std::floor(cx - radius)), x1 = static_cast<int>(std::ceil(cx + radius));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            double dy = y - cy, dx = x - cx;
            if (dy * dy + dx * dx > radius * radius) continue;
            double jitter = rng.uniform(-18.0, 18.0);
            c.set(y, x, r + jitter, g + jitter, b + jitter);
        }
}

void render_easy(Canvas& c, int label, CounterRng& rng) {
    // dominant channel: class 0 -> red, class 1 -> green
    double base = rng.uniform(150.0, 230.0);
    for (int i = 0; i < c.side * c.side; ++i) {
        uint8_t* p = c.px + static_cast<size_t>(i) * 3;
        double lo0 = rng.uniform(0.0, 96.0);
        double lo1 = rng.uniform(0.0, 96.0);
        double hi = base + rng.uniform(-25.0, 25.0);
        double r = label == 0 ? hi : lo0;
        double g = label == 0 ? lo0 : hi;
        p[0] = static_cast<uint8_t>(std::min(255.0, std::max(0.0, r)));
        p[1] = static_cast<uint8_t>(std::min(255.0, std::max(0.0, g)));
        p[2] = static_cast<uint8_t>(std::min(255.0, std::max(0.0, lo1)));
    }
}

void render_medium(Canvas& c, int label, CounterRng& rng) {
    fill_background(c, rng, 40.0);
    double s = c.side / 32.0;
    double angle = label * 0.3141592653589793;  // class * 18 degrees
    double cy = c.side / 2.0 + rng.uniform(-2.0, 2.0) * s;
    double cx = c.side / 2.0 + rng.uniform(-2.0, 2.0) * s;
    double half_len = (12.0 + rng.uniform(-1.5, 1.5)) * s;
    double thickness = 1.1 * s;
    // faint opposing tint ramps leak a partial class signal into channel means
    double r = 150.0 + 8.0 * label + rng.uniform(-20.0, 20.0);
    double g = 230.0 - 8.0 * label + rng.uniform(-20.0, 20.0);
    double b = 180.0 + rng.uniform(-20.0, 20.0);
    double dy = std::sin(angle), dx = std::cos(angle);
    for (double t = -half_len; t <= half_len; t += 0.5) {
        for (double o = -thickness; o <= thickness; o += 0.5) {
            double y = cy + t * dy - o * dx;
            double x = cx + t * dx + o * dy;
            double jitter = rng.uniform(-12.0, 12.0);
            c.set(static_cast<int>(std::lround(y)), static_cast<int>(std::lround(x)), r + jitter, g + jitter,
                  b + jitter);
        }
    }
}

void render_hard(Canvas& c, int label, CounterRng& rng) {
    fill_background(c, rng, 50.0);
    double s = c.side / 32.0;
    int blob_count = 2 + label / 4;
    int arrangement = label % 4;
    double cy = c.side / 2.0 + rng.uniform(-3.0, 3.0) * s;
    double cx = c.side / 2.0 + rng.uniform(-3.0, 3.0) * s;
    double radius = (2.1 + rng.uniform(-0.3, 0.3)) * s;
    double span = 11.0 * s;  // half-extent of the pattern
    double shade = rng.uniform(185.0, 240.0);

    for (int i = 0; i < blob_count; ++i) {
        double frac = blob_count > 1 ? static_cast<double>(i) / (blob_count - 1) : 0.5;
        double offset = (frac - 0.5) * 2.0 * span;
        double y = cy, x = cx;
        switch (arrangement) {
            case 0: x = cx + offset; break;                                    // row
            case 1: y = cy + offset; break;                                    // column
            case 2: y = cy + offset * 0.7071; x = cx + offset * 0.7071; break; // main diagonal
            case 3: {                                                          // ring, 45-degree phase
                double a = 0.7853981633974483 + i * 6.283185307179586 / blob_count;
                y = cy + 0.8 * span * std::sin(a);
                x = cx + 0.8 * span * std::cos(a);
                break;
            }
        }
        double jy = rng.uniform(-1.0, 1.0) * s;
        double jx = rng.uniform(-1.0, 1.0) * s;
        draw_disc(c, rng, y + jy, x + jx, radius, shade, shade, shade);
    }
}

}  // namespace

DatasetContainer generate_synthetic(SynthKind kind, int n, Split split, int side, uint64_t seed) {
    int num_classes = synth_num_classes(kind);
    if (n < num_classes)
        throw DimensionError("generate_synthetic: n=" + std::to_string(n) + " is below the class count " +
                             std::to_string(num_classes));
    if (side < 16) throw DimensionError("generate_synthetic: image side must be at least 16");

    DatasetContainer ds;
    ds.count = n;
    ds.height = ds.width = side;
    ds.channels = 3;
    ds.num_classes = num_classes;
    ds.split = split;
    ds.provenance = std::string("synthetic:") + synth_kind_name(kind) + ":" + split_name(split) + ":seed=" +
                    std::to_string(seed);
    ds.labels.resize(static_cast<size_t>(n));
    ds.pixels.resize(static_cast<size_t>(n) * ds.image_bytes());

    uint64_t stream = CounterRng::derive(seed, std::string("synth-") + synth_kind_name(kind) + "-" + split_name(split));
    for (int i = 0; i < n; ++i) {
        int label = i % num_classes;
        ds.labels[static_cast<size_t>(i)] = static_cast<uint16_t>(label);
        CounterRng rng(CounterRng::mix(stream, static_cast<uint64_t>(i)));
        Canvas canvas{ds.pixels.data() + static_cast<size_t>(i) * ds.image_bytes(), side};
        switch (kind) {
            case SynthKind::easy: render_easy(canvas, label, rng); break;
            case SynthKind::medium: render_medium(canvas, label, rng); break;
            case SynthKind::hard: render_hard(canvas, label, rng); break;
        }
    }
    return ds;
}

std::array<DatasetContainer, 3> generate_synthetic_splits(SynthKind kind, int n_train, int n_val, int n_test,
                                                          int side, uint64_t seed) {
    return {generate_synthetic(kind, n_train, Split::train, side, seed),
            generate_synthetic(kind, n_val, Split::val, side, seed),
            generate_synthetic(kind, n_test, Split::test, side, seed)};
}

}  // namespace amdl
