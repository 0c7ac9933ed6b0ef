#pragma once

#include <array>
#include <string>

#include "amdl/dataset.hpp"

namespace amdl {

// Synthetic domains with a controlled difficulty ladder:
//
//   easy   - 2 classes told apart by the dominant color channel; solvable
//            from per-channel means alone.
//   medium - 10 classes of oriented bars with a faint class-correlated tint;
//            orientation needs convolutional features, the tint leaks a
//            partial signal into channel means.
//   hard   - 20 classes indexed by (blob count 2..6) x (arrangement: row,
//            column, diagonal, ring); the arrangement is translation-jittered
//            and carries no channel-mean signal at all.
enum class SynthKind { easy, medium, hard };

const char* synth_kind_name(SynthKind k);
SynthKind synth_kind_from_name(const std::string& name);
int synth_num_classes(SynthKind k);

// One split. Deterministic in (kind, n, split, side, seed): every image is a
// pure function of the per-image counter stream. Labels are assigned
// round-robin, so classes balance within one sample.
DatasetContainer generate_synthetic(SynthKind kind, int n, Split split, int side, uint64_t seed);

// train/val/test in one call.
std::array<DatasetContainer, 3> generate_synthetic_splits(SynthKind kind, int n_train, int n_val, int n_test,
                                                          int side, uint64_t seed);

}  // namespace amdl
