#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mew/metrics.hpp"
#include "mew/rng.hpp"
#include "mew/tensor.hpp"

namespace mew {

/// One image/mask pair. Image is rank-3 (C,H,W) scaled to [0,1]; the mask
/// carries integer labels and matches the image extents.
struct Sample {
    std::string id;
    Tensor image;
    MaskArray mask; // batch == 1
};

struct ManifestEntry {
    std::string id, image_path, mask_path, split;
};

/// Line-oriented manifest: `id<TAB>image_path<TAB>mask_path<TAB>split`.
/// Paths are relative to the manifest's directory.
struct DatasetManifest {
    std::string root;
    std::vector<ManifestEntry> entries;

    std::vector<const ManifestEntry*> split_entries(const std::string& split) const;

    static DatasetManifest load(const std::string& manifest_path);
    void save(const std::string& manifest_path) const;
};

struct SynthConfig {
    int64_t count = 64;
    int64_t extent = 64; // square, divisible by 16
    int num_classes = 2;
    double train_fraction = 0.7;
    uint64_t seed = 0;
};

/// Writes a deterministic synthetic segmentation dataset under root_dir
/// (images/, masks/, manifest.tsv): random anti-aliased ellipses and
/// rectangles on a textured background with exact masks. Foreground
/// fraction is kept inside (0.05, 0.6) per image. Split assignment is a
/// seeded shuffle at the configured train fraction.
DatasetManifest synth_generate(const std::string& root_dir, const SynthConfig& cfg);

/// Loads one sample. An image path ending in ".rgb" denotes three
/// co-registered PGM planes "<stem>.r.pgm/.g.pgm/.b.pgm"; a ".pgm" path
/// is a single grayscale plane.
Sample load_sample(const DatasetManifest& m, const ManifestEntry& e, int num_classes);

/// Flip/rotate with the identical transform on image and mask:
/// horizontal and vertical flips with p=0.5 each, then a uniform quarter
/// turn from {0, 90, 180, 270} degrees. Deterministic per seed.
Sample augment(const Sample& s, uint64_t seed);
Sample augment_with(const Sample& s, bool hflip, bool vflip, int quarter_turns);

struct Batch {
    Tensor images; // (B,C,H,W)
    MaskArray masks;
    std::vector<std::string> ids;
};

/// One epoch worth of batches in seeded shuffled order; the final short
/// batch is emitted.
std::vector<Batch> batch_iter(const std::vector<Sample>& samples, int64_t batch_size,
                              uint64_t shuffle_seed);

std::vector<size_t> shuffled_indices(size_t n, uint64_t seed);

} // namespace mew
