#pragma once

#include <array>
#include <string>
#include <vector>

#include "mew/checkpoint.hpp"
#include "mew/data.hpp"
#include "mew/loss.hpp"
#include "mew/metrics.hpp"
#include "mew/unet.hpp"

namespace mew {

struct TrainConfig {
    std::string data_dir;            // dataset root containing manifest.tsv
    std::string train_split = "train";
    std::string val_split = "test";

    NetworkConfig net;

    std::string optimizer = "adamw"; // adamw | sgd
    double lr = 1e-3;
    double lr_min = 1e-6;
    double weight_decay = 1e-2;      // AdamW default; use 1e-4 for SGD
    double momentum = 0.9;
    double clip_norm = 0.0;          // 0 disables gradient clipping
    int64_t epochs = 300;
    int64_t batch_size = 8;
    LossWeights loss_weights;
    bool augment = true;
    uint64_t seed = 0;

    std::string out_dir = "run";
};

struct EpochRecord {
    int64_t epoch = 0;
    double loss = 0, lr = 0, val_dsc = 0, val_miou = 0;
};

struct TrainResult {
    std::vector<EpochRecord> log;
    std::string log_path;
    std::string best_checkpoint;
    std::string final_checkpoint;
    double best_val_dsc = 0;
};

/// Full training loop: seeded shuffling and augmentation, cosine LR per
/// epoch, per-epoch validation (DSC/mIoU), best-by-val-DSC checkpointing,
/// and an append-only `epoch<TAB>loss<TAB>lr<TAB>val_dsc<TAB>val_miou`
/// log. Deterministic per seed.
TrainResult train(const TrainConfig& cfg);

struct EvalConfig {
    std::string checkpoint;
    std::string data_dir;
    std::string split = "test";
    double spacing_h = 1.0, spacing_w = 1.0;
    std::string export_masks_dir; // empty = no export
    std::string report_prefix;    // empty = no report files; else writes .tsv/.json
};

MetricsReport evaluate(const EvalConfig& cfg);

/// One ablation row: a branch/norm configuration trained over several
/// seeds and scored on the test split.
struct AblateRow {
    std::string name;
    std::array<bool, 4> branches{};
    NormKind norm = NormKind::Group;
    std::vector<double> miou_per_seed, dsc_per_seed;
    double median_miou = 0, median_dsc = 0;
};

struct AblateConfig {
    std::string data_dir;
    NetworkConfig net;       // branch/norm fields are overridden per row
    std::string optimizer = "adamw";
    double lr = 1e-3;
    double lr_min = 1e-6;
    double weight_decay = 1e-2;
    int64_t epochs = 40;
    int64_t batch_size = 8;
    bool augment = true;
    std::array<uint64_t, 3> seeds{1, 2, 3};
    std::string out_dir = "ablation";
};

/// Runs the six branch/norm configurations (DW-only with BatchNorm,
/// DW-only, DW+HW, DW+HW+CW, HW+CW+CH, all four) across the seeds and
/// reports median test mIoU/DSC per configuration.
std::vector<AblateRow> ablate(const AblateConfig& cfg);

std::string ablation_table(const std::vector<AblateRow>& rows);

} // namespace mew
