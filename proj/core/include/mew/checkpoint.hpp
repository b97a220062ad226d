#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mew/tensor.hpp"
#include "mew/unet.hpp"

namespace mew {

/// Optimizer/loop state carried alongside network parameters so training
/// can resume exactly. Slot tensors are optimizer moments keyed like
/// "adamw.m:<param-name>".
struct TrainerState {
    int64_t epoch = 0;
    int64_t step = 0;
    double best_val_dsc = 0.0;
    std::string optimizer_kind; // "adamw" | "sgd"
    std::vector<std::pair<std::string, Tensor>> slots;
    std::string rng_state;
};

/// Single-file binary checkpoint: versioned header, serialized
/// NetworkConfig, then one (name, shape, raw little-endian float64)
/// record per parameter/buffer, plus an optional trainer-state section.
/// save(load(save(x))) is byte-identical.
void save_checkpoint(const std::string& path, const Network& net,
                     const TrainerState* trainer = nullptr);

Network load_checkpoint(const std::string& path,
                        std::optional<TrainerState>* trainer = nullptr);

} // namespace mew
