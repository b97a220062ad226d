#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mew/params.hpp"

namespace mew {

/// lr_min + (lr_max - lr_min) * (1 + cos(pi * t / T)) / 2 for 0 <= t <= T.
double cosine_lr(int64_t t, int64_t total, double lr_max, double lr_min);

class Optimizer {
public:
    virtual ~Optimizer() = default;
    /// Applies one update from the accumulated gradients; does not clear them.
    virtual void step(ParamStore& params, double lr) = 0;
    virtual std::string kind() const = 0;
    virtual int64_t step_count() const = 0;

    /// State round-trip for checkpoints.
    virtual std::vector<std::pair<std::string, Tensor>> slots() const = 0;
    virtual void load_slots(const std::vector<std::pair<std::string, Tensor>>& slots,
                            int64_t step_count) = 0;
};

/// Decoupled weight decay (w -= lr*wd*w) applied before the bias-corrected
/// Adam moment update.
std::unique_ptr<Optimizer> make_adamw(double beta1 = 0.9, double beta2 = 0.999,
                                      double eps = 1e-8, double weight_decay = 1e-2);

/// Classical momentum; weight decay is added to the gradient.
std::unique_ptr<Optimizer> make_sgd(double momentum = 0.9, double weight_decay = 1e-4);

} // namespace mew
