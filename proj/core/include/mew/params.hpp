#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mew/rng.hpp"
#include "mew/tensor.hpp"

namespace mew {

/// Ordered registry of named tensors. Trainable entries are parameters
/// (requires_grad, visited by the optimizer); non-trainable entries are
/// buffers (e.g. batch-norm running statistics) that still persist in
/// checkpoints. Registration order is deterministic, which keeps the
/// optimizer sweep and the checkpoint layout reproducible.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor tensor;
        bool trainable = true;
    };

    Tensor add(const std::string& name, Tensor t, bool trainable = true);

    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& entries() { return entries_; }

    Tensor* find(std::string_view name);

    /// Total learnable scalar count (buffers excluded).
    int64_t parameter_count() const;

    void zero_grads();

private:
    std::vector<Entry> entries_;
};

/// Kernel init per the engine convention: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)).
Tensor init_uniform_fanin(const Shape& shape, int64_t fan_in, Rng& rng);

} // namespace mew
