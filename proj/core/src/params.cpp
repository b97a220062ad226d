#include "mew/params.hpp"

#include <cmath>
#include <stdexcept>

namespace mew {

Tensor ParamStore::add(const std::string& name, Tensor t, bool trainable) {
    for (const Entry& e : entries_)
        if (e.name == name)
            throw std::invalid_argument("ParamStore: duplicate name '" + name + "'");
    t.set_requires_grad(trainable);
    entries_.push_back(Entry{name, t, trainable});
    return t;
}

Tensor* ParamStore::find(std::string_view name) {
    for (Entry& e : entries_)
        if (e.name == name) return &e.tensor;
    return nullptr;
}

int64_t ParamStore::parameter_count() const {
    int64_t n = 0;
    for (const Entry& e : entries_)
        if (e.trainable) n += e.tensor.numel();
    return n;
}

void ParamStore::zero_grads() {
    for (Entry& e : entries_)
        if (e.trainable) e.tensor.zero_grad();
}

Tensor init_uniform_fanin(const Shape& shape, int64_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t = Tensor::zeros(shape);
    for (double& v : t.values()) v = rng.uniform(-bound, bound);
    return t;
}

} // namespace mew
