#include "mew/autodiff.hpp"

#include <stdexcept>

namespace mew {

namespace {
thread_local Tape* g_active = nullptr;
}

Tape* Tape::active() { return g_active; }

Tape::Scope::Scope(Tape& t) : prev_(g_active) { g_active = &t; }
Tape::Scope::~Scope() { g_active = prev_; }

void Tape::backward(Tensor loss) {
    if (loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    loss.shape().str());
    loss.grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

bool tracing(std::initializer_list<const Tensor*> inputs) {
    if (!g_active) return false;
    for (const Tensor* t : inputs)
        if (t && t->defined() && t->requires_grad()) return true;
    return false;
}

} // namespace mew
