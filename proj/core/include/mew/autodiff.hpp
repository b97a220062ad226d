#pragma once

#include <functional>
#include <vector>

#include "mew/tensor.hpp"

namespace mew {

/// Define-by-run tape. Ops executed while a Tape is in scope append one
/// node each; execution order is a topological order, so backward() runs
/// the nodes in reverse. Gradients accumulate additively, so a tensor
/// feeding several consumers receives the sum of their contributions.
///
/// One tape is traversed by one thread at a time; the active tape is
/// thread-local, so disjoint graphs on different threads do not interact.
class Tape {
public:
    using BackwardFn = std::function<void()>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(BackwardFn fn) { nodes_.push_back(std::move(fn)); }
    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse.
    /// `loss` must be a single-element tensor.
    void backward(Tensor loss);

    static Tape* active();

    /// RAII installer for the thread-local active tape.
    class Scope {
    public:
        explicit Scope(Tape& t);
        ~Scope();
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Tape* prev_;
    };

private:
    std::vector<BackwardFn> nodes_;
};

/// True when ops should record backward nodes for `inputs`.
bool tracing(std::initializer_list<const Tensor*> inputs);

} // namespace mew
