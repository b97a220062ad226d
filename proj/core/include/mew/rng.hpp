#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace mew {

/// Seedable RNG with fully specified output mapping, so identical seeds
/// give bitwise-identical streams on every platform. Distribution code is
/// written out here instead of using std:: distributions, whose results
/// are implementation-defined.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n), n > 0. Plain modulo: n is tiny relative
    /// to 2^64, bias is below 2^-50.
    uint64_t below(uint64_t n) { return eng_() % n; }

    bool coin() { return (eng_() & 1u) != 0; }

    /// Derives an independent deterministic stream for a sub-purpose.
    /// Does not consume from this stream; distinct tags give distinct streams.
    Rng fork(uint64_t tag) const { return Rng(splitmix(seed_ ^ splitmix(tag))); }

    uint64_t seed() const { return seed_; }

    std::string serialize() const;
    static Rng deserialize(const std::string& s);

    static uint64_t splitmix(uint64_t x);

private:
    uint64_t seed_;
    std::mt19937_64 eng_;
};

} // namespace mew
