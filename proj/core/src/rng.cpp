#include "mew/rng.hpp"

#include <sstream>
#include <stdexcept>

namespace mew {

uint64_t Rng::splitmix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string Rng::serialize() const {
    std::ostringstream os;
    os << seed_ << ' ' << eng_;
    return os.str();
}

Rng Rng::deserialize(const std::string& s) {
    std::istringstream is(s);
    uint64_t seed = 0;
    if (!(is >> seed)) throw std::invalid_argument("Rng::deserialize: bad state string");
    Rng r(seed);
    if (!(is >> r.eng_)) throw std::invalid_argument("Rng::deserialize: bad engine state");
    return r;
}

} // namespace mew
