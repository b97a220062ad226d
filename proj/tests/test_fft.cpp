#include <doctest.h>

#include <cmath>
#include <complex>

#include "mew/fft.hpp"
#include "mew/rng.hpp"

using namespace mew;
using fft::cplx;

namespace {

std::vector<cplx> random_cvec(size_t n, Rng& rng) {
    std::vector<cplx> v(n);
    for (auto& z : v) z = cplx{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    return v;
}

double max_cdiff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double m = 0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double cnorm(const std::vector<cplx>& a) {
    double m = 0;
    for (const auto& z : a) m = std::max(m, std::abs(z));
    return std::max(m, 1.0);
}

} // namespace

TEST_CASE("dft_naive: impulse, constant, shifted impulse") {
    const std::vector<cplx> impulse{1, 0, 0, 0};
    auto X = fft::dft_naive(impulse);
    for (const auto& z : X) CHECK(std::abs(z - cplx{1, 0}) < 1e-12);

    const std::vector<cplx> flat{1, 1, 1, 1};
    X = fft::dft_naive(flat);
    CHECK(std::abs(X[0] - cplx{4, 0}) < 1e-12);
    for (size_t k = 1; k < 4; ++k) CHECK(std::abs(X[k]) < 1e-12);

    const std::vector<cplx> shifted{0, 1, 0, 0};
    X = fft::dft_naive(shifted);
    CHECK(std::abs(X[0] - cplx{1, 0}) < 1e-12);
    CHECK(std::abs(X[1] - cplx{0, -1}) < 1e-12);
    CHECK(std::abs(X[2] - cplx{-1, 0}) < 1e-12);
    CHECK(std::abs(X[3] - cplx{0, 1}) < 1e-12);
}

TEST_CASE("fft matches the naive DFT on every length 1..64") {
    Rng rng(42);
    for (size_t n = 1; n <= 64; ++n) {
        for (int rep = 0; rep < 3; ++rep) {
            auto x = random_cvec(n, rng);
            auto want = fft::dft_naive(x);
            auto got = x;
            fft::fft(got);
            CHECK(max_cdiff(got, want) / cnorm(want) < 1e-10);
        }
    }
}

TEST_CASE("ifft(fft(x)) round-trips, including awkward lengths") {
    Rng rng(43);
    for (size_t n : {1u, 2u, 3u, 5u, 7u, 8u, 12u, 14u, 27u, 32u, 45u, 64u}) {
        auto x = random_cvec(n, rng);
        auto y = x;
        fft::fft(y);
        fft::ifft(y);
        CHECK(max_cdiff(x, y) < 1e-10);
    }
}

TEST_CASE("Parseval: sum |x|^2 == (1/N) sum |X|^2") {
    Rng rng(44);
    for (size_t n : {4u, 13u, 32u, 60u}) {
        auto x = random_cvec(n, rng);
        double ex = 0;
        for (const auto& z : x) ex += std::norm(z);
        auto X = x;
        fft::fft(X);
        double eX = 0;
        for (const auto& z : X) eX += std::norm(z);
        CHECK(std::abs(ex - eX / static_cast<double>(n)) < 1e-10 * std::max(1.0, ex));
    }
}
