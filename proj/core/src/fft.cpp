#include "mew/fft.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <unordered_map>

namespace mew::fft {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Twiddle table for a power-of-two length: w[k] = exp(-2*pi*i*k/n), k < n/2.
const std::vector<cplx>& twiddles(size_t n) {
    thread_local std::unordered_map<size_t, std::vector<cplx>> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<cplx> w(n / 2);
    for (size_t k = 0; k < n / 2; ++k) {
        const double a = -kTwoPi * static_cast<double>(k) / static_cast<double>(n);
        w[k] = {std::cos(a), std::sin(a)};
    }
    return cache.emplace(n, std::move(w)).first->second;
}

void fft_pow2(std::span<cplx> a) {
    const size_t n = a.size();
    // Bit-reversal permutation.
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const auto& w = twiddles(n);
    for (size_t len = 2; len <= n; len <<= 1) {
        const size_t step = n / len;
        for (size_t i = 0; i < n; i += len) {
            for (size_t k = 0; k < len / 2; ++k) {
                const cplx t = a[i + k + len / 2] * w[k * step];
                a[i + k + len / 2] = a[i + k] - t;
                a[i + k] = a[i + k] + t;
            }
        }
    }
}

// Bluestein's algorithm: expresses an arbitrary-length DFT as a circular
// convolution of chirp-premultiplied sequences, evaluated with a
// power-of-two FFT of length >= 2N-1.
void fft_bluestein(std::span<cplx> x) {
    const size_t n = x.size();
    const size_t m = next_pow2(2 * n - 1);

    // Chirp c[k] = exp(-i*pi*k^2/n); k^2 taken mod 2n to keep the angle small.
    std::vector<cplx> chirp(n);
    for (size_t k = 0; k < n; ++k) {
        const uint64_t k2 = (static_cast<uint64_t>(k) * k) % (2 * n);
        const double a = -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
        chirp[k] = {std::cos(a), std::sin(a)};
    }

    std::vector<cplx> a(m, cplx{0.0, 0.0});
    std::vector<cplx> b(m, cplx{0.0, 0.0});
    for (size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
    b[0] = std::conj(chirp[0]);
    for (size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(chirp[k]);

    fft_pow2(a);
    fft_pow2(b);
    for (size_t k = 0; k < m; ++k) a[k] *= b[k];
    // Inverse pow2 FFT via conjugation.
    for (auto& v : a) v = std::conj(v);
    fft_pow2(a);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (size_t k = 0; k < n; ++k) x[k] = std::conj(a[k]) * inv_m * chirp[k];
}

} // namespace

void fft(std::span<cplx> data) {
    const size_t n = data.size();
    if (n <= 1) return;
    if (is_pow2(n))
        fft_pow2(data);
    else
        fft_bluestein(data);
}

void ifft(std::span<cplx> data) {
    for (auto& v : data) v = std::conj(v);
    fft(data);
    const double inv_n = 1.0 / static_cast<double>(data.size());
    for (auto& v : data) v = std::conj(v) * inv_n;
}

std::vector<cplx> dft_naive(std::span<const cplx> x) {
    const size_t n = x.size();
    std::vector<cplx> out(n, cplx{0.0, 0.0});
    for (size_t k = 0; k < n; ++k) {
        cplx acc{0.0, 0.0};
        for (size_t j = 0; j < n; ++j) {
            const double a =
                -kTwoPi * static_cast<double>(k) * static_cast<double>(j) / static_cast<double>(n);
            acc += x[j] * cplx{std::cos(a), std::sin(a)};
        }
        out[k] = acc;
    }
    return out;
}

std::vector<cplx> idft_naive(std::span<const cplx> x) {
    const size_t n = x.size();
    std::vector<cplx> out(n, cplx{0.0, 0.0});
    for (size_t k = 0; k < n; ++k) {
        cplx acc{0.0, 0.0};
        for (size_t j = 0; j < n; ++j) {
            const double a =
                kTwoPi * static_cast<double>(k) * static_cast<double>(j) / static_cast<double>(n);
            acc += x[j] * cplx{std::cos(a), std::sin(a)};
        }
        out[k] = acc / static_cast<double>(n);
    }
    return out;
}

} // namespace mew::fft
