#pragma once

#include <complex>
#include <span>
#include <vector>

namespace mew::fft {

using cplx = std::complex<double>;

/// In-place unnormalized forward DFT: X[k] = sum_n x[n] exp(-2*pi*i*k*n/N).
/// Radix-2 for power-of-two lengths, Bluestein's chirp-z otherwise.
void fft(std::span<cplx> data);

/// In-place inverse with 1/N normalization.
void ifft(std::span<cplx> data);

/// O(N^2) reference evaluation of the same sum. Kept deliberately separate
/// from the fast path; the test suites treat it as the oracle.
std::vector<cplx> dft_naive(std::span<const cplx> x);
std::vector<cplx> idft_naive(std::span<const cplx> x);

} // namespace mew::fft
