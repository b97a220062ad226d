#pragma once

#include <complex>
#include <utility>
#include <vector>

#include "mew/tensor.hpp"

namespace mew {

/// Which two of (channel, height, width) a 2D transform acts on. The
/// second axis of the pair is the Hermitian-reduced one.
enum class AxisPair { HW, CW, CH };

const char* axis_pair_name(AxisPair axes);

/// (first, second) axis indices within a (B,C,H,W) tensor.
std::pair<int, int> axis_indices(AxisPair axes);

/// Shape of the reduced spectrum: second transformed axis -> floor(J/2)+1.
Shape half_spectrum_shape(const Shape& source, AxisPair axes);

/// Frequency representation of a real rank-4 tensor over one axis pair,
/// with the second transformed axis reduced to floor(J/2)+1 bins. The
/// discarded bins are the conjugate mirror of the kept ones, so any real
/// modulation of this representation inverts to a real tensor.
struct HalfSpectrum {
    AxisPair axes;
    Shape source_shape; // rank-4 extents of the real source
    Shape shape;        // reduced extents
    std::vector<std::complex<double>> data; // row-major over `shape`
};

/// Real-input 2D DFT over the designated axis pair, applied for every
/// index of the untouched axes. Unnormalized forward convention.
HalfSpectrum rdft2_axes(const Tensor& x, AxisPair axes);

/// Inverse transform with 1/(I*J) normalization. `extent_i`/`extent_j`
/// are the original extents of the transformed axes (the parity of J is
/// not recoverable from the reduced extent). For spectra that no longer
/// satisfy exact Hermitian symmetry (e.g. after modulation) this returns
/// the real part of the full inverse.
Tensor irdft2_axes(const HalfSpectrum& s, AxisPair axes, int64_t extent_i, int64_t extent_j);

/// irdft2_axes(w (*) rdft2_axes(x)) with a real weight, one scalar per
/// retained bin. w has shape (1, ...) = half-spectrum shape with a unit
/// batch axis, broadcast over batch. Differentiable in x and w; the
/// backward applies the adjoint transforms.
Tensor spectral_modulate(const Tensor& x, const Tensor& w, AxisPair axes);

/// Full-spectrum reference path built only on the naive O(N^2) DFT.
/// This is the oracle the fast half-spectrum path is tested against.
namespace spectral_naive {

/// Full (unreduced) 2D DFT over the axis pair; row-major over x.shape().
std::vector<std::complex<double>> dft2_full(const Tensor& x, AxisPair axes);

/// Naive modulation: full forward DFT, elementwise product with the half
/// weight mirrored Hermitianly onto the full grid, naive inverse, real part.
Tensor modulate(const Tensor& x, const Tensor& w, AxisPair axes);

} // namespace spectral_naive

} // namespace mew
