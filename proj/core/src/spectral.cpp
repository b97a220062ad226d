#include "mew/spectral.hpp"

#include <array>
#include <memory>
#include <stdexcept>

#include "mew/autodiff.hpp"
#include "mew/fft.hpp"

namespace mew {

using fft::cplx;

namespace {

std::array<int64_t, 4> strides_of(const Shape& s) {
    std::array<int64_t, 4> st{};
    st[3] = 1;
    for (int i = 2; i >= 0; --i) st[static_cast<size_t>(i)] = st[static_cast<size_t>(i + 1)] * s[i + 1];
    return st;
}

void require_rank4(const Tensor& x, const char* op) {
    if (x.shape().rank() != 4)
        throw std::invalid_argument(std::string(op) + ": expected rank-4 input, got " +
                                    x.shape().str());
}

// Calls fn(offset_base) for every combination of the three non-transform
// axes; offsets are computed with the strides of `s` and the line along
// `axis` starts at the returned base with stride st[axis].
template <class F>
void for_each_line(const Shape& s, int axis, F&& fn) {
    const auto st = strides_of(s);
    std::array<int, 3> other{};
    int n = 0;
    for (int a = 0; a < 4; ++a)
        if (a != axis) other[static_cast<size_t>(n++)] = a;
    for (int64_t i0 = 0; i0 < s[other[0]]; ++i0)
        for (int64_t i1 = 0; i1 < s[other[1]]; ++i1)
            for (int64_t i2 = 0; i2 < s[other[2]]; ++i2)
                fn(i0 * st[static_cast<size_t>(other[0])] +
                   i1 * st[static_cast<size_t>(other[1])] +
                   i2 * st[static_cast<size_t>(other[2])]);
}

// In-place FFT/IFFT along one axis of a complex rank-4 array.
void transform_axis(std::vector<cplx>& v, const Shape& s, int axis, bool inverse) {
    const auto st = strides_of(s);
    const int64_t n = s[axis];
    const int64_t stride = st[static_cast<size_t>(axis)];
    std::vector<cplx> line(static_cast<size_t>(n));
    for_each_line(s, axis, [&](int64_t base) {
        for (int64_t t = 0; t < n; ++t) line[static_cast<size_t>(t)] = v[static_cast<size_t>(base + t * stride)];
        if (inverse)
            fft::ifft(line);
        else
            fft::fft(line);
        for (int64_t t = 0; t < n; ++t) v[static_cast<size_t>(base + t * stride)] = line[static_cast<size_t>(t)];
    });
}

Shape with_axis_extent(const Shape& s, int axis, int64_t extent) {
    std::array<int64_t, 4> d{s[0], s[1], s[2], s[3]};
    d[static_cast<size_t>(axis)] = extent;
    return Shape{d[0], d[1], d[2], d[3]};
}

// Forward half transform of a real array: FFT along the second (reduced)
// axis keeping floor(J/2)+1 bins, then full FFT along the first axis.
std::vector<cplx> half_forward(std::span<const double> xv, const Shape& src, AxisPair axes) {
    const auto [ai, aj] = axis_indices(axes);
    const int64_t J = src[aj];
    const int64_t Jr = J / 2 + 1;
    const Shape red = with_axis_extent(src, aj, Jr);

    std::vector<cplx> out(static_cast<size_t>(red.numel()));
    const auto src_st = strides_of(src);
    const auto red_st = strides_of(red);
    {
        // The non-aj coordinates coincide, but the line bases differ because
        // the two arrays have different extents along aj. Recover the
        // multi-index from the reduced base and rebuild the source base.
        std::vector<cplx> line(static_cast<size_t>(J));
        std::array<int, 3> other{};
        int n = 0;
        for (int a = 0; a < 4; ++a)
            if (a != aj) other[static_cast<size_t>(n++)] = a;
        for (int64_t i0 = 0; i0 < src[other[0]]; ++i0)
            for (int64_t i1 = 0; i1 < src[other[1]]; ++i1)
                for (int64_t i2 = 0; i2 < src[other[2]]; ++i2) {
                    const int64_t sb = i0 * src_st[static_cast<size_t>(other[0])] +
                                       i1 * src_st[static_cast<size_t>(other[1])] +
                                       i2 * src_st[static_cast<size_t>(other[2])];
                    const int64_t rb = i0 * red_st[static_cast<size_t>(other[0])] +
                                       i1 * red_st[static_cast<size_t>(other[1])] +
                                       i2 * red_st[static_cast<size_t>(other[2])];
                    for (int64_t t = 0; t < J; ++t)
                        line[static_cast<size_t>(t)] = cplx{xv[static_cast<size_t>(sb + t * src_st[static_cast<size_t>(aj)])], 0.0};
                    fft::fft(line);
                    for (int64_t t = 0; t < Jr; ++t)
                        out[static_cast<size_t>(rb + t * red_st[static_cast<size_t>(aj)])] = line[static_cast<size_t>(t)];
                }
    }
    transform_axis(out, red, ai, /*inverse=*/false);
    return out;
}

// Inverse of the half transform: IFFT along the first axis, then mirror
// the reduced axis with conjugation and IFFT along it, keeping the real
// part. Exact inverse for untouched spectra; orthogonal projection onto
// real tensors otherwise.
std::vector<double> half_inverse(std::vector<cplx> spec, const Shape& red, const Shape& dst,
                                 AxisPair axes) {
    const auto [ai, aj] = axis_indices(axes);
    transform_axis(spec, red, ai, /*inverse=*/true);

    const int64_t J = dst[aj];
    const int64_t Jr = red[aj];
    std::vector<double> out(static_cast<size_t>(dst.numel()));
    const auto red_st = strides_of(red);
    const auto dst_st = strides_of(dst);
    std::vector<cplx> line(static_cast<size_t>(J));
    std::array<int, 3> other{};
    int n = 0;
    for (int a = 0; a < 4; ++a)
        if (a != aj) other[static_cast<size_t>(n++)] = a;
    for (int64_t i0 = 0; i0 < dst[other[0]]; ++i0)
        for (int64_t i1 = 0; i1 < dst[other[1]]; ++i1)
            for (int64_t i2 = 0; i2 < dst[other[2]]; ++i2) {
                const int64_t rb = i0 * red_st[static_cast<size_t>(other[0])] +
                                   i1 * red_st[static_cast<size_t>(other[1])] +
                                   i2 * red_st[static_cast<size_t>(other[2])];
                const int64_t db = i0 * dst_st[static_cast<size_t>(other[0])] +
                                   i1 * dst_st[static_cast<size_t>(other[1])] +
                                   i2 * dst_st[static_cast<size_t>(other[2])];
                for (int64_t j = 0; j < Jr; ++j)
                    line[static_cast<size_t>(j)] = spec[static_cast<size_t>(rb + j * red_st[static_cast<size_t>(aj)])];
                for (int64_t j = Jr; j < J; ++j)
                    line[static_cast<size_t>(j)] =
                        std::conj(spec[static_cast<size_t>(rb + (J - j) * red_st[static_cast<size_t>(aj)])]);
                fft::ifft(line);
                for (int64_t t = 0; t < J; ++t)
                    out[static_cast<size_t>(db + t * dst_st[static_cast<size_t>(aj)])] = line[static_cast<size_t>(t)].real();
            }
    return out;
}

} // namespace

const char* axis_pair_name(AxisPair axes) {
    switch (axes) {
    case AxisPair::HW: return "HW";
    case AxisPair::CW: return "CW";
    case AxisPair::CH: return "CH";
    }
    return "?";
}

std::pair<int, int> axis_indices(AxisPair axes) {
    switch (axes) {
    case AxisPair::HW: return {2, 3};
    case AxisPair::CW: return {1, 3};
    case AxisPair::CH: return {1, 2};
    }
    throw std::logic_error("axis_indices: bad AxisPair");
}

Shape half_spectrum_shape(const Shape& source, AxisPair axes) {
    if (source.rank() != 4)
        throw std::invalid_argument("half_spectrum_shape: expected rank-4, got " + source.str());
    const auto [ai, aj] = axis_indices(axes);
    (void)ai;
    return with_axis_extent(source, aj, source[aj] / 2 + 1);
}

HalfSpectrum rdft2_axes(const Tensor& x, AxisPair axes) {
    require_rank4(x, "rdft2_axes");
    HalfSpectrum s;
    s.axes = axes;
    s.source_shape = x.shape();
    s.shape = half_spectrum_shape(x.shape(), axes);
    s.data = half_forward(x.values(), x.shape(), axes);
    return s;
}

Tensor irdft2_axes(const HalfSpectrum& s, AxisPair axes, int64_t extent_i, int64_t extent_j) {
    if (s.axes != axes)
        throw std::invalid_argument(std::string("irdft2_axes: spectrum was built for axes ") +
                                    axis_pair_name(s.axes) + ", asked to invert over " +
                                    axis_pair_name(axes));
    const auto [ai, aj] = axis_indices(axes);
    if (s.source_shape[ai] != extent_i || s.source_shape[aj] != extent_j)
        throw std::invalid_argument(
            "irdft2_axes: extents (" + std::to_string(extent_i) + "," + std::to_string(extent_j) +
            ") do not match spectrum source " + s.source_shape.str());
    if (extent_j / 2 + 1 != s.shape[aj])
        throw std::invalid_argument("irdft2_axes: reduced extent " + std::to_string(s.shape[aj]) +
                                    " inconsistent with J=" + std::to_string(extent_j));

    Tensor out = Tensor::zeros(s.source_shape);
    auto vals = half_inverse(s.data, s.shape, s.source_shape, axes);
    // Apply the 1/(I*J) inverse normalization: half_inverse's ifft calls
    // already divide by I and J.
    std::copy(vals.begin(), vals.end(), out.values().begin());
    return out;
}

Tensor spectral_modulate(const Tensor& x, const Tensor& w, AxisPair axes) {
    require_rank4(x, "spectral_modulate");
    const Shape red = half_spectrum_shape(x.shape(), axes);
    const Shape expect_w{1, red[1], red[2], red[3]};
    if (!(w.shape() == expect_w))
        throw std::invalid_argument(std::string("spectral_modulate: weight shape ") +
                                    w.shape().str() + " does not match half-spectrum shape " +
                                    expect_w.str() + " for axes " + axis_pair_name(axes));

    const int64_t B = x.shape()[0];
    const int64_t per_batch = red.numel() / B;

    // Forward: S = F(x); T = w (*) S; y = F^-1(T), real part.
    auto S = std::make_shared<std::vector<cplx>>(half_forward(x.values(), x.shape(), axes));
    std::vector<cplx> T = *S;
    {
        auto wv = w.values();
        for (int64_t b = 0; b < B; ++b) {
            cplx* tp = T.data() + b * per_batch;
            for (int64_t i = 0; i < per_batch; ++i) tp[i] *= wv[static_cast<size_t>(i)];
        }
    }
    Tensor out = Tensor::zeros(x.shape());
    {
        auto vals = half_inverse(std::move(T), red, x.shape(), axes);
        std::copy(vals.begin(), vals.end(), out.values().begin());
    }

    if (tracing({&x, &w})) {
        out.set_requires_grad(true);
        Tape::active()->record([x = x, w = w, out, S, red, axes, B, per_batch]() mutable {
            const auto [ai, aj] = axis_indices(axes);
            const Shape& src = x.shape();
            const int64_t I = src[ai];
            const int64_t J = src[aj];

            // Adjoint of (real part of) the half inverse: embed the output
            // gradient, apply (1/J) FFT along aj, fold the mirrored bins
            // back with conjugation, then (1/I) FFT along ai.
            std::vector<cplx> zbar(static_cast<size_t>(src.numel()));
            {
                auto g = out.grad();
                for (size_t i = 0; i < zbar.size(); ++i) zbar[i] = cplx{g[i], 0.0};
            }
            transform_axis(zbar, src, aj, /*inverse=*/false);
            const double inv_j = 1.0 / static_cast<double>(J);

            std::vector<cplx> tbar(static_cast<size_t>(red.numel()), cplx{0.0, 0.0});
            {
                const auto src_st = strides_of(src);
                const auto red_st = strides_of(red);
                const int64_t Jr = red[aj];
                std::array<int, 3> other{};
                int n = 0;
                for (int a = 0; a < 4; ++a)
                    if (a != aj) other[static_cast<size_t>(n++)] = a;
                for (int64_t i0 = 0; i0 < src[other[0]]; ++i0)
                    for (int64_t i1 = 0; i1 < src[other[1]]; ++i1)
                        for (int64_t i2 = 0; i2 < src[other[2]]; ++i2) {
                            const int64_t sb = i0 * src_st[static_cast<size_t>(other[0])] +
                                               i1 * src_st[static_cast<size_t>(other[1])] +
                                               i2 * src_st[static_cast<size_t>(other[2])];
                            const int64_t rb = i0 * red_st[static_cast<size_t>(other[0])] +
                                               i1 * red_st[static_cast<size_t>(other[1])] +
                                               i2 * red_st[static_cast<size_t>(other[2])];
                            for (int64_t j = 0; j < Jr; ++j)
                                tbar[static_cast<size_t>(rb + j * red_st[static_cast<size_t>(aj)])] =
                                    zbar[static_cast<size_t>(sb + j * src_st[static_cast<size_t>(aj)])] * inv_j;
                            for (int64_t j = Jr; j < J; ++j)
                                tbar[static_cast<size_t>(rb + (J - j) * red_st[static_cast<size_t>(aj)])] +=
                                    std::conj(zbar[static_cast<size_t>(sb + j * src_st[static_cast<size_t>(aj)])]) * inv_j;
                        }
            }
            transform_axis(tbar, red, ai, /*inverse=*/false);
            const double inv_i = 1.0 / static_cast<double>(I);
            for (auto& v : tbar) v *= inv_i;

            if (w.requires_grad()) {
                auto gw = w.grad();
                for (int64_t b = 0; b < B; ++b) {
                    const cplx* sp = S->data() + b * per_batch;
                    const cplx* tp = tbar.data() + b * per_batch;
                    for (int64_t i = 0; i < per_batch; ++i)
                        gw[static_cast<size_t>(i)] += (std::conj(sp[i]) * tp[i]).real();
                }
            }
            if (x.requires_grad()) {
                // S_bar = w (*) T_bar, then the adjoints of the forward
                // transforms: I * IFFT along ai, zero-extend along aj,
                // J * IFFT along aj, real part.
                std::vector<cplx> sbar = std::move(tbar);
                {
                    auto wv = w.values();
                    for (int64_t b = 0; b < B; ++b) {
                        cplx* sp = sbar.data() + b * per_batch;
                        for (int64_t i = 0; i < per_batch; ++i) sp[i] *= wv[static_cast<size_t>(i)];
                    }
                }
                transform_axis(sbar, red, ai, /*inverse=*/true);
                for (auto& v : sbar) v *= static_cast<double>(I);

                std::vector<cplx> abar(static_cast<size_t>(src.numel()), cplx{0.0, 0.0});
                {
                    const auto src_st = strides_of(src);
                    const auto red_st = strides_of(red);
                    const int64_t Jr = red[aj];
                    std::array<int, 3> other{};
                    int n = 0;
                    for (int a = 0; a < 4; ++a)
                        if (a != aj) other[static_cast<size_t>(n++)] = a;
                    for (int64_t i0 = 0; i0 < src[other[0]]; ++i0)
                        for (int64_t i1 = 0; i1 < src[other[1]]; ++i1)
                            for (int64_t i2 = 0; i2 < src[other[2]]; ++i2) {
                                const int64_t sb = i0 * src_st[static_cast<size_t>(other[0])] +
                                                   i1 * src_st[static_cast<size_t>(other[1])] +
                                                   i2 * src_st[static_cast<size_t>(other[2])];
                                const int64_t rb = i0 * red_st[static_cast<size_t>(other[0])] +
                                                   i1 * red_st[static_cast<size_t>(other[1])] +
                                                   i2 * red_st[static_cast<size_t>(other[2])];
                                for (int64_t j = 0; j < Jr; ++j)
                                    abar[static_cast<size_t>(sb + j * src_st[static_cast<size_t>(aj)])] =
                                        sbar[static_cast<size_t>(rb + j * red_st[static_cast<size_t>(aj)])];
                            }
                }
                transform_axis(abar, src, aj, /*inverse=*/true);
                auto gx = x.grad();
                const double scale_j = static_cast<double>(J);
                for (size_t i = 0; i < gx.size(); ++i) gx[i] += scale_j * abar[i].real();
            }
        });
    }
    return out;
}

namespace spectral_naive {

namespace {

// Naive 1D DFT along one axis of a complex rank-4 array, forward or inverse.
void naive_axis(std::vector<cplx>& v, const Shape& s, int axis, bool inverse) {
    const auto st = strides_of(s);
    const int64_t n = s[axis];
    const int64_t stride = st[static_cast<size_t>(axis)];
    std::vector<cplx> line(static_cast<size_t>(n));
    for_each_line(s, axis, [&](int64_t base) {
        for (int64_t t = 0; t < n; ++t) line[static_cast<size_t>(t)] = v[static_cast<size_t>(base + t * stride)];
        const auto res = inverse ? fft::idft_naive(line) : fft::dft_naive(line);
        for (int64_t t = 0; t < n; ++t) v[static_cast<size_t>(base + t * stride)] = res[static_cast<size_t>(t)];
    });
}

} // namespace

std::vector<cplx> dft2_full(const Tensor& x, AxisPair axes) {
    if (x.shape().rank() != 4)
        throw std::invalid_argument("dft2_full: expected rank-4 input");
    const auto [ai, aj] = axis_indices(axes);
    std::vector<cplx> v(static_cast<size_t>(x.numel()));
    auto xv = x.values();
    for (size_t i = 0; i < v.size(); ++i) v[i] = cplx{xv[i], 0.0};
    naive_axis(v, x.shape(), aj, false);
    naive_axis(v, x.shape(), ai, false);
    return v;
}

Tensor modulate(const Tensor& x, const Tensor& w, AxisPair axes) {
    const auto [ai, aj] = axis_indices(axes);
    const Shape& src = x.shape();
    const Shape red = half_spectrum_shape(src, axes);
    const int64_t I = src[ai];
    const int64_t J = src[aj];
    const int64_t Jr = red[aj];

    std::vector<cplx> F = dft2_full(x, axes);

    // Multiply by the half weight mirrored Hermitianly onto the full grid:
    // bins with j > J/2 use the weight of their conjugate partner
    // ((I-i) mod I, J-j).
    const auto st = strides_of(src);
    const auto wst = strides_of(w.shape());
    auto wv = w.values();
    for (int64_t b = 0; b < src[0]; ++b)
        for (int64_t c = 0; c < src[1]; ++c)
            for (int64_t h = 0; h < src[2]; ++h)
                for (int64_t ww = 0; ww < src[3]; ++ww) {
                    std::array<int64_t, 4> idx{b, c, h, ww};
                    std::array<int64_t, 4> widx{0, c, h, ww};
                    const int64_t j = idx[static_cast<size_t>(aj)];
                    if (j >= Jr) {
                        widx[static_cast<size_t>(aj)] = J - j;
                        const int64_t i = idx[static_cast<size_t>(ai)];
                        widx[static_cast<size_t>(ai)] = (I - i) % I;
                    } else {
                        widx[static_cast<size_t>(ai)] = idx[static_cast<size_t>(ai)];
                    }
                    const int64_t foff = b * st[0] + c * st[1] + h * st[2] + ww * st[3];
                    const int64_t woff = widx[1] * wst[1] + widx[2] * wst[2] + widx[3] * wst[3];
                    F[static_cast<size_t>(foff)] *= wv[static_cast<size_t>(woff)];
                }

    naive_axis(F, src, ai, true);
    naive_axis(F, src, aj, true);
    Tensor out = Tensor::zeros(src);
    auto ov = out.values();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = F[i].real();
    return out;
}

} // namespace spectral_naive

} // namespace mew
