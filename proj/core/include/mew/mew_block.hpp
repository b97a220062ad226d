#pragma once

#include <array>
#include <optional>
#include <string>

#include "mew/ops.hpp"
#include "mew/params.hpp"
#include "mew/spectral.hpp"
#include "mew/tensor.hpp"

namespace mew {

enum class NormKind { Group, Batch };

struct MewConfig {
    int64_t channels = 32;
    int64_t height = 16;
    int64_t width = 16;
    /// HW, CW, CH spectral branches and the DW branch, in that order.
    /// A disabled branch routes its channel slice through identity, so
    /// shapes stay fixed across ablations.
    std::array<bool, 4> branch_enabled{true, true, true, true};
    NormKind norm_kind = NormKind::Group;
    int64_t base_weight_extent = 16;
    double ffn_expansion = 4.0;
};

struct PointwiseConv {
    Tensor kernel; // (C_out, C_in)
    Tensor bias;   // (C_out)
    static PointwiseConv make(ParamStore& ps, const std::string& prefix, int64_t c_in,
                              int64_t c_out, Rng& rng);
    Tensor forward(const Tensor& x) const { return conv_pointwise(x, kernel, bias); }
};

struct DepthwiseConv {
    Tensor kernel; // (C, kh, kw)
    int stride = 1;
    int pad_h = 1, pad_w = 1;
    static DepthwiseConv make(ParamStore& ps, const std::string& prefix, int64_t channels,
                              int kh, int kw, int stride, Rng& rng);
    Tensor forward(const Tensor& x) const {
        return conv_depthwise(x, kernel, stride, stride, pad_h, pad_w);
    }
};

/// Depthwise 3x3 followed by pointwise channel mixing.
struct SeparableConv {
    DepthwiseConv dw;
    PointwiseConv pw;
    static SeparableConv make(ParamStore& ps, const std::string& prefix, int64_t c_in,
                              int64_t c_out, int stride, Rng& rng);
    Tensor forward(const Tensor& x) const { return pw.forward(dw.forward(x)); }
};

/// Expand (x4) -> ReLU6 -> depthwise -> ReLU6 -> project -> + input.
/// The depthwise kernel is (3,3) for the 2D variant and (1,3)/(3,1) for
/// the 1D variants used on frequency-axis weights.
struct InvertedResidual {
    PointwiseConv expand;
    DepthwiseConv dw;
    PointwiseConv project;
    static InvertedResidual make(ParamStore& ps, const std::string& prefix, int64_t channels,
                                 int expansion, int kh, int kw, Rng& rng);
    Tensor forward(const Tensor& x) const;
};

/// Produces the spectral modulation weight of one branch: a small
/// learnable base tensor, bilinearly resized to the branch's half-spectrum
/// extents, then refined by three inverted residual blocks (2D blocks for
/// the HW pair, 1D blocks along the reduced frequency axis for CW/CH).
struct WeightGenerator {
    AxisPair axes;
    Tensor base; // (1, Cq, bh, bw)
    std::array<InvertedResidual, 3> blocks;
    static WeightGenerator make(ParamStore& ps, const std::string& prefix, AxisPair axes,
                                int64_t quarter_channels, int64_t nominal_t1, int64_t nominal_t2,
                                int64_t base_extent, Rng& rng);
    /// Realize the weight at the given half-spectrum extents (last two axes).
    Tensor realize(int64_t t1, int64_t t2) const;
};

struct NormLayer {
    NormKind kind = NormKind::Group;
    int groups = 4;
    double eps = 1e-5;
    double momentum = 0.1;
    Tensor gamma, beta;
    Tensor running_mean, running_var; // batch mode buffers
    static NormLayer make(ParamStore& ps, const std::string& prefix, NormKind kind,
                          int64_t channels);
    Tensor forward(const Tensor& x, bool training) const;
};

struct Ffn {
    PointwiseConv up, down;
    static Ffn make(ParamStore& ps, const std::string& prefix, int64_t channels,
                    double expansion, Rng& rng);
    Tensor forward(const Tensor& x) const { return down.forward(gelu(up.forward(x))); }
};

/// The four-branch mixer: split across channels, modulate three slices in
/// the frequency domain over the HW/CW/CH axis pairs, run the fourth
/// through a 3x3 depthwise conv, concatenate, add the input back.
struct MewLayer {
    MewConfig cfg;
    std::array<std::optional<WeightGenerator>, 3> gen; // HW, CW, CH
    std::optional<DepthwiseConv> dw;
    static MewLayer make(ParamStore& ps, const std::string& prefix, const MewConfig& cfg,
                         Rng& rng);
    Tensor forward(const Tensor& x) const;
};

/// Transformer-style block with the mixer in place of attention:
///   X' = MEW(Norm(X)) + X;  Y = FFN(Norm(X')) + X'.
struct MewBlock {
    NormLayer norm1, norm2;
    MewLayer mew;
    Ffn ffn;
    static MewBlock make(ParamStore& ps, const std::string& prefix, const MewConfig& cfg,
                         Rng& rng);
    Tensor forward(const Tensor& x, bool training) const;
};

} // namespace mew
