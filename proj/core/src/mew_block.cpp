#include "mew/mew_block.hpp"

#include <stdexcept>

namespace mew {

PointwiseConv PointwiseConv::make(ParamStore& ps, const std::string& prefix, int64_t c_in,
                                  int64_t c_out, Rng& rng) {
    PointwiseConv pc;
    pc.kernel = ps.add(prefix + ".kernel", init_uniform_fanin(Shape{c_out, c_in}, c_in, rng));
    pc.bias = ps.add(prefix + ".bias", Tensor::zeros(Shape{c_out}));
    return pc;
}

DepthwiseConv DepthwiseConv::make(ParamStore& ps, const std::string& prefix, int64_t channels,
                                  int kh, int kw, int stride, Rng& rng) {
    DepthwiseConv dc;
    dc.kernel = ps.add(prefix + ".kernel",
                       init_uniform_fanin(Shape{channels, kh, kw}, static_cast<int64_t>(kh) * kw, rng));
    dc.stride = stride;
    dc.pad_h = (kh - 1) / 2;
    dc.pad_w = (kw - 1) / 2;
    return dc;
}

SeparableConv SeparableConv::make(ParamStore& ps, const std::string& prefix, int64_t c_in,
                                  int64_t c_out, int stride, Rng& rng) {
    SeparableConv sc;
    sc.dw = DepthwiseConv::make(ps, prefix + ".dw", c_in, 3, 3, stride, rng);
    sc.pw = PointwiseConv::make(ps, prefix + ".pw", c_in, c_out, rng);
    return sc;
}

InvertedResidual InvertedResidual::make(ParamStore& ps, const std::string& prefix,
                                        int64_t channels, int expansion, int kh, int kw,
                                        Rng& rng) {
    InvertedResidual ir;
    const int64_t hidden = channels * expansion;
    ir.expand = PointwiseConv::make(ps, prefix + ".expand", channels, hidden, rng);
    ir.dw = DepthwiseConv::make(ps, prefix + ".dw", hidden, kh, kw, 1, rng);
    ir.project = PointwiseConv::make(ps, prefix + ".project", hidden, channels, rng);
    return ir;
}

Tensor InvertedResidual::forward(const Tensor& x) const {
    Tensor h = relu6(expand.forward(x));
    h = relu6(dw.forward(h));
    return add(x, project.forward(h));
}

WeightGenerator WeightGenerator::make(ParamStore& ps, const std::string& prefix, AxisPair axes,
                                      int64_t quarter_channels, int64_t nominal_t1,
                                      int64_t nominal_t2, int64_t base_extent, Rng& rng) {
    WeightGenerator g;
    g.axes = axes;
    const int64_t bh = std::min(base_extent, nominal_t1);
    const int64_t bw = std::min(base_extent, nominal_t2);
    // Near-unit start: the branch begins close to an identity filter and
    // learns deviations from it.
    Tensor base = Tensor::zeros(Shape{1, quarter_channels, bh, bw});
    for (double& v : base.values()) v = 1.0 + rng.uniform(-0.02, 0.02);
    g.base = ps.add(prefix + ".base", std::move(base));

    int kh = 3, kw = 3;
    if (axes == AxisPair::CW) { kh = 1; kw = 3; } // reduced frequency axis is W
    if (axes == AxisPair::CH) { kh = 3; kw = 1; } // reduced frequency axis is H
    for (int i = 0; i < 3; ++i)
        g.blocks[static_cast<size_t>(i)] = InvertedResidual::make(
            ps, prefix + ".ir" + std::to_string(i), quarter_channels, 4, kh, kw, rng);
    return g;
}

Tensor WeightGenerator::realize(int64_t t1, int64_t t2) const {
    Tensor w = bilinear_interpolate(base, t1, t2);
    for (const auto& b : blocks) w = b.forward(w);
    return w;
}

NormLayer NormLayer::make(ParamStore& ps, const std::string& prefix, NormKind kind,
                          int64_t channels) {
    NormLayer n;
    n.kind = kind;
    n.gamma = ps.add(prefix + ".gamma", Tensor::full(Shape{channels}, 1.0));
    n.beta = ps.add(prefix + ".beta", Tensor::zeros(Shape{channels}));
    if (kind == NormKind::Batch) {
        n.running_mean = ps.add(prefix + ".running_mean", Tensor::zeros(Shape{channels}),
                                /*trainable=*/false);
        n.running_var = ps.add(prefix + ".running_var", Tensor::full(Shape{channels}, 1.0),
                               /*trainable=*/false);
    }
    return n;
}

Tensor NormLayer::forward(const Tensor& x, bool training) const {
    if (kind == NormKind::Group) return group_norm(x, groups, gamma, beta, eps);
    return batch_norm(x, gamma, beta, running_mean, running_var, training, momentum, eps);
}

Ffn Ffn::make(ParamStore& ps, const std::string& prefix, int64_t channels, double expansion,
              Rng& rng) {
    Ffn f;
    const int64_t hidden = static_cast<int64_t>(static_cast<double>(channels) * expansion);
    f.up = PointwiseConv::make(ps, prefix + ".up", channels, hidden, rng);
    f.down = PointwiseConv::make(ps, prefix + ".down", hidden, channels, rng);
    return f;
}

MewLayer MewLayer::make(ParamStore& ps, const std::string& prefix, const MewConfig& cfg,
                        Rng& rng) {
    if (cfg.channels % 4 != 0)
        throw std::invalid_argument("MewLayer: channels " + std::to_string(cfg.channels) +
                                    " not divisible into 4 branches");
    MewLayer m;
    m.cfg = cfg;
    const int64_t cq = cfg.channels / 4;
    const Shape quarter{1, cq, cfg.height, cfg.width};
    static constexpr std::array<AxisPair, 3> kPairs{AxisPair::HW, AxisPair::CW, AxisPair::CH};
    static constexpr std::array<const char*, 3> kNames{"hw", "cw", "ch"};
    for (int i = 0; i < 3; ++i) {
        if (!cfg.branch_enabled[static_cast<size_t>(i)]) continue;
        const Shape red = half_spectrum_shape(quarter, kPairs[static_cast<size_t>(i)]);
        m.gen[static_cast<size_t>(i)] = WeightGenerator::make(
            ps, prefix + ".w_" + kNames[static_cast<size_t>(i)], kPairs[static_cast<size_t>(i)],
            cq, red[2], red[3], cfg.base_weight_extent, rng);
    }
    if (cfg.branch_enabled[3])
        m.dw = DepthwiseConv::make(ps, prefix + ".dw", cq, 3, 3, 1, rng);
    return m;
}

Tensor MewLayer::forward(const Tensor& x) const {
    if (x.shape()[1] != cfg.channels)
        throw std::invalid_argument("MewLayer: input channels " + std::to_string(x.shape()[1]) +
                                    " != configured " + std::to_string(cfg.channels));
    auto parts = split_channels(x, 4);
    static constexpr std::array<AxisPair, 3> kPairs{AxisPair::HW, AxisPair::CW, AxisPair::CH};
    std::vector<Tensor> outs;
    outs.reserve(4);
    for (int i = 0; i < 3; ++i) {
        if (gen[static_cast<size_t>(i)]) {
            const Shape red = half_spectrum_shape(parts[static_cast<size_t>(i)].shape(),
                                                  kPairs[static_cast<size_t>(i)]);
            Tensor w = gen[static_cast<size_t>(i)]->realize(red[2], red[3]);
            outs.push_back(
                spectral_modulate(parts[static_cast<size_t>(i)], w, kPairs[static_cast<size_t>(i)]));
        } else {
            outs.push_back(parts[static_cast<size_t>(i)]);
        }
    }
    outs.push_back(dw ? dw->forward(parts[3]) : parts[3]);
    return add(concat_channels(outs), x);
}

MewBlock MewBlock::make(ParamStore& ps, const std::string& prefix, const MewConfig& cfg,
                        Rng& rng) {
    MewBlock b;
    b.norm1 = NormLayer::make(ps, prefix + ".norm1", cfg.norm_kind, cfg.channels);
    b.norm2 = NormLayer::make(ps, prefix + ".norm2", cfg.norm_kind, cfg.channels);
    b.mew = MewLayer::make(ps, prefix + ".mew", cfg, rng);
    b.ffn = Ffn::make(ps, prefix + ".ffn", cfg.channels, cfg.ffn_expansion, rng);
    return b;
}

Tensor MewBlock::forward(const Tensor& x, bool training) const {
    Tensor a = add(mew.forward(norm1.forward(x, training)), x);
    return add(ffn.forward(norm2.forward(a, training)), a);
}

} // namespace mew
