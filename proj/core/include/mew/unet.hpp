#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mew/mew_block.hpp"
#include "mew/params.hpp"
#include "mew/tensor.hpp"

namespace mew {

struct NetworkConfig {
    int64_t in_channels = 3;
    int64_t num_classes = 2;
    std::array<int64_t, 5> stage_channels{32, 64, 128, 256, 512};
    std::array<int64_t, 4> mewb_counts{1, 2, 2, 4}; // stages 2..5
    int64_t input_h = 224;
    int64_t input_w = 224;
    std::array<bool, 4> branch_enabled{true, true, true, true};
    NormKind norm_kind = NormKind::Group;
    int64_t base_weight_extent = 16;
    double ffn_expansion = 4.0;

    void validate() const;

    std::string to_text() const;
    static NetworkConfig from_text(const std::string& text);
};

/// Five-stage symmetric encoder-decoder. Stage 1 is a separable conv
/// only; stages 2..5 downsample with a stride-2 separable conv and run a
/// MewBlock stack. The decoder mirrors with bilinear x2 upsampling, a
/// channel-reducing separable conv and the matching MewBlock stack, with
/// additive skips from the same-resolution encoder stage. A pointwise
/// head maps to class logits.
class Network {
public:
    Network() = default;

    static Network build(const NetworkConfig& cfg, uint64_t seed);

    /// Logits of shape (B, num_classes, H, W). Asserts finite values
    /// after every stage. `training` selects batch-norm statistics mode.
    Tensor forward(const Tensor& x, bool training = false) const;

    /// Same, optionally collecting encoder stage outputs e1..e5.
    Tensor forward_probed(const Tensor& x, bool training,
                          std::vector<Tensor>* encoder_stages) const;

    int64_t parameter_count() const { return params_.parameter_count(); }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const NetworkConfig& config() const { return cfg_; }

private:
    NetworkConfig cfg_;
    ParamStore params_;

    SeparableConv enc1_;
    struct EncStage {
        SeparableConv down;
        std::vector<MewBlock> blocks;
    };
    std::array<EncStage, 4> enc_; // stages 2..5

    struct DecStage {
        SeparableConv conv;
        std::vector<MewBlock> blocks; // empty at level 1
    };
    std::array<DecStage, 4> dec_; // levels 4,3,2,1

    PointwiseConv head_;
};

} // namespace mew
