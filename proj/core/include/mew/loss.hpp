#pragma once

#include "mew/metrics.hpp"
#include "mew/tensor.hpp"

namespace mew {

struct LossWeights {
    double bce = 0.5;
    double dice = 0.5;
};

/// Combined cross-entropy + soft-Dice segmentation loss, returned as a
/// scalar tensor on the tape:
///   loss = bce_w * CE + dice_w * (1 - mean_fg soft_dice)
/// A single-channel head (K=1) uses per-pixel sigmoid/binary CE; K>=2
/// uses softmax/categorical CE. Soft Dice runs over foreground classes
/// with a 1e-5 smoothing constant in numerator and denominator.
Tensor bce_dice_loss(const Tensor& logits, const MaskArray& gt, const LossWeights& w);

} // namespace mew
