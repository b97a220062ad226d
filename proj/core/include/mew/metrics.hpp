#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mew/tensor.hpp"

namespace mew {

/// Integer-labelled rank-3 mask array (batch, H, W), labels in [0, num_classes).
struct MaskArray {
    int64_t batch = 0, height = 0, width = 0;
    std::vector<int32_t> v;

    static MaskArray zeros(int64_t b, int64_t h, int64_t w) {
        return MaskArray{b, h, w, std::vector<int32_t>(static_cast<size_t>(b * h * w), 0)};
    }
    int32_t& at(int64_t b, int64_t h, int64_t w) {
        return v[static_cast<size_t>((b * height + h) * width + w)];
    }
    int32_t at(int64_t b, int64_t h, int64_t w) const {
        return v[static_cast<size_t>((b * height + h) * width + w)];
    }
    bool same_extents(const MaskArray& o) const {
        return batch == o.batch && height == o.height && width == o.width;
    }
};

/// One-vs-rest pixel counts for a single class.
struct ConfusionCounts {
    int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    int64_t total() const { return tp + fp + tn + fn; }
};

ConfusionCounts confusion_counts(const MaskArray& pred, const MaskArray& gt, int cls);

/// Ratio metrics with the empty-class conventions:
///  - DSC/IoU are 1.0 when the class is absent from both masks and 0.0
///    when absent from exactly one (the plain formula already gives 0).
///  - Spe/Sen are 1.0 when their denominator is empty (no cases to miss).
double dsc(const ConfusionCounts& c);
double iou(const ConfusionCounts& c);
struct AccSpeSen {
    double acc, spe, sen;
};
AccSpeSen acc_spe_sen(const ConfusionCounts& c);

struct BoundaryPoint {
    int64_t y, x;
};

/// Foreground pixels of `cls` with at least one 4-neighbour outside the
/// class; the image border counts as background. Row-major order.
std::vector<BoundaryPoint> boundary_extract(const MaskArray& mask, int64_t item, int cls);

/// 95th percentile (linear interpolation between order statistics) of the
/// pooled directed boundary distances pred->gt and gt->pred, Euclidean
/// with the given pixel spacing. Items of a batch are matched item-wise.
/// Conventions: nullopt when gt has no boundary anywhere; the image
/// diagonal when gt is present but pred is empty for some item.
std::optional<double> hd95(const MaskArray& pred, const MaskArray& gt, int cls,
                           double spacing_h, double spacing_w);

struct ClassMetrics {
    int cls = 0;
    bool present_in_gt = false;
    double iou = 0, dsc = 0, acc = 0, spe = 0, sen = 0;
    std::optional<double> hd95;
};

struct MetricsReport {
    int num_classes = 2;
    std::vector<ClassMetrics> per_class; // foreground classes 1..K-1
    double mean_iou = 0, mean_dsc = 0, mean_acc = 0, mean_spe = 0, mean_sen = 0;
    std::optional<double> mean_hd95;
};

/// Streaming aggregation over batches: confusion counts are pooled
/// globally per class; HD95 is computed per item and averaged over the
/// items where it applies. Class means are unweighted over the foreground
/// classes present in ground truth.
class MetricsAccumulator {
public:
    MetricsAccumulator(int num_classes, double spacing_h = 1.0, double spacing_w = 1.0,
                       bool with_hd95 = true);
    void add(const MaskArray& pred, const MaskArray& gt);
    MetricsReport report() const;

private:
    int num_classes_;
    double sh_, sw_;
    bool with_hd95_;
    std::vector<ConfusionCounts> counts_;
    std::vector<std::vector<double>> hd95_samples_; // per class, one per applicable item
};

/// Single-shot report for a (pred, gt) pair.
MetricsReport compute_report(const MaskArray& pred, const MaskArray& gt, int num_classes,
                             double spacing_h = 1.0, double spacing_w = 1.0);

/// Tab-separated table with header {class, mIoU, DSC, Acc, Spe, Sen, HD95}
/// plus a "mean" row; "n/a" for inapplicable HD95.
std::string report_tsv(const MetricsReport& r);
/// Same content as a JSON object (schema documented in the README).
std::string report_json(const MetricsReport& r);

/// Argmax over the class axis of logits (B,K,H,W); a single-channel K=1
/// head thresholds its logit at 0 (sigmoid 0.5).
MaskArray argmax_mask(const Tensor& logits);

} // namespace mew
