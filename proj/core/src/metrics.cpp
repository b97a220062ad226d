#include "mew/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace mew {

namespace {

void require_same(const MaskArray& a, const MaskArray& b, const char* op) {
    if (!a.same_extents(b))
        throw std::invalid_argument(std::string(op) + ": extent mismatch (" +
                                    std::to_string(a.batch) + "," + std::to_string(a.height) +
                                    "," + std::to_string(a.width) + ") vs (" +
                                    std::to_string(b.batch) + "," + std::to_string(b.height) +
                                    "," + std::to_string(b.width) + ")");
}

double percentile95(std::vector<double>& d) {
    std::sort(d.begin(), d.end());
    const size_t n = d.size();
    if (n == 1) return d[0];
    const double rank = 0.95 * static_cast<double>(n - 1);
    const size_t lo = static_cast<size_t>(rank);
    const double frac = rank - static_cast<double>(lo);
    if (lo + 1 >= n) return d[n - 1];
    return d[lo] + frac * (d[lo + 1] - d[lo]);
}

void directed_distances(const std::vector<BoundaryPoint>& from,
                        const std::vector<BoundaryPoint>& to, double sh, double sw,
                        std::vector<double>& out) {
    for (const auto& p : from) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : to) {
            const double dy = static_cast<double>(p.y - q.y) * sh;
            const double dx = static_cast<double>(p.x - q.x) * sw;
            const double d2 = dy * dy + dx * dx;
            if (d2 < best) best = d2;
        }
        out.push_back(std::sqrt(best));
    }
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

} // namespace

ConfusionCounts confusion_counts(const MaskArray& pred, const MaskArray& gt, int cls) {
    require_same(pred, gt, "confusion_counts");
    ConfusionCounts c;
    for (size_t i = 0; i < pred.v.size(); ++i) {
        const bool p = pred.v[i] == cls;
        const bool g = gt.v[i] == cls;
        if (p && g)
            ++c.tp;
        else if (p && !g)
            ++c.fp;
        else if (!p && g)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

double dsc(const ConfusionCounts& c) {
    const int64_t den = 2 * c.tp + c.fp + c.fn;
    if (den == 0) return 1.0; // class absent from both masks
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(den);
}

double iou(const ConfusionCounts& c) {
    const int64_t den = c.tp + c.fp + c.fn;
    if (den == 0) return 1.0;
    return static_cast<double>(c.tp) / static_cast<double>(den);
}

AccSpeSen acc_spe_sen(const ConfusionCounts& c) {
    AccSpeSen r{};
    const int64_t n = c.total();
    r.acc = n == 0 ? 1.0 : static_cast<double>(c.tp + c.tn) / static_cast<double>(n);
    r.spe = (c.tn + c.fp) == 0 ? 1.0
                               : static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
    r.sen = (c.tp + c.fn) == 0 ? 1.0
                               : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    return r;
}

std::vector<BoundaryPoint> boundary_extract(const MaskArray& mask, int64_t item, int cls) {
    std::vector<BoundaryPoint> out;
    const int64_t H = mask.height, W = mask.width;
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
            if (mask.at(item, y, x) != cls) continue;
            const bool edge = y == 0 || y == H - 1 || x == 0 || x == W - 1 ||
                              mask.at(item, y - 1, x) != cls || mask.at(item, y + 1, x) != cls ||
                              mask.at(item, y, x - 1) != cls || mask.at(item, y, x + 1) != cls;
            if (edge) out.push_back({y, x});
        }
    return out;
}

std::optional<double> hd95(const MaskArray& pred, const MaskArray& gt, int cls, double spacing_h,
                           double spacing_w) {
    require_same(pred, gt, "hd95");
    std::vector<double> pooled;
    bool any_gt = false;
    for (int64_t b = 0; b < pred.batch; ++b) {
        const auto gb = boundary_extract(gt, b, cls);
        if (gb.empty()) continue; // gt absent for this item: not applicable
        any_gt = true;
        const auto pb = boundary_extract(pred, b, cls);
        if (pb.empty()) {
            // Prediction missed the class entirely: full-diagonal penalty.
            const double dy = static_cast<double>(pred.height) * spacing_h;
            const double dx = static_cast<double>(pred.width) * spacing_w;
            return std::sqrt(dy * dy + dx * dx);
        }
        directed_distances(pb, gb, spacing_h, spacing_w, pooled);
        directed_distances(gb, pb, spacing_h, spacing_w, pooled);
    }
    if (!any_gt) return std::nullopt;
    return percentile95(pooled);
}

MetricsAccumulator::MetricsAccumulator(int num_classes, double spacing_h, double spacing_w,
                                       bool with_hd95)
    : num_classes_(num_classes), sh_(spacing_h), sw_(spacing_w), with_hd95_(with_hd95) {
    if (num_classes < 2)
        throw std::invalid_argument("MetricsAccumulator: need at least 2 classes");
    counts_.resize(static_cast<size_t>(num_classes));
    hd95_samples_.resize(static_cast<size_t>(num_classes));
}

void MetricsAccumulator::add(const MaskArray& pred, const MaskArray& gt) {
    require_same(pred, gt, "MetricsAccumulator::add");
    for (int cls = 0; cls < num_classes_; ++cls) {
        const ConfusionCounts c = confusion_counts(pred, gt, cls);
        counts_[static_cast<size_t>(cls)].tp += c.tp;
        counts_[static_cast<size_t>(cls)].fp += c.fp;
        counts_[static_cast<size_t>(cls)].tn += c.tn;
        counts_[static_cast<size_t>(cls)].fn += c.fn;
    }
    if (!with_hd95_) return;
    for (int cls = 1; cls < num_classes_; ++cls)
        for (int64_t b = 0; b < pred.batch; ++b) {
            MaskArray p1{1, pred.height, pred.width, {}};
            MaskArray g1{1, pred.height, pred.width, {}};
            const size_t plane = static_cast<size_t>(pred.height * pred.width);
            p1.v.assign(pred.v.begin() + static_cast<int64_t>(plane) * b,
                        pred.v.begin() + static_cast<int64_t>(plane) * (b + 1));
            g1.v.assign(gt.v.begin() + static_cast<int64_t>(plane) * b,
                        gt.v.begin() + static_cast<int64_t>(plane) * (b + 1));
            if (auto d = hd95(p1, g1, cls, sh_, sw_))
                hd95_samples_[static_cast<size_t>(cls)].push_back(*d);
        }
}

MetricsReport MetricsAccumulator::report() const {
    MetricsReport r;
    r.num_classes = num_classes_;
    int present = 0;
    for (int cls = 1; cls < num_classes_; ++cls) {
        const ConfusionCounts& c = counts_[static_cast<size_t>(cls)];
        ClassMetrics m;
        m.cls = cls;
        m.present_in_gt = (c.tp + c.fn) > 0;
        m.iou = iou(c);
        m.dsc = dsc(c);
        const AccSpeSen a = acc_spe_sen(c);
        m.acc = a.acc;
        m.spe = a.spe;
        m.sen = a.sen;
        const auto& hs = hd95_samples_[static_cast<size_t>(cls)];
        if (!hs.empty()) {
            double s = 0;
            for (double d : hs) s += d;
            m.hd95 = s / static_cast<double>(hs.size());
        }
        r.per_class.push_back(m);
        if (m.present_in_gt) ++present;
    }
    // Unweighted mean over foreground classes present in gt; if none is
    // present anywhere, fall back to all foreground classes.
    double hd_sum = 0;
    int hd_n = 0;
    for (const ClassMetrics& m : r.per_class) {
        if (present > 0 && !m.present_in_gt) continue;
        r.mean_iou += m.iou;
        r.mean_dsc += m.dsc;
        r.mean_acc += m.acc;
        r.mean_spe += m.spe;
        r.mean_sen += m.sen;
        if (m.hd95) {
            hd_sum += *m.hd95;
            ++hd_n;
        }
    }
    const int denom = present > 0 ? present : static_cast<int>(r.per_class.size());
    if (denom > 0) {
        r.mean_iou /= denom;
        r.mean_dsc /= denom;
        r.mean_acc /= denom;
        r.mean_spe /= denom;
        r.mean_sen /= denom;
    }
    if (hd_n > 0) r.mean_hd95 = hd_sum / hd_n;
    return r;
}

MetricsReport compute_report(const MaskArray& pred, const MaskArray& gt, int num_classes,
                             double spacing_h, double spacing_w) {
    MetricsAccumulator acc(num_classes, spacing_h, spacing_w);
    acc.add(pred, gt);
    return acc.report();
}

std::string report_tsv(const MetricsReport& r) {
    std::ostringstream os;
    os << "class\tmIoU\tDSC\tAcc\tSpe\tSen\tHD95\n";
    for (const ClassMetrics& m : r.per_class) {
        os << m.cls << '\t' << fmt(m.iou) << '\t' << fmt(m.dsc) << '\t' << fmt(m.acc) << '\t'
           << fmt(m.spe) << '\t' << fmt(m.sen) << '\t'
           << (m.hd95 ? fmt(*m.hd95) : std::string("n/a")) << '\n';
    }
    os << "mean\t" << fmt(r.mean_iou) << '\t' << fmt(r.mean_dsc) << '\t' << fmt(r.mean_acc)
       << '\t' << fmt(r.mean_spe) << '\t' << fmt(r.mean_sen) << '\t'
       << (r.mean_hd95 ? fmt(*r.mean_hd95) : std::string("n/a")) << '\n';
    return os.str();
}

std::string report_json(const MetricsReport& r) {
    std::ostringstream os;
    os << "{\n  \"num_classes\": " << r.num_classes << ",\n  \"per_class\": [\n";
    for (size_t i = 0; i < r.per_class.size(); ++i) {
        const ClassMetrics& m = r.per_class[i];
        os << "    {\"class\": " << m.cls << ", \"present_in_gt\": "
           << (m.present_in_gt ? "true" : "false") << ", \"miou\": " << fmt(m.iou)
           << ", \"dsc\": " << fmt(m.dsc) << ", \"acc\": " << fmt(m.acc)
           << ", \"spe\": " << fmt(m.spe) << ", \"sen\": " << fmt(m.sen) << ", \"hd95\": "
           << (m.hd95 ? fmt(*m.hd95) : std::string("null")) << "}";
        os << (i + 1 < r.per_class.size() ? ",\n" : "\n");
    }
    os << "  ],\n  \"mean\": {\"miou\": " << fmt(r.mean_iou) << ", \"dsc\": " << fmt(r.mean_dsc)
       << ", \"acc\": " << fmt(r.mean_acc) << ", \"spe\": " << fmt(r.mean_spe)
       << ", \"sen\": " << fmt(r.mean_sen) << ", \"hd95\": "
       << (r.mean_hd95 ? fmt(*r.mean_hd95) : std::string("null")) << "}\n}\n";
    return os.str();
}

MaskArray argmax_mask(const Tensor& logits) {
    if (logits.shape().rank() != 4)
        throw std::invalid_argument("argmax_mask: expected rank-4 logits");
    const int64_t B = logits.shape()[0], K = logits.shape()[1];
    const int64_t H = logits.shape()[2], W = logits.shape()[3];
    MaskArray m = MaskArray::zeros(B, H, W);
    auto lv = logits.values();
    const int64_t plane = H * W;
    for (int64_t b = 0; b < B; ++b)
        for (int64_t i = 0; i < plane; ++i) {
            if (K == 1) {
                m.v[static_cast<size_t>(b * plane + i)] =
                    lv[static_cast<size_t>(b * plane + i)] > 0.0 ? 1 : 0;
                continue;
            }
            int best = 0;
            double bv = lv[static_cast<size_t>((b * K) * plane + i)];
            for (int64_t k = 1; k < K; ++k) {
                const double v = lv[static_cast<size_t>((b * K + k) * plane + i)];
                if (v > bv) {
                    bv = v;
                    best = static_cast<int>(k);
                }
            }
            m.v[static_cast<size_t>(b * plane + i)] = best;
        }
    return m;
}

} // namespace mew
