#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mew/metrics.hpp"
#include "mew/rng.hpp"

using namespace mew;

namespace {

MaskArray mask_from(int64_t h, int64_t w, std::vector<int32_t> v) {
    return MaskArray{1, h, w, std::move(v)};
}

MaskArray random_mask(int64_t h, int64_t w, int num_classes, Rng& rng) {
    MaskArray m = MaskArray::zeros(1, h, w);
    for (auto& v : m.v) v = static_cast<int32_t>(rng.below(static_cast<uint64_t>(num_classes)));
    return m;
}

// Pixel-loop confusion oracle, written independently of the library path.
ConfusionCounts oracle_confusion(const MaskArray& pred, const MaskArray& gt, int cls) {
    ConfusionCounts c;
    for (int64_t b = 0; b < pred.batch; ++b)
        for (int64_t y = 0; y < pred.height; ++y)
            for (int64_t x = 0; x < pred.width; ++x) {
                const bool p = pred.at(b, y, x) == cls;
                const bool g = gt.at(b, y, x) == cls;
                c.tp += p && g;
                c.fp += p && !g;
                c.fn += !p && g;
                c.tn += !p && !g;
            }
    return c;
}

// All-pairs HD95 oracle with its own boundary scan and percentile code.
std::optional<double> oracle_hd95(const MaskArray& pred, const MaskArray& gt, int cls,
                                  double sh, double sw) {
    auto boundary = [&](const MaskArray& m) {
        std::vector<std::pair<int64_t, int64_t>> pts;
        for (int64_t y = 0; y < m.height; ++y)
            for (int64_t x = 0; x < m.width; ++x) {
                if (m.at(0, y, x) != cls) continue;
                bool edge = false;
                const int64_t dy[4] = {-1, 1, 0, 0};
                const int64_t dx[4] = {0, 0, -1, 1};
                for (int d = 0; d < 4; ++d) {
                    const int64_t ny = y + dy[d], nx = x + dx[d];
                    if (ny < 0 || ny >= m.height || nx < 0 || nx >= m.width ||
                        m.at(0, ny, nx) != cls)
                        edge = true;
                }
                if (edge) pts.emplace_back(y, x);
            }
        return pts;
    };
    const auto gb = boundary(gt);
    if (gb.empty()) return std::nullopt;
    const auto pb = boundary(pred);
    if (pb.empty()) {
        const double dy = static_cast<double>(pred.height) * sh;
        const double dx = static_cast<double>(pred.width) * sw;
        return std::sqrt(dy * dy + dx * dx);
    }
    std::vector<double> all;
    auto push_directed = [&](const auto& from, const auto& to) {
        for (const auto& p : from) {
            double best = 1e300;
            for (const auto& q : to) {
                const double ddy = static_cast<double>(p.first - q.first) * sh;
                const double ddx = static_cast<double>(p.second - q.second) * sw;
                best = std::min(best, std::sqrt(ddy * ddy + ddx * ddx));
            }
            all.push_back(best);
        }
    };
    push_directed(pb, gb);
    push_directed(gb, pb);
    std::sort(all.begin(), all.end());
    const double rank = 0.95 * static_cast<double>(all.size() - 1);
    const auto lo = static_cast<size_t>(rank);
    const double frac = rank - static_cast<double>(lo);
    if (lo + 1 >= all.size()) return all.back();
    return all[lo] + frac * (all[lo + 1] - all[lo]);
}

} // namespace

TEST_CASE("confusion_counts: agreement, complement, oracle, shape errors") {
    Rng rng(80);
    MaskArray gt = random_mask(8, 8, 2, rng);
    ConfusionCounts same = confusion_counts(gt, gt, 1);
    CHECK(same.fp == 0);
    CHECK(same.fn == 0);
    CHECK(same.total() == 64);

    MaskArray comp = gt;
    for (auto& v : comp.v) v = 1 - v;
    ConfusionCounts c = confusion_counts(comp, gt, 1);
    CHECK(c.tp == 0);
    CHECK(c.tn == 0);

    for (int rep = 0; rep < 20; ++rep) {
        MaskArray p = random_mask(8, 8, 3, rng);
        MaskArray g = random_mask(8, 8, 3, rng);
        for (int cls = 0; cls < 3; ++cls) {
            const ConfusionCounts got = confusion_counts(p, g, cls);
            const ConfusionCounts want = oracle_confusion(p, g, cls);
            CHECK(got.tp == want.tp);
            CHECK(got.fp == want.fp);
            CHECK(got.tn == want.tn);
            CHECK(got.fn == want.fn);
            CHECK(got.total() == 64);
        }
    }

    MaskArray small = MaskArray::zeros(1, 4, 4);
    CHECK_THROWS_AS(confusion_counts(small, gt, 1), std::invalid_argument);
}

TEST_CASE("dsc/iou/acc/spe/sen: hand cases and empty conventions") {
    // Identical masks.
    MaskArray a = mask_from(2, 2, {1, 1, 0, 0});
    auto c = confusion_counts(a, a, 1);
    CHECK(dsc(c) == 1.0);
    CHECK(iou(c) == 1.0);

    // pred 2 pixels, gt 2 pixels, overlap 1: DSC = 0.5, IoU = 1/3.
    MaskArray p = mask_from(2, 2, {1, 1, 0, 0});
    MaskArray g = mask_from(2, 2, {1, 0, 1, 0});
    c = confusion_counts(p, g, 1);
    CHECK(dsc(c) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(iou(c) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    // Both empty: vacuous agreement.
    MaskArray z = mask_from(2, 2, {0, 0, 0, 0});
    c = confusion_counts(z, z, 1);
    CHECK(dsc(c) == 1.0);
    CHECK(iou(c) == 1.0);
    const AccSpeSen s = acc_spe_sen(c);
    CHECK(s.acc == 1.0);
    CHECK(s.sen == 1.0); // no positives to miss

    // Exactly one empty: zero overlap scores.
    c = confusion_counts(z, a, 1);
    CHECK(dsc(c) == 0.0);
    CHECK(iou(c) == 0.0);
}

TEST_CASE("metrics stay in range and match formulas on random masks") {
    Rng rng(81);
    for (int rep = 0; rep < 50; ++rep) {
        MaskArray p = random_mask(8, 8, 2, rng);
        MaskArray g = random_mask(8, 8, 2, rng);
        const ConfusionCounts c = confusion_counts(p, g, 1);
        const AccSpeSen s = acc_spe_sen(c);
        for (double v : {dsc(c), iou(c), s.acc, s.spe, s.sen}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        // DSC symmetry.
        CHECK(dsc(confusion_counts(g, p, 1)) == dsc(c));
    }
}

TEST_CASE("adding a correctly predicted pixel never decreases DSC") {
    Rng rng(82);
    for (int rep = 0; rep < 20; ++rep) {
        MaskArray g = random_mask(8, 8, 2, rng);
        MaskArray p = random_mask(8, 8, 2, rng);
        // Find a pixel where gt=1 and pred=0; flipping it to 1 adds a TP.
        for (size_t i = 0; i < p.v.size(); ++i) {
            if (g.v[i] == 1 && p.v[i] == 0) {
                const double before = dsc(confusion_counts(p, g, 1));
                MaskArray p2 = p;
                p2.v[i] = 1;
                const double after = dsc(confusion_counts(p2, g, 1));
                CHECK(after >= before);
                break;
            }
        }
    }
}

TEST_CASE("boundary_extract: single pixel, filled square, empty class") {
    MaskArray single = MaskArray::zeros(1, 5, 5);
    single.at(0, 2, 3) = 1;
    auto b = boundary_extract(single, 0, 1);
    REQUIRE(b.size() == 1);
    CHECK(b[0].y == 2);
    CHECK(b[0].x == 3);

    // Filled 4x4 square inside a 6x6 image: all 12 perimeter pixels.
    MaskArray sq = MaskArray::zeros(1, 6, 6);
    for (int64_t y = 1; y <= 4; ++y)
        for (int64_t x = 1; x <= 4; ++x) sq.at(0, y, x) = 1;
    CHECK(boundary_extract(sq, 0, 1).size() == 12);

    // A square flush against the border: the border counts as background,
    // so every square pixel on the image edge is boundary.
    MaskArray flush = MaskArray::zeros(1, 4, 4);
    for (int64_t y = 0; y < 4; ++y)
        for (int64_t x = 0; x < 4; ++x) flush.at(0, y, x) = 1;
    CHECK(boundary_extract(flush, 0, 1).size() == 12);

    CHECK(boundary_extract(MaskArray::zeros(1, 5, 5), 0, 1).empty());
}

TEST_CASE("hd95: identical masks, known distance, conventions") {
    Rng rng(83);
    MaskArray g = random_mask(8, 8, 2, rng);
    bool has_fg = false;
    for (auto v : g.v) has_fg |= v == 1;
    if (has_fg) {
        auto d = hd95(g, g, 1, 1.0, 1.0);
        REQUIRE(d.has_value());
        CHECK(*d == 0.0);
    }

    // Two single-pixel masks three pixels apart.
    MaskArray a = MaskArray::zeros(1, 8, 8);
    MaskArray b = MaskArray::zeros(1, 8, 8);
    a.at(0, 4, 2) = 1;
    b.at(0, 4, 5) = 1;
    auto d = hd95(a, b, 1, 1.0, 1.0);
    REQUIRE(d.has_value());
    CHECK(*d == doctest::Approx(3.0).epsilon(1e-15));

    // Pixel spacing scales distances.
    d = hd95(a, b, 1, 1.0, 2.5);
    CHECK(*d == doctest::Approx(7.5).epsilon(1e-12));

    // gt empty: not applicable.
    CHECK(!hd95(a, MaskArray::zeros(1, 8, 8), 1, 1.0, 1.0).has_value());

    // gt present, prediction empty: image-diagonal penalty.
    d = hd95(MaskArray::zeros(1, 8, 8), b, 1, 1.0, 1.0);
    REQUIRE(d.has_value());
    CHECK(*d == doctest::Approx(std::sqrt(128.0)).epsilon(1e-12));
}

TEST_CASE("hd95 matches the brute-force all-pairs oracle on random masks") {
    Rng rng(84);
    for (int rep = 0; rep < 100; ++rep) {
        MaskArray p = random_mask(16, 16, 2, rng);
        MaskArray g = random_mask(16, 16, 2, rng);
        const auto got = hd95(p, g, 1, 1.0, 1.0);
        const auto want = oracle_hd95(p, g, 1, 1.0, 1.0);
        REQUIRE(got.has_value() == want.has_value());
        if (got) CHECK(std::abs(*got - *want) < 1e-9);
        // Pooled directed distances are symmetric in (pred, gt) when both
        // boundaries exist.
        const auto swapped = hd95(g, p, 1, 1.0, 1.0);
        if (got && swapped) CHECK(std::abs(*got - *swapped) < 1e-12);
    }
}

TEST_CASE("every ratio metric equals its oracle on random 16x16 instances") {
    Rng rng(85);
    for (int rep = 0; rep < 100; ++rep) {
        MaskArray p = random_mask(16, 16, 2, rng);
        MaskArray g = random_mask(16, 16, 2, rng);
        const ConfusionCounts got = confusion_counts(p, g, 1);
        const ConfusionCounts want = oracle_confusion(p, g, 1);
        CHECK(std::abs(dsc(got) - 2.0 * static_cast<double>(want.tp) /
                                      static_cast<double>(2 * want.tp + want.fp + want.fn)) <
              1e-12);
        CHECK(got.tp == want.tp);
    }
}

TEST_CASE("report: columns, aggregation, and JSON/TSV emission") {
    MaskArray g = mask_from(2, 4, {0, 1, 1, 0, 2, 2, 0, 0});
    MaskArray p = mask_from(2, 4, {0, 1, 0, 0, 2, 2, 0, 2});
    const MetricsReport r = compute_report(p, g, 3);
    REQUIRE(r.per_class.size() == 2);
    CHECK(r.per_class[0].cls == 1);
    CHECK(r.per_class[1].cls == 2);
    CHECK(r.mean_dsc == doctest::Approx((r.per_class[0].dsc + r.per_class[1].dsc) / 2));

    const std::string tsv = report_tsv(r);
    CHECK(tsv.find("class\tmIoU\tDSC\tAcc\tSpe\tSen\tHD95") == 0);
    CHECK(tsv.find("mean\t") != std::string::npos);
    const std::string json = report_json(r);
    CHECK(json.find("\"per_class\"") != std::string::npos);
    CHECK(json.find("\"hd95\"") != std::string::npos);

    // Self-comparison scores perfectly.
    const MetricsReport self = compute_report(g, g, 3);
    CHECK(self.mean_dsc == 1.0);
    CHECK(self.mean_iou == 1.0);
    REQUIRE(self.mean_hd95.has_value());
    CHECK(*self.mean_hd95 == 0.0);
}

TEST_CASE("argmax_mask: multi-class argmax and single-logit threshold") {
    Tensor logits = Tensor::from_data(Shape{1, 3, 1, 2},
                                      {0.1, -2.0, /*cls1*/ 0.5, 1.0, /*cls2*/ 0.2, 3.0});
    MaskArray m = argmax_mask(logits);
    CHECK(m.at(0, 0, 0) == 1);
    CHECK(m.at(0, 0, 1) == 2);

    Tensor single = Tensor::from_data(Shape{1, 1, 1, 2}, {-0.3, 0.7});
    MaskArray s = argmax_mask(single);
    CHECK(s.at(0, 0, 0) == 0);
    CHECK(s.at(0, 0, 1) == 1);
}
