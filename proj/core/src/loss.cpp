#include "mew/loss.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "mew/autodiff.hpp"

namespace mew {

namespace {
constexpr double kSmooth = 1e-5;
}

Tensor bce_dice_loss(const Tensor& logits, const MaskArray& gt, const LossWeights& w) {
    if (logits.shape().rank() != 4)
        throw std::invalid_argument("bce_dice_loss: expected rank-4 logits");
    const int64_t B = logits.shape()[0], K = logits.shape()[1];
    const int64_t H = logits.shape()[2], W = logits.shape()[3];
    if (gt.batch != B || gt.height != H || gt.width != W)
        throw std::invalid_argument("bce_dice_loss: mask extents (" + std::to_string(gt.batch) +
                                    "," + std::to_string(gt.height) + "," +
                                    std::to_string(gt.width) + ") do not match logits " +
                                    logits.shape().str());
    if (w.bce + w.dice <= 0.0)
        throw std::invalid_argument("bce_dice_loss: loss weights must sum to > 0");
    const int label_limit = K == 1 ? 2 : static_cast<int>(K);
    for (int32_t v : gt.v)
        if (v < 0 || v >= label_limit)
            throw std::invalid_argument("bce_dice_loss: label " + std::to_string(v) +
                                        " out of range [0," + std::to_string(label_limit) + ")");

    const int64_t plane = H * W;
    const int64_t npix = B * plane;
    auto zv = logits.values();

    double loss_val = 0.0;
    auto probs = std::make_shared<std::vector<double>>();
    auto num = std::make_shared<std::vector<double>>();
    auto den = std::make_shared<std::vector<double>>();

    if (K == 1) {
        probs->resize(static_cast<size_t>(npix));
        double ce = 0.0;
        double sum_p = 0.0, sum_y = 0.0, sum_py = 0.0;
        for (int64_t i = 0; i < npix; ++i) {
            const double z = zv[static_cast<size_t>(i)];
            const double y = gt.v[static_cast<size_t>(i)] != 0 ? 1.0 : 0.0;
            const double p = 1.0 / (1.0 + std::exp(-z));
            (*probs)[static_cast<size_t>(i)] = p;
            ce += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
            sum_p += p;
            sum_y += y;
            sum_py += p * y;
        }
        ce /= static_cast<double>(npix);
        num->push_back(2.0 * sum_py + kSmooth);
        den->push_back(sum_p + sum_y + kSmooth);
        const double dice = num->back() / den->back();
        loss_val = w.bce * ce + w.dice * (1.0 - dice);
    } else {
        probs->resize(static_cast<size_t>(npix * K));
        double ce = 0.0;
        num->assign(static_cast<size_t>(K), kSmooth);
        den->assign(static_cast<size_t>(K), kSmooth);
        for (int64_t b = 0; b < B; ++b)
            for (int64_t i = 0; i < plane; ++i) {
                // Stable log-softmax per pixel.
                double zmax = -std::numeric_limits<double>::infinity();
                for (int64_t k = 0; k < K; ++k)
                    zmax = std::max(zmax, zv[static_cast<size_t>((b * K + k) * plane + i)]);
                double zsum = 0.0;
                for (int64_t k = 0; k < K; ++k)
                    zsum += std::exp(zv[static_cast<size_t>((b * K + k) * plane + i)] - zmax);
                const double log_z = std::log(zsum) + zmax;
                const int32_t y = gt.v[static_cast<size_t>(b * plane + i)];
                ce += log_z - zv[static_cast<size_t>((b * K + y) * plane + i)];
                for (int64_t k = 0; k < K; ++k) {
                    const double p =
                        std::exp(zv[static_cast<size_t>((b * K + k) * plane + i)] - log_z);
                    (*probs)[static_cast<size_t>((b * K + k) * plane + i)] = p;
                    if (k >= 1) {
                        (*num)[static_cast<size_t>(k)] += 2.0 * p * (y == k ? 1.0 : 0.0);
                        (*den)[static_cast<size_t>(k)] += p + (y == k ? 1.0 : 0.0);
                    }
                }
            }
        ce /= static_cast<double>(npix);
        double dice_sum = 0.0;
        for (int64_t k = 1; k < K; ++k)
            dice_sum += (*num)[static_cast<size_t>(k)] / (*den)[static_cast<size_t>(k)];
        loss_val = w.bce * ce + w.dice * (1.0 - dice_sum / static_cast<double>(K - 1));
    }

    Tensor out = Tensor::zeros(Shape{1});
    out.values()[0] = loss_val;

    if (tracing({&logits})) {
        out.set_requires_grad(true);
        MaskArray gt_copy = gt;
        Tape::active()->record([logits = logits, gt = std::move(gt_copy), w, out, probs, num,
                                den, B, K, plane, npix]() mutable {
            const double g = out.grad()[0];
            auto gz = logits.grad();
            if (K == 1) {
                const double n = (*num)[0], d = (*den)[0];
                for (int64_t i = 0; i < npix; ++i) {
                    const double p = (*probs)[static_cast<size_t>(i)];
                    const double y = gt.v[static_cast<size_t>(i)] != 0 ? 1.0 : 0.0;
                    const double d_ce = (p - y) / static_cast<double>(npix);
                    const double d_dice_dp = (2.0 * y * d - n) / (d * d);
                    const double dz = w.bce * d_ce + w.dice * (-d_dice_dp) * p * (1.0 - p);
                    gz[static_cast<size_t>(i)] += g * dz;
                }
            } else {
                const double inv_fg = 1.0 / static_cast<double>(K - 1);
                std::vector<double> gp(static_cast<size_t>(K));
                for (int64_t b = 0; b < B; ++b)
                    for (int64_t i = 0; i < plane; ++i) {
                        const int32_t y = gt.v[static_cast<size_t>(b * plane + i)];
                        double dot = 0.0;
                        for (int64_t k = 0; k < K; ++k) {
                            double v = 0.0;
                            if (k >= 1) {
                                const double n = (*num)[static_cast<size_t>(k)];
                                const double d = (*den)[static_cast<size_t>(k)];
                                const double yk = (y == k) ? 1.0 : 0.0;
                                v = -w.dice * inv_fg * (2.0 * yk * d - n) / (d * d);
                            }
                            gp[static_cast<size_t>(k)] = v;
                            dot += v * (*probs)[static_cast<size_t>((b * K + k) * plane + i)];
                        }
                        for (int64_t k = 0; k < K; ++k) {
                            const double p =
                                (*probs)[static_cast<size_t>((b * K + k) * plane + i)];
                            const double d_ce =
                                (p - (y == k ? 1.0 : 0.0)) / static_cast<double>(npix);
                            const double d_dice = p * (gp[static_cast<size_t>(k)] - dot);
                            gz[static_cast<size_t>((b * K + k) * plane + i)] +=
                                g * (w.bce * d_ce + d_dice);
                        }
                    }
            }
        });
    }
    return out;
}

} // namespace mew
