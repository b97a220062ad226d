#include "mew/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mew {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void require_rank4(const Tensor& x, const char* op) {
    require(x.shape().rank() == 4,
            std::string(op) + ": expected rank-4 input, got " + x.shape().str());
}

struct Dims4 {
    int64_t b, c, h, w;
};

Dims4 dims4(const Tensor& x) {
    const Shape& s = x.shape();
    return {s[0], s[1], s[2], s[3]};
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = Tensor::zeros(a.shape());
    auto av = a.values();
    auto bv = b.values();
    auto ov = out.values();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];

    if (tracing({&a, &b})) {
        out.set_requires_grad(true);
        Tape::active()->record([a = a, b = b, out]() mutable {
            auto g = out.grad();
            if (a.requires_grad()) {
                auto ga = a.grad();
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (b.requires_grad()) {
                auto gb = b.grad();
                for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor out = Tensor::zeros(a.shape());
    auto av = a.values();
    auto bv = b.values();
    auto ov = out.values();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];

    if (tracing({&a, &b})) {
        out.set_requires_grad(true);
        Tape::active()->record([a = a, b = b, out]() mutable {
            auto g = out.grad();
            if (a.requires_grad()) {
                auto ga = a.grad();
                auto bv2 = b.values();
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
            }
            if (b.requires_grad()) {
                auto gb = b.grad();
                auto av2 = a.values();
                for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
            }
        });
    }
    return out;
}

Tensor sum(const Tensor& x) {
    Tensor out = Tensor::zeros(Shape{1});
    double s = 0.0;
    for (double v : x.values()) s += v;
    out.values()[0] = s;

    if (tracing({&x})) {
        out.set_requires_grad(true);
        Tape::active()->record([x = x, out]() mutable {
            double g = out.grad()[0];
            auto gx = x.grad();
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += g;
        });
    }
    return out;
}

std::vector<Tensor> split_channels(const Tensor& x, int parts) {
    require_rank4(x, "split_channels");
    require(parts >= 1, "split_channels: parts must be >= 1");
    auto [B, C, H, W] = dims4(x);
    require(C % parts == 0, "split_channels: " + std::to_string(C) +
                                " channels not divisible into " + std::to_string(parts) +
                                " parts");
    const int64_t cp = C / parts;
    const int64_t plane = H * W;
    auto xv = x.values();

    std::vector<Tensor> out;
    out.reserve(static_cast<size_t>(parts));
    for (int p = 0; p < parts; ++p) {
        Tensor t = Tensor::zeros(Shape{B, cp, H, W});
        auto tv = t.values();
        for (int64_t b = 0; b < B; ++b) {
            const double* src = xv.data() + ((b * C + p * cp) * plane);
            double* dst = tv.data() + b * cp * plane;
            std::copy(src, src + cp * plane, dst);
        }
        out.push_back(std::move(t));
    }

    if (tracing({&x})) {
        for (auto& t : out) t.set_requires_grad(true);
        Tape::active()->record([x = x, out, cp, plane]() mutable {
            auto gx = x.grad();
            const int64_t C = x.shape()[1];
            const int64_t B = x.shape()[0];
            for (size_t p = 0; p < out.size(); ++p) {
                if (!out[p].has_grad()) continue;
                auto gp = out[p].grad();
                for (int64_t b = 0; b < B; ++b) {
                    double* dst = gx.data() + ((b * C + static_cast<int64_t>(p) * cp) * plane);
                    const double* src = gp.data() + b * cp * plane;
                    for (int64_t i = 0; i < cp * plane; ++i) dst[i] += src[i];
                }
            }
        });
    }
    return out;
}

Tensor concat_channels(const std::vector<Tensor>& xs) {
    require(!xs.empty(), "concat_channels: empty input list");
    require_rank4(xs[0], "concat_channels");
    auto [B, C0, H, W] = dims4(xs[0]);
    int64_t C = 0;
    for (const Tensor& t : xs) {
        require_rank4(t, "concat_channels");
        auto d = dims4(t);
        require(d.b == B && d.h == H && d.w == W,
                "concat_channels: spatial/batch mismatch " + t.shape().str() + " vs " +
                    xs[0].shape().str());
        C += d.c;
    }
    (void)C0;
    const int64_t plane = H * W;
    Tensor out = Tensor::zeros(Shape{B, C, H, W});
    auto ov = out.values();
    int64_t coff = 0;
    for (const Tensor& t : xs) {
        const int64_t cp = t.shape()[1];
        auto tv = t.values();
        for (int64_t b = 0; b < B; ++b) {
            const double* src = tv.data() + b * cp * plane;
            double* dst = ov.data() + ((b * C + coff) * plane);
            std::copy(src, src + cp * plane, dst);
        }
        coff += cp;
    }

    bool track = false;
    for (const Tensor& t : xs)
        if (tracing({&t})) track = true;
    if (track) {
        out.set_requires_grad(true);
        Tape::active()->record([xs = xs, out, B, C, plane]() mutable {
            auto g = out.grad();
            int64_t coff2 = 0;
            for (Tensor& t : xs) {
                const int64_t cp = t.shape()[1];
                if (t.requires_grad()) {
                    auto gt = t.grad();
                    for (int64_t b = 0; b < B; ++b) {
                        const double* src = g.data() + ((b * C + coff2) * plane);
                        double* dst = gt.data() + b * cp * plane;
                        for (int64_t i = 0; i < cp * plane; ++i) dst[i] += src[i];
                    }
                }
                coff2 += cp;
            }
        });
    }
    return out;
}

namespace {

int64_t conv_out_extent(int64_t in, int64_t k, int64_t stride, int64_t pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// Shared forward/backward loops for the depthwise correlation. `which`
// selects the accumulation target so forward and both grads reuse the
// same index arithmetic.
enum class DwPass { Forward, GradInput, GradKernel };

void dw_loop(DwPass pass, std::span<const double> x, std::span<double> gx,
             std::span<const double> k, std::span<double> gk, std::span<double> y,
             std::span<const double> gy, int64_t B, int64_t C, int64_t H, int64_t W,
             int64_t kh, int64_t kw, int64_t sh, int64_t sw, int64_t ph, int64_t pw,
             int64_t Ho, int64_t Wo) {
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t c = 0; c < C; ++c) {
            const double* xp = x.empty() ? nullptr : x.data() + (b * C + c) * H * W;
            double* gxp = gx.empty() ? nullptr : gx.data() + (b * C + c) * H * W;
            const double* kp = k.empty() ? nullptr : k.data() + c * kh * kw;
            double* gkp = gk.empty() ? nullptr : gk.data() + c * kh * kw;
            double* yp = y.empty() ? nullptr : y.data() + (b * C + c) * Ho * Wo;
            const double* gyp = gy.empty() ? nullptr : gy.data() + (b * C + c) * Ho * Wo;
            for (int64_t oh = 0; oh < Ho; ++oh) {
                const int64_t ih0 = oh * sh - ph;
                const int64_t u_lo = std::max<int64_t>(0, -ih0);
                const int64_t u_hi = std::min<int64_t>(kh, H - ih0);
                for (int64_t ow = 0; ow < Wo; ++ow) {
                    const int64_t iw0 = ow * sw - pw;
                    const int64_t v_lo = std::max<int64_t>(0, -iw0);
                    const int64_t v_hi = std::min<int64_t>(kw, W - iw0);
                    if (pass == DwPass::Forward) {
                        double acc = 0.0;
                        for (int64_t u = u_lo; u < u_hi; ++u)
                            for (int64_t v = v_lo; v < v_hi; ++v)
                                acc += xp[(ih0 + u) * W + iw0 + v] * kp[u * kw + v];
                        yp[oh * Wo + ow] = acc;
                    } else if (pass == DwPass::GradInput) {
                        const double g = gyp[oh * Wo + ow];
                        for (int64_t u = u_lo; u < u_hi; ++u)
                            for (int64_t v = v_lo; v < v_hi; ++v)
                                gxp[(ih0 + u) * W + iw0 + v] += g * kp[u * kw + v];
                    } else {
                        const double g = gyp[oh * Wo + ow];
                        for (int64_t u = u_lo; u < u_hi; ++u)
                            for (int64_t v = v_lo; v < v_hi; ++v)
                                gkp[u * kw + v] += g * xp[(ih0 + u) * W + iw0 + v];
                    }
                }
            }
        }
    }
}

} // namespace

Tensor conv_depthwise(const Tensor& x, const Tensor& kernel, int stride_h, int stride_w,
                      int pad_h, int pad_w) {
    require_rank4(x, "conv_depthwise");
    require(kernel.shape().rank() == 3,
            "conv_depthwise: kernel must be rank-3 (C,kh,kw), got " + kernel.shape().str());
    auto [B, C, H, W] = dims4(x);
    require(kernel.shape()[0] == C, "conv_depthwise: kernel channels " +
                                        std::to_string(kernel.shape()[0]) +
                                        " != input channels " + std::to_string(C));
    require(stride_h >= 1 && stride_w >= 1, "conv_depthwise: stride must be >= 1");
    require(pad_h >= 0 && pad_w >= 0, "conv_depthwise: padding must be >= 0");
    const int64_t kh = kernel.shape()[1], kw = kernel.shape()[2];
    const int64_t Ho = conv_out_extent(H, kh, stride_h, pad_h);
    const int64_t Wo = conv_out_extent(W, kw, stride_w, pad_w);
    require(Ho >= 1 && Wo >= 1, "conv_depthwise: empty output for input " + x.shape().str() +
                                    " kernel " + kernel.shape().str());

    Tensor out = Tensor::zeros(Shape{B, C, Ho, Wo});
    dw_loop(DwPass::Forward, x.values(), {}, kernel.values(), {}, out.values(), {}, B, C, H, W,
            kh, kw, stride_h, stride_w, pad_h, pad_w, Ho, Wo);

    if (tracing({&x, &kernel})) {
        out.set_requires_grad(true);
        Tape::active()->record([x = x, kernel = kernel, out, B, C, H, W, kh, kw, stride_h,
                                stride_w, pad_h, pad_w, Ho, Wo]() mutable {
            auto gy = out.grad();
            if (x.requires_grad())
                dw_loop(DwPass::GradInput, {}, x.grad(), kernel.values(), {}, {}, gy, B, C, H,
                        W, kh, kw, stride_h, stride_w, pad_h, pad_w, Ho, Wo);
            if (kernel.requires_grad())
                dw_loop(DwPass::GradKernel, x.values(), {}, {}, kernel.grad(), {}, gy, B, C, H,
                        W, kh, kw, stride_h, stride_w, pad_h, pad_w, Ho, Wo);
        });
    }
    return out;
}

Tensor conv_depthwise(const Tensor& x, const Tensor& kernel, int stride, int pad) {
    return conv_depthwise(x, kernel, stride, stride, pad, pad);
}

Tensor conv_pointwise(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
    require_rank4(x, "conv_pointwise");
    require(kernel.shape().rank() == 2,
            "conv_pointwise: kernel must be rank-2 (C_out,C_in), got " + kernel.shape().str());
    auto [B, C, H, W] = dims4(x);
    const int64_t Co = kernel.shape()[0], Ci = kernel.shape()[1];
    require(Ci == C, "conv_pointwise: kernel C_in " + std::to_string(Ci) +
                         " != input channels " + std::to_string(C));
    require(bias.shape().rank() == 1 && bias.shape()[0] == Co,
            "conv_pointwise: bias shape " + bias.shape().str() + " != (C_out) with C_out " +
                std::to_string(Co));
    const int64_t plane = H * W;

    Tensor out = Tensor::zeros(Shape{B, Co, H, W});
    {
        auto xv = x.values();
        auto kv = kernel.values();
        auto bv = bias.values();
        auto ov = out.values();
        for (int64_t b = 0; b < B; ++b) {
            for (int64_t co = 0; co < Co; ++co) {
                double* yp = ov.data() + (b * Co + co) * plane;
                const double bval = bv[co];
                for (int64_t i = 0; i < plane; ++i) yp[i] = bval;
                for (int64_t ci = 0; ci < C; ++ci) {
                    const double kval = kv[co * C + ci];
                    if (kval == 0.0) continue;
                    const double* xp = xv.data() + (b * C + ci) * plane;
                    for (int64_t i = 0; i < plane; ++i) yp[i] += kval * xp[i];
                }
            }
        }
    }

    if (tracing({&x, &kernel, &bias})) {
        out.set_requires_grad(true);
        Tape::active()->record([x = x, kernel = kernel, bias = bias, out, B, C, Co,
                                plane]() mutable {
            auto gy = out.grad();
            if (bias.requires_grad()) {
                auto gb = bias.grad();
                for (int64_t b = 0; b < B; ++b)
                    for (int64_t co = 0; co < Co; ++co) {
                        const double* gp = gy.data() + (b * Co + co) * plane;
                        double s = 0.0;
                        for (int64_t i = 0; i < plane; ++i) s += gp[i];
                        gb[co] += s;
                    }
            }
            if (kernel.requires_grad()) {
                auto gk = kernel.grad();
                auto xv = x.values();
                for (int64_t b = 0; b < B; ++b)
                    for (int64_t co = 0; co < Co; ++co) {
                        const double* gp = gy.data() + (b * Co + co) * plane;
                        for (int64_t ci = 0; ci < C; ++ci) {
                            const double* xp = xv.data() + (b * C + ci) * plane;
                            double s = 0.0;
                            for (int64_t i = 0; i < plane; ++i) s += gp[i] * xp[i];
                            gk[co * C + ci] += s;
                        }
                    }
            }
            if (x.requires_grad()) {
                auto gx = x.grad();
                auto kv = kernel.values();
                for (int64_t b = 0; b < B; ++b)
                    for (int64_t ci = 0; ci < C; ++ci) {
                        double* gxp = gx.data() + (b * C + ci) * plane;
                        for (int64_t co = 0; co < Co; ++co) {
                            const double kval = kv[co * C + ci];
                            if (kval == 0.0) continue;
                            const double* gp = gy.data() + (b * Co + co) * plane;
                            for (int64_t i = 0; i < plane; ++i) gxp[i] += kval * gp[i];
                        }
                    }
            }
        });
    }
    return out;
}

Tensor group_norm(const Tensor& x, int groups, const Tensor& gamma, const Tensor& beta,
                  double eps) {
    require_rank4(x, "group_norm");
    require(groups >= 1, "group_norm: groups must be >= 1");
    require(eps > 0.0, "group_norm: eps must be > 0");
    auto [B, C, H, W] = dims4(x);
    require(C % groups == 0, "group_norm: " + std::to_string(C) +
                                 " channels not divisible by " + std::to_string(groups) +
                                 " groups");
    require(gamma.shape().rank() == 1 && gamma.shape()[0] == C,
            "group_norm: gamma shape " + gamma.shape().str() + " != (C)");
    require(beta.shape().rank() == 1 && beta.shape()[0] == C,
            "group_norm: beta shape " + beta.shape().str() + " != (C)");

    const int64_t cg = C / groups;
    const int64_t plane = H * W;
    const int64_t m = cg * plane;

    Tensor out = Tensor::zeros(x.shape());
    // Saved for backward: one inv-sigma per (b,g) and the standardized values.
    auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(x.numel()));
    auto inv_sigma = std::make_shared<std::vector<double>>(static_cast<size_t>(B * groups));
    {
        auto xv = x.values();
        auto gv = gamma.values();
        auto bv = beta.values();
        auto ov = out.values();
        for (int64_t b = 0; b < B; ++b) {
            for (int64_t g = 0; g < groups; ++g) {
                const int64_t base = (b * C + g * cg) * plane;
                double mean = 0.0;
                for (int64_t i = 0; i < m; ++i) mean += xv[base + i];
                mean /= static_cast<double>(m);
                double var = 0.0;
                for (int64_t i = 0; i < m; ++i) {
                    const double d = xv[base + i] - mean;
                    var += d * d;
                }
                var /= static_cast<double>(m);
                const double is = 1.0 / std::sqrt(var + eps);
                (*inv_sigma)[static_cast<size_t>(b * groups + g)] = is;
                for (int64_t cc = 0; cc < cg; ++cc) {
                    const int64_t c = g * cg + cc;
                    const double ga = gv[c], be = bv[c];
                    const int64_t off = (b * C + c) * plane;
                    for (int64_t i = 0; i < plane; ++i) {
                        const double xh = (xv[off + i] - mean) * is;
                        (*xhat)[static_cast<size_t>(off + i)] = xh;
                        ov[off + i] = ga * xh + be;
                    }
                }
            }
        }
    }

    if (tracing({&x, &gamma, &beta})) {
        out.set_requires_grad(true);
        Tape::active()->record([x = x, gamma = gamma, beta = beta, out, xhat, inv_sigma, B, C,
                                groups, cg, plane, m]() mutable {
            auto gy = out.grad();
            auto gv = gamma.values();
            if (beta.requires_grad()) {
                auto gb = beta.grad();
                for (int64_t b = 0; b < B; ++b)
                    for (int64_t c = 0; c < C; ++c) {
                        const double* gp = gy.data() + (b * C + c) * plane;
                        double s = 0.0;
                        for (int64_t i = 0; i < plane; ++i) s += gp[i];
                        gb[c] += s;
                    }
            }
            if (gamma.requires_grad()) {
                auto gg = gamma.grad();
                for (int64_t b = 0; b < B; ++b)
                    for (int64_t c = 0; c < C; ++c) {
                        const int64_t off = (b * C + c) * plane;
                        double s = 0.0;
                        for (int64_t i = 0; i < plane; ++i)
                            s += gy[static_cast<size_t>(off + i)] *
                                 (*xhat)[static_cast<size_t>(off + i)];
                        gg[c] += s;
                    }
            }
            if (x.requires_grad()) {
                auto gx = x.grad();
                for (int64_t b = 0; b < B; ++b) {
                    for (int64_t g = 0; g < groups; ++g) {
                        const double is = (*inv_sigma)[static_cast<size_t>(b * groups + g)];
                        double sum_dy = 0.0, sum_dy_xh = 0.0;
                        for (int64_t cc = 0; cc < cg; ++cc) {
                            const int64_t c = g * cg + cc;
                            const int64_t off = (b * C + c) * plane;
                            const double ga = gv[c];
                            for (int64_t i = 0; i < plane; ++i) {
                                const double dy = gy[static_cast<size_t>(off + i)] * ga;
                                sum_dy += dy;
                                sum_dy_xh += dy * (*xhat)[static_cast<size_t>(off + i)];
                            }
                        }
                        const double mean_dy = sum_dy / static_cast<double>(m);
                        const double mean_dy_xh = sum_dy_xh / static_cast<double>(m);
                        for (int64_t cc = 0; cc < cg; ++cc) {
                            const int64_t c = g * cg + cc;
                            const int64_t off = (b * C + c) * plane;
                            const double ga = gv[c];
                            for (int64_t i = 0; i < plane; ++i) {
                                const double dy = gy[static_cast<size_t>(off + i)] * ga;
                                const double xh = (*xhat)[static_cast<size_t>(off + i)];
                                gx[static_cast<size_t>(off + i)] +=
                                    is * (dy - mean_dy - xh * mean_dy_xh);
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Tensor running_mean, Tensor running_var, bool training, double momentum,
                  double eps) {
    require_rank4(x, "batch_norm");
    require(eps > 0.0, "batch_norm: eps must be > 0");
    auto [B, C, H, W] = dims4(x);
    require(gamma.shape().rank() == 1 && gamma.shape()[0] == C,
            "batch_norm: gamma shape " + gamma.shape().str() + " != (C)");
    require(beta.shape().rank() == 1 && beta.shape()[0] == C,
            "batch_norm: beta shape " + beta.shape().str() + " != (C)");
    require(running_mean.shape().rank() == 1 && running_mean.shape()[0] == C,
            "batch_norm: running_mean shape mismatch");
    require(running_var.shape().rank() == 1 && running_var.shape()[0] == C,
            "batch_norm: running_var shape mismatch");

    const int64_t plane = H * W;
    const int64_t m = B * plane;
    Tensor out = Tensor::zeros(x.shape());

    auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(x.numel()));
    auto inv_sigma = std::make_shared<std::vector<double>>(static_cast<size_t>(C));
    {
        auto xv = x.values();
        auto gv = gamma.values();
        auto bv = beta.values();
        auto ov = out.values();
        auto rm = running_mean.values();
        auto rv = running_var.values();
        for (int64_t c = 0; c < C; ++c) {
            double mean, var;
            if (training) {
                mean = 0.0;
                for (int64_t b = 0; b < B; ++b) {
                    const double* xp = xv.data() + (b * C + c) * plane;
                    for (int64_t i = 0; i < plane; ++i) mean += xp[i];
                }
                mean /= static_cast<double>(m);
                var = 0.0;
                for (int64_t b = 0; b < B; ++b) {
                    const double* xp = xv.data() + (b * C + c) * plane;
                    for (int64_t i = 0; i < plane; ++i) {
                        const double d = xp[i] - mean;
                        var += d * d;
                    }
                }
                var /= static_cast<double>(m);
                const double var_unbiased =
                    m > 1 ? var * static_cast<double>(m) / static_cast<double>(m - 1) : var;
                rm[c] = (1.0 - momentum) * rm[c] + momentum * mean;
                rv[c] = (1.0 - momentum) * rv[c] + momentum * var_unbiased;
            } else {
                mean = rm[c];
                var = rv[c];
            }
            const double is = 1.0 / std::sqrt(var + eps);
            (*inv_sigma)[static_cast<size_t>(c)] = is;
            const double ga = gv[c], be = bv[c];
            for (int64_t b = 0; b < B; ++b) {
                const int64_t off = (b * C + c) * plane;
                for (int64_t i = 0; i < plane; ++i) {
                    const double xh = (xv[off + i] - mean) * is;
                    (*xhat)[static_cast<size_t>(off + i)] = xh;
                    ov[off + i] = ga * xh + be;
                }
            }
        }
    }

    if (tracing({&x, &gamma, &beta})) {
        out.set_requires_grad(true);
        Tape::active()->record([x = x, gamma = gamma, beta = beta, out, xhat, inv_sigma, B, C,
                                plane, m, training]() mutable {
            auto gy = out.grad();
            auto gv = gamma.values();
            for (int64_t c = 0; c < C; ++c) {
                double sum_dy = 0.0, sum_dy_xh = 0.0, sum_g = 0.0, sum_g_xh = 0.0;
                for (int64_t b = 0; b < B; ++b) {
                    const int64_t off = (b * C + c) * plane;
                    for (int64_t i = 0; i < plane; ++i) {
                        const double g = gy[static_cast<size_t>(off + i)];
                        const double xh = (*xhat)[static_cast<size_t>(off + i)];
                        sum_g += g;
                        sum_g_xh += g * xh;
                    }
                }
                if (beta.requires_grad()) beta.grad()[c] += sum_g;
                if (gamma.requires_grad()) gamma.grad()[c] += sum_g_xh;
                if (!x.requires_grad()) continue;
                const double ga = gv[c];
                const double is = (*inv_sigma)[static_cast<size_t>(c)];
                sum_dy = sum_g * ga;
                sum_dy_xh = sum_g_xh * ga;
                const double mean_dy = sum_dy / static_cast<double>(m);
                const double mean_dy_xh = sum_dy_xh / static_cast<double>(m);
                auto gx = x.grad();
                for (int64_t b = 0; b < B; ++b) {
                    const int64_t off = (b * C + c) * plane;
                    for (int64_t i = 0; i < plane; ++i) {
                        const double dy = gy[static_cast<size_t>(off + i)] * ga;
                        const double xh = (*xhat)[static_cast<size_t>(off + i)];
                        if (training)
                            gx[static_cast<size_t>(off + i)] +=
                                is * (dy - mean_dy - xh * mean_dy_xh);
                        else
                            gx[static_cast<size_t>(off + i)] += is * dy;
                    }
                }
            }
        });
    }
    return out;
}

Tensor gelu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    auto xv = x.values();
    auto ov = out.values();
    for (size_t i = 0; i < ov.size(); ++i) {
        const double v = xv[i];
        ov[i] = v * 0.5 * (1.0 + std::erf(v * kInvSqrt2));
    }
    if (tracing({&x})) {
        out.set_requires_grad(true);
        Tape::active()->record([x = x, out]() mutable {
            auto g = out.grad();
            auto gx = x.grad();
            auto xv2 = x.values();
            for (size_t i = 0; i < g.size(); ++i) {
                const double v = xv2[i];
                const double phi = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
                const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
                gx[i] += g[i] * (phi + v * pdf);
            }
        });
    }
    return out;
}

Tensor relu6(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    auto xv = x.values();
    auto ov = out.values();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = std::clamp(xv[i], 0.0, 6.0);
    if (tracing({&x})) {
        out.set_requires_grad(true);
        Tape::active()->record([x = x, out]() mutable {
            auto g = out.grad();
            auto gx = x.grad();
            auto xv2 = x.values();
            for (size_t i = 0; i < g.size(); ++i)
                if (xv2[i] > 0.0 && xv2[i] < 6.0) gx[i] += g[i];
        });
    }
    return out;
}

namespace {

// Align-corners sampling table: out index -> (lo index, hi index, hi weight).
struct LerpTab {
    std::vector<int64_t> lo, hi;
    std::vector<double> f;
};

LerpTab lerp_table(int64_t in, int64_t out) {
    LerpTab t;
    t.lo.resize(static_cast<size_t>(out));
    t.hi.resize(static_cast<size_t>(out));
    t.f.resize(static_cast<size_t>(out));
    for (int64_t o = 0; o < out; ++o) {
        double src = 0.0;
        if (out > 1 && in > 1)
            src = static_cast<double>(o) * static_cast<double>(in - 1) /
                  static_cast<double>(out - 1);
        int64_t lo = static_cast<int64_t>(src);
        if (lo > in - 2) lo = std::max<int64_t>(0, in - 2);
        const double f = src - static_cast<double>(lo);
        t.lo[static_cast<size_t>(o)] = lo;
        t.hi[static_cast<size_t>(o)] = std::min<int64_t>(lo + 1, in - 1);
        t.f[static_cast<size_t>(o)] = in > 1 ? f : 0.0;
    }
    return t;
}

} // namespace

Tensor bilinear_interpolate(const Tensor& x, int64_t out_h, int64_t out_w) {
    require_rank4(x, "bilinear_interpolate");
    require(out_h >= 1 && out_w >= 1, "bilinear_interpolate: target extents must be >= 1, got (" +
                                          std::to_string(out_h) + "," + std::to_string(out_w) +
                                          ")");
    auto [B, C, H, W] = dims4(x);
    const LerpTab th = lerp_table(H, out_h);
    const LerpTab tw = lerp_table(W, out_w);

    Tensor out = Tensor::zeros(Shape{B, C, out_h, out_w});
    {
        auto xv = x.values();
        auto ov = out.values();
        for (int64_t b = 0; b < B; ++b)
            for (int64_t c = 0; c < C; ++c) {
                const double* xp = xv.data() + (b * C + c) * H * W;
                double* yp = ov.data() + (b * C + c) * out_h * out_w;
                for (int64_t oh = 0; oh < out_h; ++oh) {
                    const int64_t h0 = th.lo[static_cast<size_t>(oh)];
                    const int64_t h1 = th.hi[static_cast<size_t>(oh)];
                    const double fh = th.f[static_cast<size_t>(oh)];
                    for (int64_t ow = 0; ow < out_w; ++ow) {
                        const int64_t w0 = tw.lo[static_cast<size_t>(ow)];
                        const int64_t w1 = tw.hi[static_cast<size_t>(ow)];
                        const double fw = tw.f[static_cast<size_t>(ow)];
                        const double v00 = xp[h0 * W + w0], v01 = xp[h0 * W + w1];
                        const double v10 = xp[h1 * W + w0], v11 = xp[h1 * W + w1];
                        yp[oh * out_w + ow] = (1 - fh) * ((1 - fw) * v00 + fw * v01) +
                                              fh * ((1 - fw) * v10 + fw * v11);
                    }
                }
            }
    }

    if (tracing({&x})) {
        out.set_requires_grad(true);
        Tape::active()->record([x = x, out, th, tw, B, C, H, W, out_h, out_w]() mutable {
            auto g = out.grad();
            auto gx = x.grad();
            for (int64_t b = 0; b < B; ++b)
                for (int64_t c = 0; c < C; ++c) {
                    double* gxp = gx.data() + (b * C + c) * H * W;
                    const double* gp = g.data() + (b * C + c) * out_h * out_w;
                    for (int64_t oh = 0; oh < out_h; ++oh) {
                        const int64_t h0 = th.lo[static_cast<size_t>(oh)];
                        const int64_t h1 = th.hi[static_cast<size_t>(oh)];
                        const double fh = th.f[static_cast<size_t>(oh)];
                        for (int64_t ow = 0; ow < out_w; ++ow) {
                            const int64_t w0 = tw.lo[static_cast<size_t>(ow)];
                            const int64_t w1 = tw.hi[static_cast<size_t>(ow)];
                            const double fw = tw.f[static_cast<size_t>(ow)];
                            const double gv = gp[oh * out_w + ow];
                            gxp[h0 * W + w0] += gv * (1 - fh) * (1 - fw);
                            gxp[h0 * W + w1] += gv * (1 - fh) * fw;
                            gxp[h1 * W + w0] += gv * fh * (1 - fw);
                            gxp[h1 * W + w1] += gv * fh * fw;
                        }
                    }
                }
        });
    }
    return out;
}

} // namespace mew
