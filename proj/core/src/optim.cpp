#include "mew/optim.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace mew {

double cosine_lr(int64_t t, int64_t total, double lr_max, double lr_min) {
    if (t < 0 || t > total || total < 1)
        throw std::invalid_argument("cosine_lr: need 0 <= t <= T, T >= 1");
    return lr_min + (lr_max - lr_min) *
                        (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) /
                                        static_cast<double>(total))) /
                        2.0;
}

namespace {

class AdamW final : public Optimizer {
public:
    AdamW(double b1, double b2, double eps, double wd) : b1_(b1), b2_(b2), eps_(eps), wd_(wd) {}

    void step(ParamStore& params, double lr) override {
        ++t_;
        const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        for (auto& e : params.entries()) {
            if (!e.trainable) continue;
            auto w = e.tensor.values();
            auto g = e.tensor.grad();
            auto& m = slot(m_, e.name, w.size());
            auto& v = slot(v_, e.name, w.size());
            for (size_t i = 0; i < w.size(); ++i) {
                w[i] -= lr * wd_ * w[i];
                m[i] = b1_ * m[i] + (1.0 - b1_) * g[i];
                v[i] = b2_ * v[i] + (1.0 - b2_) * g[i] * g[i];
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                w[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    std::string kind() const override { return "adamw"; }
    int64_t step_count() const override { return t_; }

    std::vector<std::pair<std::string, Tensor>> slots() const override {
        std::vector<std::pair<std::string, Tensor>> out;
        for (const auto& [name, m] : m_)
            out.emplace_back("adamw.m:" + name,
                             Tensor::from_data(Shape{static_cast<int64_t>(m.size())},
                                               std::vector<double>(m)));
        for (const auto& [name, v] : v_)
            out.emplace_back("adamw.v:" + name,
                             Tensor::from_data(Shape{static_cast<int64_t>(v.size())},
                                               std::vector<double>(v)));
        return out;
    }

    void load_slots(const std::vector<std::pair<std::string, Tensor>>& slots,
                    int64_t step_count) override {
        t_ = step_count;
        for (const auto& [name, t] : slots) {
            auto vals = std::vector<double>(t.values().begin(), t.values().end());
            if (name.rfind("adamw.m:", 0) == 0)
                m_[name.substr(8)] = std::move(vals);
            else if (name.rfind("adamw.v:", 0) == 0)
                v_[name.substr(8)] = std::move(vals);
            else
                throw std::invalid_argument("AdamW: unknown slot '" + name + "'");
        }
    }

private:
    static std::vector<double>& slot(std::map<std::string, std::vector<double>>& store,
                                     const std::string& name, size_t n) {
        auto& s = store[name];
        if (s.empty()) s.assign(n, 0.0);
        if (s.size() != n) throw std::logic_error("AdamW: slot size changed for '" + name + "'");
        return s;
    }

    double b1_, b2_, eps_, wd_;
    int64_t t_ = 0;
    std::map<std::string, std::vector<double>> m_, v_;
};

class Sgd final : public Optimizer {
public:
    Sgd(double momentum, double wd) : momentum_(momentum), wd_(wd) {}

    void step(ParamStore& params, double lr) override {
        ++t_;
        for (auto& e : params.entries()) {
            if (!e.trainable) continue;
            auto w = e.tensor.values();
            auto g = e.tensor.grad();
            auto& v = slot(v_, e.name, w.size());
            for (size_t i = 0; i < w.size(); ++i) {
                const double grad = g[i] + wd_ * w[i];
                v[i] = momentum_ * v[i] + grad;
                w[i] -= lr * v[i];
            }
        }
    }

    std::string kind() const override { return "sgd"; }
    int64_t step_count() const override { return t_; }

    std::vector<std::pair<std::string, Tensor>> slots() const override {
        std::vector<std::pair<std::string, Tensor>> out;
        for (const auto& [name, v] : v_)
            out.emplace_back("sgd.v:" + name,
                             Tensor::from_data(Shape{static_cast<int64_t>(v.size())},
                                               std::vector<double>(v)));
        return out;
    }

    void load_slots(const std::vector<std::pair<std::string, Tensor>>& slots,
                    int64_t step_count) override {
        t_ = step_count;
        for (const auto& [name, t] : slots) {
            if (name.rfind("sgd.v:", 0) != 0)
                throw std::invalid_argument("Sgd: unknown slot '" + name + "'");
            v_[name.substr(6)] = std::vector<double>(t.values().begin(), t.values().end());
        }
    }

private:
    static std::vector<double>& slot(std::map<std::string, std::vector<double>>& store,
                                     const std::string& name, size_t n) {
        auto& s = store[name];
        if (s.empty()) s.assign(n, 0.0);
        if (s.size() != n) throw std::logic_error("Sgd: slot size changed for '" + name + "'");
        return s;
    }

    double momentum_, wd_;
    int64_t t_ = 0;
    std::map<std::string, std::vector<double>> v_;
};

} // namespace

std::unique_ptr<Optimizer> make_adamw(double beta1, double beta2, double eps,
                                      double weight_decay) {
    return std::make_unique<AdamW>(beta1, beta2, eps, weight_decay);
}

std::unique_ptr<Optimizer> make_sgd(double momentum, double weight_decay) {
    return std::make_unique<Sgd>(momentum, weight_decay);
}

} // namespace mew
