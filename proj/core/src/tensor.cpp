#include "mew/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mew {

Shape::Shape(std::initializer_list<int64_t> dims) {
    if (dims.size() == 0 || dims.size() > 4)
        throw std::invalid_argument("Shape: rank must be 1..4, got " + std::to_string(dims.size()));
    rank_ = static_cast<int>(dims.size());
    int i = 0;
    for (int64_t d : dims) {
        if (d <= 0)
            throw std::invalid_argument("Shape: extents must be positive, got " + std::to_string(d));
        d_[static_cast<size_t>(i++)] = d;
    }
}

int64_t Shape::numel() const {
    int64_t n = 1;
    for (int i = 0; i < rank_; ++i) n *= d_[static_cast<size_t>(i)];
    return rank_ == 0 ? 0 : n;
}

std::string Shape::str() const {
    std::ostringstream os;
    os << '(';
    for (int i = 0; i < rank_; ++i) {
        if (i) os << ',';
        os << d_[static_cast<size_t>(i)];
    }
    os << ')';
    return os.str();
}

struct Tensor::Data {
    Shape shape;
    std::vector<double> v;
    std::vector<double> g; // empty until grad() is first requested
    bool requires_grad = false;
};

Tensor Tensor::zeros(const Shape& s, bool requires_grad) {
    Tensor t;
    t.d_ = std::make_shared<Data>();
    t.d_->shape = s;
    t.d_->v.assign(static_cast<size_t>(s.numel()), 0.0);
    t.d_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::full(const Shape& s, double value, bool requires_grad) {
    Tensor t = zeros(s, requires_grad);
    for (double& x : t.d_->v) x = value;
    return t;
}

Tensor Tensor::from_data(const Shape& s, std::vector<double> data, bool requires_grad) {
    if (static_cast<int64_t>(data.size()) != s.numel())
        throw std::invalid_argument("Tensor::from_data: " + std::to_string(data.size()) +
                                    " values for shape " + s.str());
    Tensor t;
    t.d_ = std::make_shared<Data>();
    t.d_->shape = s;
    t.d_->v = std::move(data);
    t.d_->requires_grad = requires_grad;
    return t;
}

const Shape& Tensor::shape() const {
    if (!d_) throw std::logic_error("Tensor: undefined");
    return d_->shape;
}

bool Tensor::requires_grad() const { return d_ && d_->requires_grad; }

void Tensor::set_requires_grad(bool v) {
    if (!d_) throw std::logic_error("Tensor: undefined");
    d_->requires_grad = v;
}

std::span<double> Tensor::values() {
    if (!d_) throw std::logic_error("Tensor: undefined");
    return d_->v;
}

std::span<const double> Tensor::values() const {
    if (!d_) throw std::logic_error("Tensor: undefined");
    return d_->v;
}

std::span<double> Tensor::grad() {
    if (!d_) throw std::logic_error("Tensor: undefined");
    if (d_->g.empty()) d_->g.assign(d_->v.size(), 0.0);
    return d_->g;
}

bool Tensor::has_grad() const { return d_ && !d_->g.empty(); }

void Tensor::zero_grad() {
    if (d_ && !d_->g.empty()) d_->g.assign(d_->v.size(), 0.0);
}

bool Tensor::all_finite() const {
    if (!d_) return false;
    for (double x : d_->v)
        if (!std::isfinite(x)) return false;
    return true;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!(a.shape() == b.shape()))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape().str() +
                                    " vs " + b.shape().str());
}

} // namespace mew
