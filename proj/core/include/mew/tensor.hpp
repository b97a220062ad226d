#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mew {

/// Dense shape, rank 1..4. Feature maps are (batch, channel, height, width).
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<int64_t> dims);

    int rank() const { return rank_; }
    int64_t operator[](int i) const { return d_[static_cast<size_t>(i)]; }
    int64_t numel() const;
    bool operator==(const Shape& o) const = default;
    std::string str() const;

private:
    std::array<int64_t, 4> d_{0, 0, 0, 0};
    int rank_ = 0;
};

/// Shared handle to a dense row-major double array with an optional
/// same-shape gradient accumulator. Values are written once by the
/// producing op; the gradient buffer is filled during backward().
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape& s, bool requires_grad = false);
    static Tensor full(const Shape& s, double value, bool requires_grad = false);
    static Tensor from_data(const Shape& s, std::vector<double> data, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(d_); }
    const Shape& shape() const;
    int64_t numel() const { return shape().numel(); }

    bool requires_grad() const;
    void set_requires_grad(bool v);

    std::span<double> values();
    std::span<const double> values() const;

    /// Gradient accumulator; allocated zero-filled on first access.
    std::span<double> grad();
    bool has_grad() const;
    void zero_grad();

    bool same_storage(const Tensor& o) const { return d_ == o.d_; }

    /// True when every value is finite (no NaN/Inf).
    bool all_finite() const;

private:
    struct Data;
    std::shared_ptr<Data> d_;
};

/// Throws std::invalid_argument when shapes differ, naming both.
void check_same_shape(const Tensor& a, const Tensor& b, const char* op);

} // namespace mew
