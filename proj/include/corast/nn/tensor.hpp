#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "corast/nn/aligned.hpp"

namespace corast::nn {

using Shape = std::vector<std::int64_t>;

std::int64_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    /// Extent of axis `axis`; negative values count from the back.
    std::int64_t dim(int axis) const;
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    AlignedVector& storage() { return values_; }
    const AlignedVector& storage() const { return values_; }
    std::vector<double> to_vector() const { return {values_.begin(), values_.end()}; }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    double& at(std::int64_t i, std::int64_t j) { return values_[static_cast<std::size_t>(i * shape_[1] + j)]; }
    double at(std::int64_t i, std::int64_t j) const {
        return values_[static_cast<std::size_t>(i * shape_[1] + j)];
    }
    double& at(std::int64_t i, std::int64_t j, std::int64_t k) {
        return values_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }
    double at(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return values_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }

    /// Value of a rank-0 (or single-element) tensor.
    double item() const;

    void fill(double value);
    bool all_finite() const;
    Tensor reshaped(Shape shape) const;

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.values_ == b.values_;
    }

private:
    Shape shape_;
    AlignedVector values_;
};

}  // namespace corast::nn
