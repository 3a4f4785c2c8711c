#include "corast/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "corast/errors.hpp"

namespace corast::nn {

std::int64_t element_count(const Shape& shape) {
    std::int64_t n = 1;
    for (auto e : shape) {
        if (e < 0) throw ConfigError("negative extent in shape " + shape_string(shape));
        n *= e;
    }
    return n;
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? " x " : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(static_cast<std::size_t>(element_count(shape_)), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(values.begin(), values.end()) {
    if (element_count(shape_) != static_cast<std::int64_t>(values_.size()))
        throw ConfigError("tensor shape " + shape_string(shape_) + " does not match " +
                          std::to_string(values_.size()) + " values");
}

std::int64_t Tensor::dim(int axis) const {
    const int r = static_cast<int>(shape_.size());
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) throw UsageError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape_));
    return shape_[static_cast<std::size_t>(a)];
}

double Tensor::item() const {
    if (values_.size() != 1) throw UsageError("item() on tensor of shape " + shape_string(shape_));
    return values_[0];
}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

bool Tensor::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::reshaped(Shape shape) const {
    if (element_count(shape) != static_cast<std::int64_t>(values_.size()))
        throw ConfigError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    t.values_ = values_;
    return t;
}

}  // namespace corast::nn
