#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "corast/nn/tensor.hpp"

namespace corast::nn {

class Graph;

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
};

/// Named, ordered collection of trainable tensors with matching gradient slots.
///
/// Gradient policy: Graph::backward refuses to write into a set whose gradients
/// have not been cleared with zero_grad() since the previous backward pass.
/// Accumulating across passes is not supported.
class ParameterSet {
public:
    Parameter& add(std::string name, Tensor init);

    Parameter& get(std::string_view name);
    const Parameter& get(std::string_view name) const;
    bool contains(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;

    std::vector<Parameter>& items() { return params_; }
    const std::vector<Parameter>& items() const { return params_; }
    std::size_t size() const { return params_.size(); }

    /// Total scalar parameter count.
    std::size_t count() const;

    void zero_grad();
    bool has_pending_grads() const { return grads_written_; }
    double grad_norm() const;

    std::vector<Tensor> snapshot() const;
    void restore(const std::vector<Tensor>& values);

    /// Copy values by name from `other`; shapes must match.
    void copy_values_from(const ParameterSet& other);

private:
    friend class Graph;
    std::vector<Parameter> params_;
    std::unordered_map<std::string, std::size_t> index_;
    bool grads_written_ = false;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
Tensor fan_in_uniform(const Shape& shape, std::int64_t fan_in, std::mt19937_64& rng);

}  // namespace corast::nn
