#include "corast/nn/parameters.hpp"

#include <cmath>

#include "corast/errors.hpp"

namespace corast::nn {

Parameter& ParameterSet::add(std::string name, Tensor init) {
    if (index_.count(name) != 0) throw ConfigError("duplicate parameter name '" + name + "'");
    index_.emplace(name, params_.size());
    Tensor grad(init.shape());
    params_.push_back(Parameter{std::move(name), std::move(init), std::move(grad)});
    return params_.back();
}

std::size_t ParameterSet::index_of(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
    return it->second;
}

Parameter& ParameterSet::get(std::string_view name) { return params_[index_of(name)]; }
const Parameter& ParameterSet::get(std::string_view name) const { return params_[index_of(name)]; }
bool ParameterSet::contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

std::size_t ParameterSet::count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

void ParameterSet::zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
    grads_written_ = false;
}

double ParameterSet::grad_norm() const {
    double s = 0.0;
    for (const auto& p : params_)
        for (double g : p.grad.values()) s += g * g;
    return std::sqrt(s);
}

std::vector<Tensor> ParameterSet::snapshot() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.value);
    return out;
}

void ParameterSet::restore(const std::vector<Tensor>& values) {
    if (values.size() != params_.size()) throw ConfigError("snapshot size does not match parameter set");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i].shape() != params_[i].value.shape())
            throw ConfigError("snapshot shape mismatch for '" + params_[i].name + "'");
        params_[i].value = values[i];
    }
}

void ParameterSet::copy_values_from(const ParameterSet& other) {
    for (auto& p : params_) {
        const auto& src = other.get(p.name);
        if (src.value.shape() != p.value.shape())
            throw ConfigError("shape mismatch copying parameter '" + p.name + "'");
        p.value = src.value;
    }
}

Tensor fan_in_uniform(const Shape& shape, std::int64_t fan_in, std::mt19937_64& rng) {
    Tensor t(shape);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : t.values()) v = dist(rng);
    return t;
}

}  // namespace corast::nn
