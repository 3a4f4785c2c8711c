#include "corast/nn/graph.hpp"

#include <cmath>

#include "corast/errors.hpp"

namespace corast::nn {

Var Graph::constant(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

Var Graph::parameter(ParameterSet& set, std::string_view name) {
    const std::size_t idx = set.index_of(name);
    auto key = std::make_pair(static_cast<const ParameterSet*>(&set), idx);
    if (auto it = bound_.find(key); it != bound_.end()) return Var{it->second};
    Node n;
    n.value = set.items()[idx].value;
    n.requires_grad = true;
    n.owner = &set;
    n.param_index = idx;
    nodes_.push_back(std::move(n));
    bound_.emplace(key, nodes_.size() - 1);
    return Var{nodes_.size() - 1};
}

Tensor Graph::grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (n.grad.size() != n.value.size()) return Tensor(n.value.shape());
    return n.grad;
}

Tensor& Graph::grad_buffer(Var v) {
    Node& n = nodes_.at(v.id);
    if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

Var Graph::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return record(std::move(value), std::vector<Var>(inputs), std::move(fn));
}

Var Graph::record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    for (Var in : inputs) n.requires_grad = n.requires_grad || nodes_.at(in.id).requires_grad;
    if (n.requires_grad) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

void Graph::backward(Var loss, ParameterSet* params) {
    Node& root = nodes_.at(loss.id);
    if (root.value.size() != 1)
        throw UsageError("backward() needs a scalar loss, got shape " + shape_string(root.value.shape()));
    if (params != nullptr && params->grads_written_)
        throw UsageError("gradients were not zeroed before backward()");
    if (!std::isfinite(root.value[0])) throw NumericError("non-finite loss value in backward()");

    for (auto& n : nodes_) n.grad = Tensor();
    grad_buffer(loss)[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.backward || n.grad.empty()) continue;
        n.backward(*this);
    }

    if (params == nullptr) return;
    for (auto& n : nodes_) {
        if (n.owner != params) continue;
        Parameter& p = params->items()[n.param_index];
        if (n.grad.empty()) {
            p.grad.fill(0.0);
            continue;
        }
        if (!n.grad.all_finite()) throw NumericError("non-finite gradient for parameter '" + p.name + "'");
        p.grad = n.grad;
    }
    params->grads_written_ = true;
}

}  // namespace corast::nn
