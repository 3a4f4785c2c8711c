#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <deque>
#include <map>
#include <string_view>
#include <vector>

#include "corast/nn/parameters.hpp"
#include "corast/nn/tensor.hpp"

namespace corast::nn {

/// Handle to a value recorded on a Graph.
struct Var {
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    std::size_t id = npos;
    bool valid() const { return id != npos; }
};

/// Reverse-mode tape. Operations append nodes in execution order; backward()
/// walks them in reverse, so a node's gradient is complete before its
/// backward function runs.
class Graph {
public:
    using BackwardFn = std::function<void(Graph&)>;

    Var constant(Tensor value, bool requires_grad = false);
    /// Leaf bound to a named parameter; repeated calls return the same Var.
    Var parameter(ParameterSet& set, std::string_view name);

    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

    /// Gradient of the last backward() loss w.r.t. `v` (zeros if unreached).
    Tensor grad(Var v) const;

    /// Gradient accumulator of `v`, allocated as zeros on first access. For
    /// use inside BackwardFn implementations.
    Tensor& grad_buffer(Var v);

    /// Append an op result. `fn` is dropped when no input requires a gradient.
    Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
    Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn);

    /// Backpropagate from a single-element `loss`. When `params` is given,
    /// gradients of its bound leaves are written into its gradient slots.
    void backward(Var loss, ParameterSet* params = nullptr);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        BackwardFn backward;
        ParameterSet* owner = nullptr;
        std::size_t param_index = 0;
    };
    std::deque<Node> nodes_;  // deque keeps value references stable while recording
    std::map<std::pair<const ParameterSet*, std::size_t>, std::size_t> bound_;
};

}  // namespace corast::nn
