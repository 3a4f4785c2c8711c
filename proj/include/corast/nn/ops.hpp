#pragma once

#include <cstdint>
#include <vector>

#include "corast/nn/graph.hpp"

namespace corast::nn {

enum class Activation { relu, gelu };
enum class Padding {
    causal,    ///< (K-1)*dilation zeros on the left; output t sees inputs <= t
    centered,  ///< zeros split evenly on both sides
};

/// Dilated 1-D convolution over the trailing (time) axis.
/// x: [C_in x T] or [B x C_in x T]; w: [C_out x C_in x K]; b: [C_out].
/// Output keeps the time length of the input.
Var conv1d(Graph& g, Var x, Var w, Var b, std::int64_t dilation, Padding padding = Padding::causal);

/// Affine map over the trailing axis. x: [... x D_in]; w: [D_out x D_in]; b: [D_out].
Var linear(Graph& g, Var x, Var w, Var b);

/// Affine map applied to the concatenation of `xs` along the trailing axis,
/// without materializing the concatenation. Every xs[i] is [B x n_i] and
/// w is [D_out x sum(n_i)]. Accumulation order is fixed: bias, then the slices
/// of xs[0], xs[1], ... so an all-zero trailing slice leaves results bitwise
/// identical to the shorter map.
Var concat_linear(Graph& g, const std::vector<Var>& xs, Var w, Var b);

Var activation(Graph& g, Var x, Activation kind);
inline Var relu(Graph& g, Var x) { return activation(g, x, Activation::relu); }
inline Var gelu(Graph& g, Var x) { return activation(g, x, Activation::gelu); }

Var add(Graph& g, Var a, Var b);
Var mul(Graph& g, Var a, Var b);

/// Swap the two trailing axes.
Var transpose_last2(Graph& g, Var x);

/// Half-open slice [begin, end) along `axis`.
Var slice_axis(Graph& g, Var x, int axis, std::int64_t begin, std::int64_t end);

/// Last element along the trailing axis; the axis is dropped.
Var take_last(Graph& g, Var x);

/// Zero whole time steps of x: [B x T x C]; keep[b*T + t] == 0 masks step t of item b.
Var mask_steps(Graph& g, Var x, const std::vector<unsigned char>& keep);

/// Mean squared difference between `pred` and a constant target of equal size.
Var mse_loss(Graph& g, Var pred, const Tensor& target);

/// sum(x * weights) for a constant weight tensor of the same size.
Var weighted_sum(Graph& g, Var x, const Tensor& weights);

/// Scalar activation functions and their derivatives.
double gelu_value(double x);
double gelu_derivative(double x);

}  // namespace corast::nn
