#include "corast/nn/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <memory>
#include <numbers>

#include "corast/errors.hpp"

namespace corast::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

std::int64_t leading_count(const Shape& s, std::size_t upto) {
    std::int64_t n = 1;
    for (std::size_t i = 0; i < upto; ++i) n *= s[i];
    return n;
}

void require_same_size(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ConfigError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                          shape_string(b.shape()));
}

}  // namespace

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_derivative(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

Var conv1d(Graph& g, Var xv, Var wv, Var bv, std::int64_t dilation, Padding padding) {
    const Tensor& x = g.value(xv);
    const Tensor& w = g.value(wv);
    const Tensor& b = g.value(bv);
    if (x.rank() != 2 && x.rank() != 3) throw ConfigError("conv1d: input must be [C x T] or [B x C x T], got " + shape_string(x.shape()));
    if (w.rank() != 3) throw ConfigError("conv1d: weights must be [C_out x C_in x K]");
    if (dilation < 1) throw ConfigError("conv1d: dilation must be >= 1");
    const std::int64_t batch = x.rank() == 3 ? x.dim(0) : 1;
    const std::int64_t c_in = x.dim(-2);
    const std::int64_t steps = x.dim(-1);
    const std::int64_t c_out = w.dim(0);
    const std::int64_t k = w.dim(2);
    if (w.dim(1) != c_in)
        throw ConfigError("conv1d: input has " + std::to_string(c_in) + " channels, weights expect " +
                          std::to_string(w.dim(1)));
    if (b.rank() != 1 || b.dim(0) != c_out) throw ConfigError("conv1d: bias must be [C_out]");
    if (k < 1 || steps < 1) throw ConfigError("conv1d: kernel size and length must be >= 1");

    const std::int64_t span = (k - 1) * dilation;
    const std::int64_t pad_left = padding == Padding::causal ? span : span / 2;
    const std::int64_t cols = batch * steps;

    auto col = std::make_shared<RowMat>(RowMat::Zero(c_in * k, cols));
    for (std::int64_t bi = 0; bi < batch; ++bi)
        for (std::int64_t c = 0; c < c_in; ++c) {
            const double* src = x.data() + (bi * c_in + c) * steps;
            for (std::int64_t kk = 0; kk < k; ++kk) {
                const std::int64_t shift = kk * dilation - pad_left;
                double* dst = col->data() + (c * k + kk) * cols + bi * steps;
                const std::int64_t t0 = std::max<std::int64_t>(0, -shift);
                const std::int64_t t1 = std::min<std::int64_t>(steps, steps - shift);
                for (std::int64_t t = t0; t < t1; ++t) dst[t] = src[t + shift];
            }
        }

    ConstMapMat wm(w.data(), c_out, c_in * k);
    RowMat r = wm * (*col);
    r.colwise() += Eigen::Map<const Eigen::VectorXd>(b.data(), c_out);

    Shape out_shape = x.shape();
    out_shape[out_shape.size() - 2] = c_out;
    Tensor out(out_shape);
    for (std::int64_t bi = 0; bi < batch; ++bi)
        for (std::int64_t o = 0; o < c_out; ++o)
            std::copy_n(r.data() + o * cols + bi * steps, steps, out.data() + (bi * c_out + o) * steps);

    const bool any_grad = g.requires_grad(xv) || g.requires_grad(wv) || g.requires_grad(bv);
    if (!any_grad) return g.record(std::move(out), {xv, wv, bv}, nullptr);

    const Var self{g.size()};
    return g.record(std::move(out), {xv, wv, bv}, [=](Graph& gr) {
        const Tensor& gy = gr.grad_buffer(self);
        RowMat dr(c_out, cols);
        for (std::int64_t bi = 0; bi < batch; ++bi)
            for (std::int64_t o = 0; o < c_out; ++o)
                std::copy_n(gy.data() + (bi * c_out + o) * steps, steps, dr.data() + o * cols + bi * steps);
        if (gr.requires_grad(wv)) {
            Tensor& gw = gr.grad_buffer(wv);
            MapMat(gw.data(), c_out, c_in * k).noalias() += dr * col->transpose();
        }
        if (gr.requires_grad(bv)) {
            Tensor& gb = gr.grad_buffer(bv);
            Eigen::Map<Eigen::VectorXd>(gb.data(), c_out) += dr.rowwise().sum();
        }
        if (gr.requires_grad(xv)) {
            const Tensor& wt = gr.value(wv);
            RowMat dcol = ConstMapMat(wt.data(), c_out, c_in * k).transpose() * dr;
            Tensor& gx = gr.grad_buffer(xv);
            for (std::int64_t bi = 0; bi < batch; ++bi)
                for (std::int64_t c = 0; c < c_in; ++c) {
                    double* dst = gx.data() + (bi * c_in + c) * steps;
                    for (std::int64_t kk = 0; kk < k; ++kk) {
                        const std::int64_t shift = kk * dilation - pad_left;
                        const double* src = dcol.data() + (c * k + kk) * cols + bi * steps;
                        const std::int64_t t0 = std::max<std::int64_t>(0, -shift);
                        const std::int64_t t1 = std::min<std::int64_t>(steps, steps - shift);
                        for (std::int64_t t = t0; t < t1; ++t) dst[t + shift] += src[t];
                    }
                }
        }
    });
}

Var linear(Graph& g, Var xv, Var wv, Var bv) {
    const Tensor& x = g.value(xv);
    const Tensor& w = g.value(wv);
    const Tensor& b = g.value(bv);
    if (w.rank() != 2) throw ConfigError("linear: weights must be [D_out x D_in]");
    if (x.rank() < 1) throw ConfigError("linear: input must have a trailing feature axis");
    const std::int64_t d_out = w.dim(0);
    const std::int64_t d_in = w.dim(1);
    if (x.dim(-1) != d_in)
        throw ConfigError("linear: trailing input extent " + std::to_string(x.dim(-1)) + " does not match D_in " +
                          std::to_string(d_in));
    if (b.rank() != 1 || b.dim(0) != d_out) throw ConfigError("linear: bias must be [D_out]");
    const std::int64_t rows = static_cast<std::int64_t>(x.size()) / d_in;

    Shape out_shape = x.shape();
    out_shape.back() = d_out;
    Tensor out(out_shape);
    MapMat y(out.data(), rows, d_out);
    y.noalias() = ConstMapMat(x.data(), rows, d_in) * ConstMapMat(w.data(), d_out, d_in).transpose();
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.data(), d_out);

    const Var self{g.size()};
    return g.record(std::move(out), {xv, wv, bv}, [=](Graph& gr) {
        const Tensor& gy = gr.grad_buffer(self);
        ConstMapMat dy(gy.data(), rows, d_out);
        if (gr.requires_grad(wv)) {
            Tensor& gw = gr.grad_buffer(wv);
            MapMat(gw.data(), d_out, d_in).noalias() += dy.transpose() * ConstMapMat(gr.value(xv).data(), rows, d_in);
        }
        if (gr.requires_grad(bv)) {
            Tensor& gb = gr.grad_buffer(bv);
            Eigen::Map<Eigen::RowVectorXd>(gb.data(), d_out) += dy.colwise().sum();
        }
        if (gr.requires_grad(xv)) {
            Tensor& gx = gr.grad_buffer(xv);
            MapMat(gx.data(), rows, d_in).noalias() += dy * ConstMapMat(gr.value(wv).data(), d_out, d_in);
        }
    });
}

Var concat_linear(Graph& g, const std::vector<Var>& xs, Var wv, Var bv) {
    if (xs.empty()) throw UsageError("concat_linear: no inputs");
    const Tensor& w = g.value(wv);
    const Tensor& b = g.value(bv);
    if (w.rank() != 2) throw ConfigError("concat_linear: weights must be [D_out x D_in]");
    const std::int64_t d_out = w.dim(0);
    const std::int64_t d_in = w.dim(1);
    if (b.rank() != 1 || b.dim(0) != d_out) throw ConfigError("concat_linear: bias must be [D_out]");
    const std::int64_t rows = g.value(xs[0]).rank() == 2 ? g.value(xs[0]).dim(0) : 1;
    std::vector<std::int64_t> widths;
    std::int64_t total = 0;
    for (Var v : xs) {
        const Tensor& x = g.value(v);
        const std::int64_t r = x.rank() == 2 ? x.dim(0) : 1;
        if (x.rank() < 1 || x.rank() > 2 || r != rows) throw ConfigError("concat_linear: inputs must share [B x n] rows");
        widths.push_back(x.dim(-1));
        total += x.dim(-1);
    }
    if (total != d_in)
        throw ConfigError("concat_linear: concatenated width " + std::to_string(total) + " does not match D_in " +
                          std::to_string(d_in));

    Tensor out(g.value(xs[0]).rank() == 2 ? Shape{rows, d_out} : Shape{d_out});
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t o = 0; o < d_out; ++o) {
            double acc = b[static_cast<std::size_t>(o)];
            std::int64_t offset = 0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                const double* xr = g.value(xs[i]).data() + r * widths[i];
                const double* wr = w.data() + o * d_in + offset;
                for (std::int64_t j = 0; j < widths[i]; ++j) acc += wr[j] * xr[j];
                offset += widths[i];
            }
            out[static_cast<std::size_t>(r * d_out + o)] = acc;
        }

    std::vector<Var> inputs = xs;
    inputs.push_back(wv);
    inputs.push_back(bv);
    const Var self{g.size()};
    return g.record(std::move(out), inputs, [=](Graph& gr) {
        const Tensor gy = gr.grad_buffer(self);
        const Tensor& wt = gr.value(wv);
        if (gr.requires_grad(bv)) {
            Tensor& gb = gr.grad_buffer(bv);
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t o = 0; o < d_out; ++o) gb[static_cast<std::size_t>(o)] += gy[static_cast<std::size_t>(r * d_out + o)];
        }
        std::int64_t offset = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const Tensor& x = gr.value(xs[i]);
            const std::int64_t n = widths[i];
            if (gr.requires_grad(wv)) {
                Tensor& gw = gr.grad_buffer(wv);
                for (std::int64_t r = 0; r < rows; ++r)
                    for (std::int64_t o = 0; o < d_out; ++o) {
                        const double d = gy[static_cast<std::size_t>(r * d_out + o)];
                        double* gwr = gw.data() + o * d_in + offset;
                        const double* xr = x.data() + r * n;
                        for (std::int64_t j = 0; j < n; ++j) gwr[j] += d * xr[j];
                    }
            }
            if (gr.requires_grad(xs[i])) {
                Tensor& gx = gr.grad_buffer(xs[i]);
                for (std::int64_t r = 0; r < rows; ++r)
                    for (std::int64_t o = 0; o < d_out; ++o) {
                        const double d = gy[static_cast<std::size_t>(r * d_out + o)];
                        const double* wr = wt.data() + o * d_in + offset;
                        double* gxr = gx.data() + r * n;
                        for (std::int64_t j = 0; j < n; ++j) gxr[j] += d * wr[j];
                    }
            }
            offset += n;
        }
    });
}

Var activation(Graph& g, Var xv, Activation kind) {
    const Tensor& x = g.value(xv);
    Tensor out(x.shape());
    const bool need_grad = g.requires_grad(xv);
    // local derivative, kept from the forward pass so gelu's erf/exp run once
    auto slope = need_grad ? std::make_shared<std::vector<double>>(x.size()) : nullptr;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i];
        if (kind == Activation::relu) {
            out[i] = v > 0.0 ? v : 0.0;
            if (slope) (*slope)[i] = v > 0.0 ? 1.0 : 0.0;
        } else {
            const double e = std::erf(v / std::numbers::sqrt2);
            out[i] = 0.5 * v * (1.0 + e);
            if (slope) (*slope)[i] = 0.5 * (1.0 + e) + v * std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
        }
    }
    const Var self{g.size()};
    return g.record(std::move(out), {xv}, [=](Graph& gr) {
        const Tensor& gy = gr.grad_buffer(self);
        Tensor& gx = gr.grad_buffer(xv);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * (*slope)[i];
    });
}

Var add(Graph& g, Var av, Var bv) {
    const Tensor& a = g.value(av);
    const Tensor& b = g.value(bv);
    require_same_size(a, b, "add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    const Var self{g.size()};
    return g.record(std::move(out), {av, bv}, [=](Graph& gr) {
        const Tensor& gy = gr.grad_buffer(self);
        for (Var v : {av, bv}) {
            if (!gr.requires_grad(v)) continue;
            Tensor& gx = gr.grad_buffer(v);
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
        }
    });
}

Var mul(Graph& g, Var av, Var bv) {
    const Tensor& a = g.value(av);
    const Tensor& b = g.value(bv);
    require_same_size(a, b, "mul");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    const Var self{g.size()};
    return g.record(std::move(out), {av, bv}, [=](Graph& gr) {
        const Tensor& gy = gr.grad_buffer(self);
        const Tensor& a0 = gr.value(av);
        const Tensor& b0 = gr.value(bv);
        if (gr.requires_grad(av)) {
            Tensor& ga = gr.grad_buffer(av);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * b0[i];
        }
        if (gr.requires_grad(bv)) {
            Tensor& gb = gr.grad_buffer(bv);
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gy[i] * a0[i];
        }
    });
}

Var transpose_last2(Graph& g, Var xv) {
    const Tensor& x = g.value(xv);
    if (x.rank() < 2) throw ConfigError("transpose_last2: rank must be >= 2");
    const std::int64_t rows = x.dim(-2);
    const std::int64_t cols = x.dim(-1);
    const std::int64_t outer = leading_count(x.shape(), x.rank() - 2);
    Shape s = x.shape();
    std::swap(s[s.size() - 1], s[s.size() - 2]);
    Tensor out(s);
    for (std::int64_t o = 0; o < outer; ++o)
        MapMat(out.data() + o * rows * cols, cols, rows) = ConstMapMat(x.data() + o * rows * cols, rows, cols).transpose();
    const Var self{g.size()};
    return g.record(std::move(out), {xv}, [=](Graph& gr) {
        const Tensor& gy = gr.grad_buffer(self);
        Tensor& gx = gr.grad_buffer(xv);
        for (std::int64_t o = 0; o < outer; ++o)
            MapMat(gx.data() + o * rows * cols, rows, cols) +=
                ConstMapMat(gy.data() + o * rows * cols, cols, rows).transpose();
    });
}

Var slice_axis(Graph& g, Var xv, int axis, std::int64_t begin, std::int64_t end) {
    const Tensor& x = g.value(xv);
    const int r = static_cast<int>(x.rank());
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) throw UsageError("slice_axis: bad axis");
    const std::int64_t n = x.shape()[static_cast<std::size_t>(a)];
    if (begin < 0 || end > n || begin >= end)
        throw RangeError("slice_axis: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for extent " + std::to_string(n));
    const std::int64_t outer = leading_count(x.shape(), static_cast<std::size_t>(a));
    std::int64_t inner = 1;
    for (std::size_t i = static_cast<std::size_t>(a) + 1; i < x.rank(); ++i) inner *= x.shape()[i];
    const std::int64_t len = end - begin;
    Shape s = x.shape();
    s[static_cast<std::size_t>(a)] = len;
    Tensor out(s);
    for (std::int64_t o = 0; o < outer; ++o)
        std::copy_n(x.data() + (o * n + begin) * inner, len * inner, out.data() + o * len * inner);
    const Var self{g.size()};
    return g.record(std::move(out), {xv}, [=](Graph& gr) {
        const Tensor& gy = gr.grad_buffer(self);
        Tensor& gx = gr.grad_buffer(xv);
        for (std::int64_t o = 0; o < outer; ++o) {
            const double* src = gy.data() + o * len * inner;
            double* dst = gx.data() + (o * n + begin) * inner;
            for (std::int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
        }
    });
}

Var take_last(Graph& g, Var xv) {
    const Tensor& x = g.value(xv);
    const std::int64_t steps = x.dim(-1);
    const std::int64_t outer = static_cast<std::int64_t>(x.size()) / steps;
    Shape s(x.shape().begin(), x.shape().end() - 1);
    Tensor out(s);
    for (std::int64_t o = 0; o < outer; ++o) out[static_cast<std::size_t>(o)] = x[static_cast<std::size_t>(o * steps + steps - 1)];
    const Var self{g.size()};
    return g.record(std::move(out), {xv}, [=](Graph& gr) {
        const Tensor& gy = gr.grad_buffer(self);
        Tensor& gx = gr.grad_buffer(xv);
        for (std::int64_t o = 0; o < outer; ++o) gx[static_cast<std::size_t>(o * steps + steps - 1)] += gy[static_cast<std::size_t>(o)];
    });
}

Var mask_steps(Graph& g, Var xv, const std::vector<unsigned char>& keep) {
    const Tensor& x = g.value(xv);
    if (x.rank() != 3) throw ConfigError("mask_steps: input must be [B x T x C]");
    const std::int64_t steps = x.dim(0) * x.dim(1);
    const std::int64_t width = x.dim(2);
    if (static_cast<std::int64_t>(keep.size()) != steps) throw ConfigError("mask_steps: mask size mismatch");
    Tensor out = x;
    for (std::int64_t s = 0; s < steps; ++s)
        if (!keep[static_cast<std::size_t>(s)]) std::fill_n(out.data() + s * width, width, 0.0);
    const Var self{g.size()};
    return g.record(std::move(out), {xv}, [=](Graph& gr) {
        const Tensor& gy = gr.grad_buffer(self);
        Tensor& gx = gr.grad_buffer(xv);
        for (std::int64_t s = 0; s < steps; ++s) {
            if (!keep[static_cast<std::size_t>(s)]) continue;
            for (std::int64_t c = 0; c < width; ++c) gx[static_cast<std::size_t>(s * width + c)] += gy[static_cast<std::size_t>(s * width + c)];
        }
    });
}

Var mse_loss(Graph& g, Var pv, const Tensor& target) {
    const Tensor& p = g.value(pv);
    if (p.size() != target.size() || p.size() == 0)
        throw UsageError("mse_loss: prediction " + shape_string(p.shape()) + " and target " +
                         shape_string(target.shape()) + " differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - target[i];
        acc += d * d;
    }
    const double n = static_cast<double>(p.size());
    const Var self{g.size()};
    return g.record(Tensor::scalar(acc / n), {pv}, [=](Graph& gr) {
        const double gy = gr.grad_buffer(self)[0];
        const Tensor& pred = gr.value(pv);
        Tensor& gp = gr.grad_buffer(pv);
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += gy * 2.0 * (pred[i] - target[i]) / n;
    });
}

Var weighted_sum(Graph& g, Var xv, const Tensor& weights) {
    const Tensor& x = g.value(xv);
    if (x.size() != weights.size()) throw UsageError("weighted_sum: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * weights[i];
    const Var self{g.size()};
    return g.record(Tensor::scalar(acc), {xv}, [=](Graph& gr) {
        const double gy = gr.grad_buffer(self)[0];
        Tensor& gx = gr.grad_buffer(xv);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy * weights[i];
    });
}

}  // namespace corast::nn
