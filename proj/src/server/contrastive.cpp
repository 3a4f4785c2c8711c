#include "corast/server/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "corast/errors.hpp"

namespace corast::server {

using nn::Graph;
using nn::Shape;
using nn::Tensor;
using nn::Var;

CropPair random_crop_pair(std::int64_t length, std::mt19937_64& rng, std::int64_t min_overlap) {
    if (length < 2) throw ConfigError("crop pairs need a window of at least 2 steps");
    auto uniform = [&](std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng); };
    const std::int64_t crop = uniform(std::clamp<std::int64_t>(min_overlap, 1, length), length);
    const std::int64_t left = uniform(0, length - crop);
    const std::int64_t right = left + crop;
    CropPair c;
    c.a1 = uniform(0, left);
    c.a2 = left;
    c.b1 = right;
    c.b2 = uniform(right, length);
    return c;
}

namespace {

// One level of the pyramid: both views [N x O x d] plus, for levels above the
// first, the index in the previous level each pooled entry was taken from.
struct Level {
    std::int64_t steps = 0;
    nn::AlignedVector z1, z2;
    std::vector<std::int64_t> from1, from2;  // flat index into the previous level
};

struct LossTape {
    double value = 0.0;
    nn::AlignedVector g1, g2;  // d loss / d z for a unit upstream gradient
};

void pool(const Level& prev, Level& next, std::int64_t n, std::int64_t d) {
    next.steps = prev.steps / 2;
    const auto sz = static_cast<std::size_t>(n * next.steps * d);
    next.z1.resize(sz);
    next.z2.resize(sz);
    next.from1.resize(sz);
    next.from2.resize(sz);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t t = 0; t < next.steps; ++t)
            for (std::int64_t k = 0; k < d; ++k) {
                const auto dst = static_cast<std::size_t>((i * next.steps + t) * d + k);
                const auto s0 = static_cast<std::size_t>((i * prev.steps + 2 * t) * d + k);
                const auto s1 = s0 + static_cast<std::size_t>(d);
                // ties keep the earlier step
                const bool p1 = prev.z1[s1] > prev.z1[s0];
                const bool p2 = prev.z2[s1] > prev.z2[s0];
                next.z1[dst] = p1 ? prev.z1[s1] : prev.z1[s0];
                next.from1[dst] = static_cast<std::int64_t>(p1 ? s1 : s0);
                next.z2[dst] = p2 ? prev.z2[s1] : prev.z2[s0];
                next.from2[dst] = static_cast<std::int64_t>(p2 ? s1 : s0);
            }
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Rows = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using MutRows = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;

// Both directions of one InfoNCE block: row r of `a` is scored against all
// rows of `b` with row r the positive, and vice versa. Returns the summed
// per-anchor losses; adds w * gradient into ga/gb when they are given.
double paired_term(const Rows& a, const Rows& b, double w, MutRows* ga, MutRows* gb) {
    const RowMat s = a * b.transpose();  // s(r, c) = a_r . b_c
    double loss = 0.0;
    for (int dir = 0; dir < 2; ++dir) {
        // dir 0: anchors a, logits rows of s; dir 1: anchors b, logits rows of s^T
        RowMat p = dir == 0 ? s : RowMat(s.transpose());
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
            const double mx = p.row(r).maxCoeff();
            const double lse = mx + std::log((p.row(r).array() - mx).exp().sum());
            loss += lse - p(r, r);
            if (ga != nullptr) {
                p.row(r) = (p.row(r).array() - lse).exp();
                p(r, r) -= 1.0;
            }
        }
        if (ga == nullptr) continue;
        p *= w;
        if (dir == 0) {
            ga->noalias() += p * b;
            gb->noalias() += p.transpose() * a;
        } else {
            gb->noalias() += p * a;
            ga->noalias() += p.transpose() * b;
        }
    }
    return loss;
}

// Loss of one level; accumulates scale-weighted gradients into g1/g2 when non-null.
double level_loss(const Level& lv, std::int64_t n, std::int64_t d, double scale, double* g1, double* g2) {
    const std::int64_t o = lv.steps;
    const double norm = 2.0 * static_cast<double>(n * o);
    const double w = scale / norm;
    double total = 0.0;

    if (n >= 2) {  // instance term: the N rows at one timestamp, stride O*d apart
        double term = 0.0;
        const Eigen::OuterStride<> stride(o * d);
        for (std::int64_t t = 0; t < o; ++t) {
            const Rows a(lv.z1.data() + t * d, n, d, stride), b(lv.z2.data() + t * d, n, d, stride);
            if (g1 == nullptr) {
                term += paired_term(a, b, w, nullptr, nullptr);
            } else {
                MutRows ga(g1 + t * d, n, d, stride), gb(g2 + t * d, n, d, stride);
                term += paired_term(a, b, w, &ga, &gb);
            }
        }
        total += term / norm;
    }
    if (o >= 2) {  // temporal term: the O rows of one instance
        double term = 0.0;
        const Eigen::OuterStride<> stride(d);
        for (std::int64_t i = 0; i < n; ++i) {
            const Rows a(lv.z1.data() + i * o * d, o, d, stride), b(lv.z2.data() + i * o * d, o, d, stride);
            if (g1 == nullptr) {
                term += paired_term(a, b, w, nullptr, nullptr);
            } else {
                MutRows ga(g1 + i * o * d, o, d, stride), gb(g2 + i * o * d, o, d, stride);
                term += paired_term(a, b, w, &ga, &gb);
            }
        }
        total += term / norm;
    }
    return total;
}

// Loss value and, when requested, its gradient for a unit upstream gradient.
LossTape forward_loss(const Tensor& z1, const Tensor& z2, bool with_grad) {
    if (z1.rank() != 3 || z1.shape() != z2.shape())
        throw ConfigError("contrastive loss needs two [N x O x d] tensors of equal shape, got " +
                          nn::shape_string(z1.shape()) + " and " + nn::shape_string(z2.shape()));
    LossTape tape;
    const std::int64_t n = z1.dim(0), d = z1.dim(2), o = z1.dim(1);
    if (n < 2 && o < 2) throw UsageError("contrastive loss undefined for a single instance and a single timestamp");

    std::vector<Level> levels(1);
    levels[0].steps = o;
    levels[0].z1 = z1.storage();
    levels[0].z2 = z2.storage();
    while (levels.back().steps > 1) {
        Level next;
        pool(levels.back(), next, n, d);
        levels.push_back(std::move(next));
    }

    std::int64_t counted = 0;
    for (const auto& lv : levels) counted += (n >= 2 || lv.steps >= 2) ? 1 : 0;
    const double scale = 1.0 / static_cast<double>(counted);

    // Top-down so each level's gradient can be routed through its pooling
    // argmax into the level below before that level adds its own terms.
    double sum = 0.0;
    nn::AlignedVector g1, g2;
    for (std::size_t l = levels.size(); l-- > 0;) {
        const Level& lv = levels[l];
        const auto sz = static_cast<std::size_t>(n * lv.steps * d);
        if (with_grad && g1.empty()) {
            g1.assign(sz, 0.0);
            g2.assign(sz, 0.0);
        }
        if (n >= 2 || lv.steps >= 2)
            sum += level_loss(lv, n, d, scale, with_grad ? g1.data() : nullptr, with_grad ? g2.data() : nullptr);
        if (!with_grad || l == 0) continue;
        nn::AlignedVector down1(static_cast<std::size_t>(n * levels[l - 1].steps * d), 0.0), down2(down1.size(), 0.0);
        for (std::size_t i = 0; i < sz; ++i) {
            down1[static_cast<std::size_t>(lv.from1[i])] += g1[i];
            down2[static_cast<std::size_t>(lv.from2[i])] += g2[i];
        }
        g1 = std::move(down1);
        g2 = std::move(down2);
    }
    tape.value = sum * scale;
    tape.g1 = std::move(g1);
    tape.g2 = std::move(g2);
    return tape;
}

}  // namespace

double hierarchical_contrastive_loss(const Tensor& z1, const Tensor& z2) { return forward_loss(z1, z2, false).value; }

Var hierarchical_contrastive_loss(Graph& g, Var z1v, Var z2v) {
    const bool need_grad = g.requires_grad(z1v) || g.requires_grad(z2v);
    auto tape = std::make_shared<LossTape>(forward_loss(g.value(z1v), g.value(z2v), need_grad));
    const Var self{g.size()};
    return g.record(Tensor::scalar(tape->value), {z1v, z2v}, [tape, z1v, z2v, self](Graph& gr) {
        const double up = gr.grad_buffer(self)[0];
        Tensor& gz1 = gr.grad_buffer(z1v);
        Tensor& gz2 = gr.grad_buffer(z2v);
        for (std::size_t i = 0; i < tape->g1.size(); ++i) {
            gz1[i] += up * tape->g1[i];
            gz2[i] += up * tape->g2[i];
        }
    });
}

}  // namespace corast::server
