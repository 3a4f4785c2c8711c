#include "corast/server/encoder.hpp"

#include <algorithm>
#include <string>

#include "corast/errors.hpp"

namespace corast::server {

using nn::Graph;
using nn::Tensor;
using nn::Var;

void EncoderConfig::validate() const {
    if (input_features < 1) throw ConfigError("encoder needs at least one input feature");
    if (hidden < 1) throw ConfigError("encoder hidden width must be >= 1");
    if (blocks < 1) throw ConfigError("encoder needs at least one residual block");
    if (repr_dim < 1) throw ConfigError("representation dimension must be >= 1");
    if (kernel < 1) throw ConfigError("encoder kernel size must be >= 1");
    if (mask_prob < 0.0 || mask_prob >= 1.0) throw ConfigError("mask probability must be in [0, 1)");
    if (train_window < 2) throw ConfigError("encoder training window must be >= 2");
    if (crop_min < 1) throw ConfigError("crop_min must be >= 1");
    if (lr0 <= 0.0) throw ConfigError("encoder learning rate must be positive");
    if (batch_size < 1) throw ConfigError("encoder batch size must be >= 1");
    if (iterations < 0) throw ConfigError("encoder iterations must be >= 0");
}

namespace {

std::string conv_name(std::int64_t block, int which, const char* part) {
    return "block" + std::to_string(block) + ".conv" + std::to_string(which) + "." + part;
}

}  // namespace

Encoder::Encoder(const EncoderConfig& config, std::mt19937_64& rng) : config_(config) {
    config_.validate();
    const auto f = config_.input_features, h = config_.hidden, k = config_.kernel, d = config_.repr_dim;
    params_.add("input.weight", nn::fan_in_uniform({h, f}, f, rng));
    params_.add("input.bias", nn::fan_in_uniform({h}, f, rng));
    for (std::int64_t b = 0; b < config_.blocks; ++b) {
        for (int c = 1; c <= 2; ++c) {
            params_.add(conv_name(b, c, "weight"), nn::fan_in_uniform({h, h, k}, h * k, rng));
            params_.add(conv_name(b, c, "bias"), nn::fan_in_uniform({h}, h * k, rng));
        }
    }
    params_.add("output.weight", nn::fan_in_uniform({d, h}, h, rng));
    params_.add("output.bias", nn::fan_in_uniform({d}, h, rng));
}

std::int64_t Encoder::receptive_field() const {
    std::int64_t reach = 0;
    for (std::int64_t b = 0; b < config_.blocks; ++b) reach += 2 * (config_.kernel - 1) * (std::int64_t{1} << b);
    return reach + 1;
}

Var Encoder::run(Graph& g, Var x, const std::vector<unsigned char>* keep, bool trainable) const {
    const Tensor& xv = g.value(x);
    if (xv.rank() != 3 || xv.dim(2) != config_.input_features)
        throw ConfigError("encoder expects [B x T x " + std::to_string(config_.input_features) + "] input, got " +
                          nn::shape_string(xv.shape()));
    auto& params = const_cast<nn::ParameterSet&>(params_);
    auto p = [&](const std::string& name) {
        return trainable ? g.parameter(params, name) : g.constant(params_.get(name).value);
    };

    Var h = nn::linear(g, x, p("input.weight"), p("input.bias"));
    if (keep != nullptr) h = nn::mask_steps(g, h, *keep);
    h = nn::transpose_last2(g, h);  // [B x hidden x T]
    for (std::int64_t b = 0; b < config_.blocks; ++b) {
        const std::int64_t dil = std::int64_t{1} << b;
        Var y = nn::gelu(g, h);
        y = nn::conv1d(g, y, p(conv_name(b, 1, "weight")), p(conv_name(b, 1, "bias")), dil, config_.padding);
        y = nn::gelu(g, y);
        y = nn::conv1d(g, y, p(conv_name(b, 2, "weight")), p(conv_name(b, 2, "bias")), dil, config_.padding);
        h = nn::add(g, h, y);
    }
    h = nn::transpose_last2(g, h);
    return nn::linear(g, h, p("output.weight"), p("output.bias"));
}

Var Encoder::forward(Graph& g, Var x, const std::vector<unsigned char>* keep) { return run(g, x, keep, true); }

Tensor Encoder::encode_batch(const Tensor& x) const {
    Graph g;
    return g.value(run(g, g.constant(x), nullptr, false));
}

std::vector<double> Encoder::encode(std::span<const double> series, std::int64_t steps) const {
    const auto f = config_.input_features, d = config_.repr_dim;
    if (steps < 1) throw ConfigError("encode needs at least one time step");
    if (static_cast<std::int64_t>(series.size()) != steps * f)
        throw ConfigError("encode: series has " + std::to_string(series.size()) + " values, expected " +
                          std::to_string(steps) + " x " + std::to_string(f));

    // Outputs depend on at most `reach` steps on each side the convolutions pad.
    const std::int64_t reach = receptive_field() - 1;
    const std::int64_t left = reach;
    const std::int64_t right = config_.padding == nn::Padding::causal ? 0 : reach;
    constexpr std::int64_t kChunk = 2048;

    std::vector<double> out(static_cast<std::size_t>(d * steps));
    for (std::int64_t c0 = 0; c0 < steps; c0 += kChunk) {
        const std::int64_t c1 = std::min(steps, c0 + kChunk);
        const std::int64_t s0 = std::max<std::int64_t>(0, c0 - left);
        const std::int64_t s1 = std::min(steps, c1 + right);
        const std::int64_t len = s1 - s0;
        Tensor x({1, len, f}, std::vector<double>(series.begin() + s0 * f, series.begin() + s1 * f));
        const Tensor z = encode_batch(x);
        for (std::int64_t t = c0; t < c1; ++t)
            for (std::int64_t j = 0; j < d; ++j)
                out[static_cast<std::size_t>(j * steps + t)] = z[static_cast<std::size_t>((t - s0) * d + j)];
    }
    return out;
}

}  // namespace corast::server
