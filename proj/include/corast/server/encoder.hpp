#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "corast/nn/graph.hpp"
#include "corast/nn/ops.hpp"
#include "corast/nn/parameters.hpp"

namespace corast::server {

struct EncoderConfig {
    std::int64_t input_features = 1;
    std::int64_t hidden = 64;
    std::int64_t blocks = 3;
    std::int64_t repr_dim = 256;
    std::int64_t kernel = 3;
    nn::Padding padding = nn::Padding::causal;

    // pre-training
    double mask_prob = 0.5;
    std::int64_t train_window = 128;  ///< length of the windows crops are drawn from
    std::int64_t crop_min = 16;       ///< lower bound on the shared crop length
    double lr0 = 1e-3;
    std::int64_t batch_size = 8;
    std::int64_t iterations = 600;

    /// Throws ConfigError on out-of-range fields.
    void validate() const;
};

/// Input projection -> residual dilated conv blocks -> projection to the
/// representation width. Block i is x + conv(gelu(conv(gelu(x)))) with both
/// convolutions at dilation 2^i.
class Encoder {
public:
    Encoder(const EncoderConfig& config, std::mt19937_64& rng);

    const EncoderConfig& config() const { return config_; }
    nn::ParameterSet& parameters() { return params_; }
    const nn::ParameterSet& parameters() const { return params_; }
    std::size_t parameter_count() const { return params_.count(); }

    /// Number of past steps (including the current one) an output can see in
    /// causal mode: 1 + 2 * (K - 1) * sum(2^i).
    std::int64_t receptive_field() const;

    /// x: [B x T x F] -> [B x T x d]. When `keep` is given (size B*T) the
    /// latent after the input projection is zeroed at masked steps.
    nn::Var forward(nn::Graph& g, nn::Var x, const std::vector<unsigned char>* keep = nullptr);

    /// Inference on one series laid out [T x F] row-major. Returns [d x T]
    /// row-major. Long series are processed in chunks with enough context that
    /// results match a single pass.
    std::vector<double> encode(std::span<const double> series, std::int64_t steps) const;

    /// Inference on a batch of windows [B x T x F]; returns [B x T x d].
    nn::Tensor encode_batch(const nn::Tensor& x) const;

private:
    nn::Var run(nn::Graph& g, nn::Var x, const std::vector<unsigned char>* keep, bool trainable) const;

    EncoderConfig config_;
    nn::ParameterSet params_;
};

}  // namespace corast::server
