#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "corast/nn/graph.hpp"
#include "corast/nn/parameters.hpp"

namespace corast::client {

enum class Variant { no_fm, with_repr };

std::string to_string(Variant v);

struct ClientConfig {
    int id = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> targets;
    std::int64_t seq_len = 128;
    std::int64_t horizon = 1;
    std::int64_t depth = 3;
    std::int64_t kernel = 3;
    std::int64_t hidden = 64;
    std::int64_t repr_dim = 256;
    Variant variant = Variant::no_fm;
    /// Feed the TCN only the trailing receptive field of each window. The
    /// last-step output is the same either way; cropping skips dead work.
    bool crop_to_receptive_field = true;

    std::int64_t output_dim() const { return horizon * static_cast<std::int64_t>(targets.size()); }
    /// 1 + (K - 1) * (2^depth - 1)
    std::int64_t receptive_field() const;
    /// Throws ConfigError on inconsistent fields.
    void validate() const;
};

/// y = f_a(concat(f_l(x), f_g(h))).
///   f_l: causal conv stack F -> hidden (dilations 1, 2, 4, ...), ReLU after each, last step
///   f_g: ReLU(linear d -> hidden)   (with-repr only)
///   f_a: linear over the concatenation -> H_out * |targets|
class ClientModel {
public:
    ClientModel(const ClientConfig& config, std::mt19937_64& rng);

    const ClientConfig& config() const { return config_; }
    nn::ParameterSet& parameters() { return params_; }
    const nn::ParameterSet& parameters() const { return params_; }
    std::size_t parameter_count() const { return params_.count(); }
    /// Parameter counts of f_l, f_g and f_a.
    std::map<std::string, std::size_t> branch_counts() const;

    /// x: [B x L x F]; h: [B x d] (with-repr) or an invalid Var (no-fm).
    /// Returns [B x H_out * |targets|].
    nn::Var forward(nn::Graph& g, nn::Var x, nn::Var h);

    /// Inference without recording gradients. `h` is ignored for no-fm.
    nn::Tensor predict(const nn::Tensor& x, const nn::Tensor* h) const;

private:
    nn::Var run(nn::Graph& g, nn::Var x, nn::Var h, bool trainable) const;

    ClientConfig config_;
    nn::ParameterSet params_;
};

}  // namespace corast::client
