#include "corast/client/model.hpp"

#include "corast/errors.hpp"
#include "corast/nn/ops.hpp"

namespace corast::client {

using nn::Graph;
using nn::Tensor;
using nn::Var;

std::string to_string(Variant v) { return v == Variant::no_fm ? "no-fm" : "with-repr"; }

std::int64_t ClientConfig::receptive_field() const { return 1 + (kernel - 1) * ((std::int64_t{1} << depth) - 1); }

void ClientConfig::validate() const {
    if (inputs.empty()) throw ConfigError("client " + std::to_string(id) + " has no input features");
    if (targets.empty()) throw ConfigError("client " + std::to_string(id) + " has no target features");
    if (depth < 1 || kernel < 1 || hidden < 1) throw ConfigError("client TCN depth, kernel and width must be >= 1");
    if (horizon < 1) throw ConfigError("forecast horizon must be >= 1");
    if (variant == Variant::with_repr && repr_dim < 1) throw ConfigError("representation dimension must be >= 1");
    if (seq_len < receptive_field())
        throw ConfigError("sequence length " + std::to_string(seq_len) + " is shorter than the TCN receptive field " +
                          std::to_string(receptive_field()));
}

namespace {
std::string conv(std::int64_t layer, const char* part) { return "fl.conv" + std::to_string(layer) + "." + part; }
}  // namespace

ClientModel::ClientModel(const ClientConfig& config, std::mt19937_64& rng) : config_(config) {
    config_.validate();
    const auto f = static_cast<std::int64_t>(config_.inputs.size()), h = config_.hidden, k = config_.kernel;
    for (std::int64_t l = 0; l < config_.depth; ++l) {
        const std::int64_t c_in = l == 0 ? f : h;
        params_.add(conv(l, "weight"), nn::fan_in_uniform({h, c_in, k}, c_in * k, rng));
        params_.add(conv(l, "bias"), nn::fan_in_uniform({h}, c_in * k, rng));
    }
    const bool repr = config_.variant == Variant::with_repr;
    const std::int64_t fused = repr ? 2 * h : h;
    params_.add("fa.weight", nn::fan_in_uniform({config_.output_dim(), fused}, fused, rng));
    params_.add("fa.bias", nn::fan_in_uniform({config_.output_dim()}, fused, rng));
    if (repr) {
        params_.add("fg.weight", nn::fan_in_uniform({h, config_.repr_dim}, config_.repr_dim, rng));
        params_.add("fg.bias", nn::fan_in_uniform({h}, config_.repr_dim, rng));
    }
}

std::map<std::string, std::size_t> ClientModel::branch_counts() const {
    std::map<std::string, std::size_t> out{{"f_l", 0}, {"f_g", 0}, {"f_a", 0}};
    for (const auto& p : params_.items()) {
        const std::string branch = "f_" + p.name.substr(1, 1);
        out[branch] += p.value.size();
    }
    return out;
}

Var ClientModel::run(Graph& g, Var x, Var h, bool trainable) const {
    const bool repr = config_.variant == Variant::with_repr;
    const Tensor& xv = g.value(x);
    const auto f = static_cast<std::int64_t>(config_.inputs.size());
    if (xv.rank() != 3 || xv.dim(2) != f)
        throw ConfigError("client " + std::to_string(config_.id) + " expects [B x L x " + std::to_string(f) +
                          "] input, got " + nn::shape_string(xv.shape()));
    if (repr && !h.valid()) throw UsageError("client " + std::to_string(config_.id) + " needs a representation input");
    if (repr) {
        const Tensor& hv = g.value(h);
        if (hv.rank() != 2 || hv.dim(0) != xv.dim(0) || hv.dim(1) != config_.repr_dim)
            throw ConfigError("client representation input must be [B x " + std::to_string(config_.repr_dim) +
                              "], got " + nn::shape_string(hv.shape()));
    }
    auto& params = const_cast<nn::ParameterSet&>(params_);
    auto p = [&](const std::string& name) {
        return trainable ? g.parameter(params, name) : g.constant(params_.get(name).value);
    };

    const std::int64_t steps = xv.dim(1);
    const std::int64_t rf = config_.receptive_field();
    if (config_.crop_to_receptive_field && steps > rf) x = nn::slice_axis(g, x, 1, steps - rf, steps);
    Var a = nn::transpose_last2(g, x);  // [B x F x T]
    for (std::int64_t l = 0; l < config_.depth; ++l)
        a = nn::relu(g, nn::conv1d(g, a, p(conv(l, "weight")), p(conv(l, "bias")), std::int64_t{1} << l));
    Var local = nn::take_last(g, a);  // [B x hidden]

    std::vector<Var> parts{local};
    if (repr) parts.push_back(nn::relu(g, nn::linear(g, h, p("fg.weight"), p("fg.bias"))));
    return nn::concat_linear(g, parts, p("fa.weight"), p("fa.bias"));
}

Var ClientModel::forward(Graph& g, Var x, Var h) { return run(g, x, h, true); }

Tensor ClientModel::predict(const Tensor& x, const Tensor* h) const {
    Graph g;
    Var hv;
    if (config_.variant == Variant::with_repr && h != nullptr) hv = g.constant(*h);
    return g.value(run(g, g.constant(x), hv, false));
}

}  // namespace corast::client
