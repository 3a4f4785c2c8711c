#include "corast/server/fm_server.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "corast/errors.hpp"
#include "corast/nn/checkpoint.hpp"
#include "corast/server/contrastive.hpp"

namespace corast::server {

using nn::Graph;
using nn::Tensor;
using nn::Var;

std::vector<double> ReprMatrix::column_at(std::int64_t row) const {
    if (row < time_begin || row >= time_end())
        throw RangeError("row " + std::to_string(row) + " outside representation range [" + std::to_string(time_begin) +
                         ", " + std::to_string(time_end()) + ")");
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (std::int64_t j = 0; j < dim; ++j) v[static_cast<std::size_t>(j)] = at(j, row - time_begin);
    return v;
}

static_assert(std::endian::native == std::endian::little, "wire formats assume a little-endian host");

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
    std::uint8_t b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out.insert(out.end(), b, b + sizeof(T));
}

template <typename T>
T get(const std::vector<std::uint8_t>& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw DecodeError("representation payload truncated at byte " + std::to_string(pos));
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

std::vector<std::uint8_t> serialize(const ReprMatrix& m) {
    std::vector<std::uint8_t> out;
    out.reserve(32 + m.values.size() * 8);
    put<std::uint64_t>(out, m.version);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.steps));
    put<std::int64_t>(out, m.time_begin);
    put<std::int64_t>(out, m.time_end());
    for (double v : m.values) put<double>(out, v);
    return out;
}

ReprMatrix deserialize_repr(const std::vector<std::uint8_t>& bytes) {
    std::size_t pos = 0;
    ReprMatrix m;
    m.version = get<std::uint64_t>(bytes, pos);
    m.dim = get<std::uint32_t>(bytes, pos);
    m.steps = get<std::uint32_t>(bytes, pos);
    m.time_begin = get<std::int64_t>(bytes, pos);
    const auto end = get<std::int64_t>(bytes, pos);
    if (end != m.time_begin + m.steps) throw DecodeError("representation time range disagrees with its length");
    const auto n = static_cast<std::size_t>(m.dim * m.steps);
    if (bytes.size() - pos != n * 8)
        throw DecodeError("representation payload has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                          std::to_string(n * 8));
    m.values.resize(n);
    for (auto& v : m.values) v = get<double>(bytes, pos);
    return m;
}

PretrainResult pretrain(Encoder& encoder, std::span<const double> series, std::int64_t steps,
                        const PretrainOptions& options, std::mt19937_64& rng, nn::Adam* optimizer) {
    const auto& cfg = encoder.config();
    const std::int64_t f = cfg.input_features;
    if (static_cast<std::int64_t>(series.size()) != steps * f)
        throw ConfigError("pretrain: series size does not match " + std::to_string(steps) + " x " + std::to_string(f));
    if (steps < 2) throw DataError("pretrain needs at least 2 rows of server data");

    nn::Adam local;
    nn::Adam& opt = optimizer != nullptr ? *optimizer : local;
    const nn::LrSchedule schedule{options.lr0, 0.0, std::max<std::int64_t>(1, options.iterations)};
    const std::int64_t window = std::min(cfg.train_window, steps);
    const std::int64_t batch = cfg.batch_size;
    auto& params = encoder.parameters();
    std::bernoulli_distribution keep_dist(1.0 - cfg.mask_prob);
    std::uniform_int_distribution<std::int64_t> start_dist(0, steps - window);

    PretrainResult result;
    result.losses.reserve(static_cast<std::size_t>(options.iterations));
    double last_grad_norm = 0.0;
    for (std::int64_t it = 0; it < options.iterations; ++it) {
        const double lr = nn::cosine_lr(schedule, it);
        std::vector<std::int64_t> starts(static_cast<std::size_t>(batch));
        for (auto& s : starts) s = start_dist(rng);
        const CropPair crop = random_crop_pair(window, rng, cfg.crop_min);

        auto gather = [&](std::int64_t a, std::int64_t b) {
            Tensor x({batch, b - a, f});
            for (std::int64_t i = 0; i < batch; ++i)
                std::copy_n(series.begin() + (starts[static_cast<std::size_t>(i)] + a) * f, (b - a) * f,
                            x.data() + i * (b - a) * f);
            return x;
        };
        auto mask = [&](std::int64_t len) {
            std::vector<unsigned char> keep(static_cast<std::size_t>(batch * len));
            for (auto& k : keep) k = keep_dist(rng) ? 1 : 0;
            return keep;
        };

        Graph g;
        const auto keep1 = mask(crop.b1 - crop.a1);
        const auto keep2 = mask(crop.b2 - crop.a2);
        Var out1 = encoder.forward(g, g.constant(gather(crop.a1, crop.b1)), cfg.mask_prob > 0 ? &keep1 : nullptr);
        Var out2 = encoder.forward(g, g.constant(gather(crop.a2, crop.b2)), cfg.mask_prob > 0 ? &keep2 : nullptr);
        Var z1 = nn::slice_axis(g, out1, 1, crop.a2 - crop.a1, crop.b1 - crop.a1);
        Var z2 = nn::slice_axis(g, out2, 1, 0, crop.overlap());
        Var loss = hierarchical_contrastive_loss(g, z1, z2);
        const double value = g.value(loss).item();

        auto diagnostic = [&](const std::string& what) {
            std::ostringstream os;
            os << what << " at iteration " << it << " (lr=" << lr << ", previous gradient norm=" << last_grad_norm
               << ", overlap=" << crop.overlap() << ")";
            return os.str();
        };
        if (!std::isfinite(value)) throw NumericError(diagnostic("non-finite contrastive loss"));
        params.zero_grad();
        try {
            g.backward(loss, &params);
        } catch (const NumericError& e) {
            throw NumericError(diagnostic(e.what()));
        }
        last_grad_norm = params.grad_norm();
        if (!std::isfinite(last_grad_norm)) throw NumericError(diagnostic("non-finite gradient norm"));
        opt.step(params, lr);
        params.zero_grad();

        result.losses.push_back(value);
        if (options.on_iteration) options.on_iteration(it, value);
    }
    return result;
}

FmServer::FmServer(EncoderConfig config, std::vector<std::string> columns, std::uint64_t seed,
                   std::int64_t inference_window)
    : config_([&] {
          config.input_features = static_cast<std::int64_t>(columns.size());
          return config;
      }()),
      columns_(std::move(columns)),
      rng_(seed),
      encoder_(config_, rng_),
      inference_window_(inference_window) {
    if (columns_.empty()) throw ConfigError("server needs at least one data column");
    if (inference_window_ < 1) throw ConfigError("inference window must be >= 1");
}

std::vector<double> FmServer::server_rows(const data::TimeSeriesTable& table, data::IndexRange range) const {
    if (range.begin < 0 || range.end > static_cast<std::int64_t>(table.rows()) || range.size() < 1)
        throw RangeError("requested rows [" + std::to_string(range.begin) + ", " + std::to_string(range.end) +
                         ") outside available data of " + std::to_string(table.rows()) + " rows");
    std::vector<std::size_t> idx;
    for (const auto& c : columns_) idx.push_back(table.column_index(c));
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(range.size()) * idx.size());
    for (auto r = range.begin; r < range.end; ++r)
        for (auto c : idx) out.push_back(table.at(static_cast<std::size_t>(r), c));
    return out;
}

PretrainResult FmServer::train(const data::TimeSeriesTable& table, data::IndexRange horizon, std::int64_t iterations,
                               std::function<void(std::int64_t, double)> on_iteration) {
    const auto rows = server_rows(table, horizon);
    PretrainOptions opts;
    opts.iterations = iterations;
    opts.lr0 = config_.lr0;
    opts.on_iteration = std::move(on_iteration);
    auto result = pretrain(encoder_, rows, horizon.size(), opts, rng_, &optimizer_);
    ++version_;
    return result;
}

ReprMatrix FmServer::emit_training_matrix(const data::TimeSeriesTable& table, data::IndexRange range) const {
    const auto rows = server_rows(table, range);
    ReprMatrix m;
    m.version = version_;
    m.dim = config_.repr_dim;
    m.steps = range.size();
    m.time_begin = range.begin;
    m.values = encoder_.encode(rows, range.size());
    return m;
}

ReprMatrix FmServer::emit_inference_point(const data::TimeSeriesTable& table, std::int64_t t) const {
    const data::IndexRange window{std::max<std::int64_t>(0, t - inference_window_ + 1), t + 1};
    const auto rows = server_rows(table, window);
    const auto full = encoder_.encode(rows, window.size());
    ReprMatrix m;
    m.version = version_;
    m.dim = config_.repr_dim;
    m.steps = 1;
    m.time_begin = t;
    m.values.resize(static_cast<std::size_t>(m.dim));
    for (std::int64_t j = 0; j < m.dim; ++j)
        m.values[static_cast<std::size_t>(j)] = full[static_cast<std::size_t>(j * window.size() + window.size() - 1)];
    return m;
}

std::vector<ReprMatrix> FmServer::emit_inference_points(const data::TimeSeriesTable& table,
                                                        const std::vector<std::int64_t>& times) const {
    std::vector<ReprMatrix> out;
    if (times.empty()) return out;
    const bool shared_prefix =
        config_.padding == nn::Padding::causal && inference_window_ >= encoder_.receptive_field();
    if (!shared_prefix) {
        for (auto t : times) out.push_back(emit_inference_point(table, t));
        return out;
    }
    // A causal output never looks further back than the receptive field, so the
    // last column of each window equals the column of one pass over all rows
    // from the earliest window start to the latest time.
    const auto [lo, hi] = std::minmax_element(times.begin(), times.end());
    const data::IndexRange span{std::max<std::int64_t>(0, *lo - inference_window_ + 1), *hi + 1};
    const auto rows = server_rows(table, span);
    const auto full = encoder_.encode(rows, span.size());
    out.reserve(times.size());
    for (auto t : times) {
        ReprMatrix m;
        m.version = version_;
        m.dim = config_.repr_dim;
        m.steps = 1;
        m.time_begin = t;
        m.values.resize(static_cast<std::size_t>(m.dim));
        for (std::int64_t j = 0; j < m.dim; ++j)
            m.values[static_cast<std::size_t>(j)] = full[static_cast<std::size_t>(j * span.size() + t - span.begin)];
        out.push_back(std::move(m));
    }
    return out;
}

std::map<std::string, std::string> FmServer::checkpoint_meta() const {
    std::string cols;
    for (const auto& c : columns_) cols += (cols.empty() ? "" : ",") + c;
    return {{"kind", "encoder"},
            {"version", std::to_string(version_)},
            {"columns", cols},
            {"input_features", std::to_string(config_.input_features)},
            {"hidden", std::to_string(config_.hidden)},
            {"blocks", std::to_string(config_.blocks)},
            {"repr_dim", std::to_string(config_.repr_dim)},
            {"kernel", std::to_string(config_.kernel)},
            {"padding", config_.padding == nn::Padding::causal ? "causal" : "centered"},
            {"inference_window", std::to_string(inference_window_)}};
}

void FmServer::save(const std::string& path) const { nn::save_checkpoint(path, encoder_.parameters(), checkpoint_meta()); }

void FmServer::load(const std::string& path) {
    const auto ckpt = nn::load_checkpoint(path);
    const auto mine = checkpoint_meta();
    for (const auto& [k, v] : mine) {
        if (k == "version") continue;
        auto it = ckpt.meta.find(k);
        if (it == ckpt.meta.end() || it->second != v)
            throw ConfigError("encoder checkpoint '" + path + "' has " + k + "=" +
                              (it == ckpt.meta.end() ? std::string("<missing>") : it->second) + ", expected " + v);
    }
    nn::apply_checkpoint(ckpt, encoder_.parameters());
    version_ = std::stoull(ckpt.meta.at("version"));
}

}  // namespace corast::server
