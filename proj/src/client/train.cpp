#include "corast/client/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "corast/errors.hpp"
#include "corast/nn/ops.hpp"

namespace corast::client {

using nn::Graph;
using nn::Tensor;
using nn::Var;

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
    if (patience < 1) throw ConfigError("patience must be >= 1");
}

bool EarlyStopping::observe(double loss) {
    ++evaluations_;
    if (loss < best_) {
        best_ = loss;
        best_index_ = evaluations_;
        since_best_ = 0;
        return true;
    }
    ++since_best_;
    return false;
}

namespace {

// Only the trailing receptive field of a window reaches the TCN output.
std::int64_t steps_needed(const ClientModel& model) {
    const auto& c = model.config();
    return c.crop_to_receptive_field ? std::min(c.seq_len, c.receptive_field()) : c.seq_len;
}

Tensor gather_trailing(const data::WindowBatch& w, const std::vector<std::int64_t>& idx, std::int64_t keep) {
    const std::int64_t len = w.length(), f = w.input_features();
    keep = std::min(keep, len);
    Tensor x({static_cast<std::int64_t>(idx.size()), keep, f});
    for (std::size_t b = 0; b < idx.size(); ++b) {
        const auto in = w.input(idx[b]);
        std::copy(in.end() - keep * f, in.end(), x.data() + static_cast<std::int64_t>(b) * keep * f);
    }
    return x;
}

void check_dataset(const ClientModel& model, const ClientDataset& d, const char* what) {
    const auto& c = model.config();
    if (d.windows == nullptr) throw UsageError(std::string(what) + " set has no windows");
    if (d.windows->input_columns() != c.inputs || d.windows->target_columns() != c.targets)
        throw ConfigError(std::string(what) + " windows do not carry client " + std::to_string(c.id) + "'s columns");
    if (d.windows->length() != c.seq_len || d.windows->horizon() != c.horizon)
        throw ConfigError(std::string(what) + " windows have length/horizon " + std::to_string(d.windows->length()) + "/" +
                          std::to_string(d.windows->horizon()) + ", client expects " + std::to_string(c.seq_len) + "/" +
                          std::to_string(c.horizon));
    if (c.variant == Variant::with_repr) {
        if (d.representations == nullptr)
            throw UsageError(std::string(what) + " set has no representations for with-repr client " + std::to_string(c.id));
        const auto& r = *d.representations;
        if (r.rank() != 2 || r.dim(0) != d.size() || r.dim(1) != c.repr_dim)
            throw UsageError(std::string(what) + " set needs one " + std::to_string(c.repr_dim) +
                             "-vector per window for a with-repr client, got " + nn::shape_string(r.shape()));
    }
}

double validation_mse(const ClientModel& model, const ClientDataset& d) {
    if (d.size() == 0) throw UsageError("validation set is empty");
    return evaluate(model, d).mean;
}

}  // namespace

Tensor gather_inputs(const data::WindowBatch& w, const std::vector<std::int64_t>& idx) {
    return gather_trailing(w, idx, w.length());
}

Tensor gather_targets(const data::WindowBatch& w, const std::vector<std::int64_t>& idx) {
    const std::int64_t n = w.horizon() * w.target_features();
    Tensor y({static_cast<std::int64_t>(idx.size()), n});
    for (std::size_t b = 0; b < idx.size(); ++b) {
        const auto t = w.target(idx[b]);
        std::copy(t.begin(), t.end(), y.data() + static_cast<std::int64_t>(b) * n);
    }
    return y;
}

Tensor gather_rows(const Tensor& m, const std::vector<std::int64_t>& idx) {
    const std::int64_t cols = m.dim(1);
    Tensor out({static_cast<std::int64_t>(idx.size()), cols});
    for (std::size_t b = 0; b < idx.size(); ++b)
        std::copy_n(m.data() + idx[b] * cols, cols, out.data() + static_cast<std::int64_t>(b) * cols);
    return out;
}

TrainResult local_train(ClientModel& model, const ClientDataset& train, const ClientDataset& validation,
                        const TrainOptions& options, std::mt19937_64& rng, nn::Adam* optimizer) {
    if (train.size() == 0) throw UsageError("client " + std::to_string(model.config().id) + ": empty training set");
    check_dataset(model, train, "training");
    check_dataset(model, validation, "validation");
    if (options.batch_size < 1 || options.max_epochs < 1) throw ConfigError("batch size and max epochs must be >= 1");

    const bool repr = model.config().variant == Variant::with_repr;
    const std::int64_t keep = steps_needed(model);
    nn::Adam local;
    nn::Adam& opt = optimizer != nullptr ? *optimizer : local;
    auto& params = model.parameters();
    const nn::LrSchedule schedule{options.lr0, options.eta_min, options.max_epochs};
    EarlyStopping stopper(options.patience);
    std::vector<nn::Tensor> best = params.snapshot();

    std::vector<std::int64_t> order(static_cast<std::size_t>(train.size()));
    std::iota(order.begin(), order.end(), 0);
    TrainResult result;
    for (int epoch = 1; epoch <= options.max_epochs; ++epoch) {
        const double lr = nn::cosine_lr(schedule, epoch - 1);
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::int64_t seen = 0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(options.batch_size)) {
            const std::vector<std::int64_t> idx(order.begin() + static_cast<std::ptrdiff_t>(b0),
                                                order.begin() + static_cast<std::ptrdiff_t>(std::min(
                                                                    order.size(), b0 + static_cast<std::size_t>(options.batch_size))));
            Graph g;
            Var x = g.constant(gather_trailing(*train.windows, idx, keep));
            Var h = repr ? g.constant(gather_rows(*train.representations, idx)) : Var{};
            Var loss = nn::mse_loss(g, model.forward(g, x, h), gather_targets(*train.windows, idx));
            const double value = g.value(loss).item();
            if (!std::isfinite(value)) {
                std::ostringstream os;
                os << "client " << model.config().id << ": non-finite training loss at epoch " << epoch << ", batch "
                   << b0 / static_cast<std::size_t>(options.batch_size) << " (lr=" << lr << ")";
                throw NumericError(os.str());
            }
            params.zero_grad();
            g.backward(loss, &params);
            opt.step(params, lr);
            params.zero_grad();
            loss_sum += value * static_cast<double>(idx.size());
            seen += static_cast<std::int64_t>(idx.size());
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.train_loss = loss_sum / static_cast<double>(seen);
        rec.val_loss = validation_mse(model, validation);
        if (options.validation_override) rec.val_loss = options.validation_override(epoch, rec.val_loss);
        result.epochs.push_back(rec);
        if (options.on_epoch) options.on_epoch(rec);

        if (stopper.observe(rec.val_loss)) best = params.snapshot();
        if (stopper.should_stop()) {
            result.stopped_early = true;
            break;
        }
    }
    params.restore(best);
    result.best_epoch = stopper.best_index();
    return result;
}

Tensor predict_all(const ClientModel& model, const ClientDataset& data) {
    const bool repr = model.config().variant == Variant::with_repr;
    const std::int64_t n = data.size(), out = model.config().output_dim();
    const std::int64_t keep = steps_needed(model);
    Tensor pred({n, out});
    constexpr std::int64_t kBatch = 256;
    for (std::int64_t b0 = 0; b0 < n; b0 += kBatch) {
        std::vector<std::int64_t> idx(static_cast<std::size_t>(std::min(kBatch, n - b0)));
        std::iota(idx.begin(), idx.end(), b0);
        const Tensor x = gather_trailing(*data.windows, idx, keep);
        Tensor h;
        if (repr) h = gather_rows(*data.representations, idx);
        const Tensor y = model.predict(x, repr ? &h : nullptr);
        std::copy(y.values().begin(), y.values().end(), pred.data() + b0 * out);
    }
    return pred;
}

Evaluation evaluate(const ClientModel& model, const ClientDataset& data, const data::Normalization* denormalize) {
    check_dataset(model, data, "evaluation");
    const auto& c = model.config();
    const std::int64_t n = data.size();
    if (n == 0) throw UsageError("evaluation set is empty");
    const Tensor pred = predict_all(model, data);
    const auto ft = static_cast<std::int64_t>(c.targets.size());

    std::vector<std::size_t> stat_cols;
    if (denormalize != nullptr)
        for (const auto& t : c.targets) {
            const auto it = std::find(denormalize->columns.begin(), denormalize->columns.end(), t);
            if (it == denormalize->columns.end()) throw DataError("no normalization statistics for target '" + t + "'");
            stat_cols.push_back(static_cast<std::size_t>(it - denormalize->columns.begin()));
        }

    std::vector<double> sums(static_cast<std::size_t>(ft), 0.0);
    double total = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const auto target = data.windows->target(i);
        for (std::int64_t hh = 0; hh < c.horizon; ++hh)
            for (std::int64_t j = 0; j < ft; ++j) {
                const std::int64_t k = hh * ft + j;
                double p = pred.at(i, k), y = target[static_cast<std::size_t>(k)];
                if (denormalize != nullptr) {
                    p = denormalize->invert(stat_cols[static_cast<std::size_t>(j)], p);
                    y = denormalize->invert(stat_cols[static_cast<std::size_t>(j)], y);
                }
                const double d2 = (p - y) * (p - y);
                sums[static_cast<std::size_t>(j)] += d2;
                total += d2;
            }
    }
    Evaluation e;
    for (std::int64_t j = 0; j < ft; ++j)
        e.per_variable[c.targets[static_cast<std::size_t>(j)]] = sums[static_cast<std::size_t>(j)] / static_cast<double>(n * c.horizon);
    e.mean = total / static_cast<double>(n * c.horizon * ft);
    return e;
}

}  // namespace corast::client
