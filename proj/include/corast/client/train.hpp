#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "corast/client/model.hpp"
#include "corast/data/pipeline.hpp"
#include "corast/nn/optim.hpp"

namespace corast::client {

/// Windows of one split plus, for with-repr clients, one d-vector per window
/// (the server representation at the window's last input step).
struct ClientDataset {
    const data::WindowBatch* windows = nullptr;
    const nn::Tensor* representations = nullptr;  ///< [N x d]; null for no-fm

    std::int64_t size() const { return windows == nullptr ? 0 : windows->count(); }
};

/// Patience bookkeeping. An evaluation improves only when strictly below the
/// best so far; training stops once `patience` evaluations in a row did not.
class EarlyStopping {
public:
    explicit EarlyStopping(int patience = 3);

    /// Records one evaluation; returns true when it is a new best.
    bool observe(double loss);
    bool should_stop() const { return since_best_ >= patience_; }

    int patience() const { return patience_; }
    int evaluations() const { return evaluations_; }
    int since_best() const { return since_best_; }
    /// 1-based index of the best evaluation, 0 before the first.
    int best_index() const { return best_index_; }
    double best() const { return best_; }

private:
    int patience_;
    int evaluations_ = 0;
    int since_best_ = 0;
    int best_index_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
};

struct EpochRecord {
    int epoch = 0;  ///< 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
};

struct TrainOptions {
    double lr0 = 1e-4;
    double eta_min = 0.0;
    std::int64_t batch_size = 32;
    int max_epochs = 50;
    int patience = 3;
    /// Replaces the computed validation loss of an epoch (1-based); used to
    /// script early-stopping scenarios.
    std::function<double(int epoch, double computed)> validation_override;
    std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    bool stopped_early = false;
};

/// Mini-batch Adam on MSE with a per-epoch cosine schedule (T_max = max_epochs),
/// validation after every epoch, patience-based stopping and restoration of
/// the best-validation parameters. `optimizer` carries Adam moments across
/// calls when given.
TrainResult local_train(ClientModel& model, const ClientDataset& train, const ClientDataset& validation,
                        const TrainOptions& options, std::mt19937_64& rng, nn::Adam* optimizer = nullptr);

struct Evaluation {
    std::map<std::string, double> per_variable;  ///< MSE per target column
    double mean = 0.0;                           ///< MSE over all target values
};

/// Test MSE per target variable in normalized space, or in original units when
/// `denormalize` is given (statistics looked up by target column name).
Evaluation evaluate(const ClientModel& model, const ClientDataset& data,
                    const data::Normalization* denormalize = nullptr);

/// Model predictions for every window, [N x H_out * |targets|].
nn::Tensor predict_all(const ClientModel& model, const ClientDataset& data);

/// Batch gather helpers: rows `idx` of the dataset as model inputs/targets.
nn::Tensor gather_inputs(const data::WindowBatch& w, const std::vector<std::int64_t>& idx);
nn::Tensor gather_targets(const data::WindowBatch& w, const std::vector<std::int64_t>& idx);
nn::Tensor gather_rows(const nn::Tensor& m, const std::vector<std::int64_t>& idx);

}  // namespace corast::client
