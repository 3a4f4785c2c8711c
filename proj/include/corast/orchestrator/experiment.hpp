#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "corast/client/model.hpp"
#include "corast/client/train.hpp"
#include "corast/data/pipeline.hpp"
#include "corast/data/table.hpp"
#include "corast/orchestrator/protocol.hpp"
#include "corast/server/encoder.hpp"
#include "corast/server/fm_server.hpp"

namespace corast::orchestrator {

enum class FmVariant { no_fm, corast_rho, corast };
enum class Task { h2co_forecast, local_forecast };

std::string to_string(FmVariant v);
std::string to_string(Task t);
FmVariant parse_variant(std::string_view text);
Task parse_task(std::string_view text);

/// Where the table comes from. An empty path selects the synthetic generator.
struct DataSource {
    std::string path;
    std::optional<data::RowRange> rows;
    std::int64_t synthetic_rows = 52696;
    std::uint64_t synthetic_seed = 2020;
    data::BadRowPolicy bad_rows = data::BadRowPolicy::reject;
};

struct ExperimentConfig {
    std::string run_id = "run";
    data::Setting setting = data::Setting::distributed1;
    FmVariant variant = FmVariant::corast;
    Task task = Task::h2co_forecast;
    std::vector<std::uint64_t> seeds{0};
    ScheduleConfig schedule;
    DataSource data;
    std::string target = "H2OC";

    /// Overrides the setting's server columns (corast only).
    std::vector<std::string> server_columns;
    server::EncoderConfig encoder;
    std::int64_t inference_window = 128;
    /// Fine-tuning iterations for server updates after the first (continual runs).
    std::int64_t server_update_iterations = 100;

    /// Template for every client; id, inputs, targets, variant and repr_dim are filled in.
    client::ClientConfig client;
    client::TrainOptions train;
    /// Epochs per client update round when rounds > 1.
    int epochs_per_round = 1;
    std::int64_t window_stride = 1;

    bool denormalize = false;
    int threads = 1;
    /// Indices into the setting's client list; empty runs all of them.
    std::vector<int> clients;

    void validate() const;
    /// Columns the server encodes: empty for no-fm, {rho} for corast-rho.
    std::vector<std::string> resolved_server_columns() const;
    std::vector<client::ClientConfig> resolved_clients() const;
    /// Every column the run reads from the data source.
    std::vector<std::string> required_columns() const;
};

struct ClientReport {
    int client = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> targets;
    std::size_t parameter_count = 0;
    std::map<std::string, std::size_t> branch_counts;
    std::vector<client::EpochRecord> curve;
    int best_epoch = 0;
    bool stopped_early = false;
    client::Evaluation test;
    std::uint64_t repr_bytes = 0;
    std::size_t messages_received = 0;
    double seconds = 0.0;
};

struct SeedReport {
    std::uint64_t seed = 0;
    std::vector<double> server_losses;  ///< every server iteration, all updates concatenated
    std::size_t server_parameter_count = 0;
    std::vector<ClientReport> clients;
    std::uint64_t repr_bytes = 0;
    std::map<std::string, std::size_t> message_counts;
    std::vector<TraceEntry> trace;
    std::vector<int> server_update_rounds;
    std::vector<int> broadcast_rounds;
    double server_seconds = 0.0;
    double seconds = 0.0;
};

struct RunReport {
    ExperimentConfig config;
    std::int64_t rows = 0;
    data::DatasetSplits splits;
    std::vector<SeedReport> seeds;
    /// Human-readable remarks, e.g. parameter counts against reference values.
    std::vector<std::string> notes;
};

/// Pre-trained servers keyed by (columns, seed, table, encoder config), so
/// variants and tasks sharing a server do not pretrain it twice. Only used
/// for single-round runs, where the server is not modified after pretraining.
class ServerCache {
public:
    struct Entry {
        std::shared_ptr<const server::FmServer> server;
        std::vector<double> losses;
        double seconds = 0.0;
    };
    std::optional<Entry> find(const std::string& key) const;
    void put(const std::string& key, Entry entry);

private:
    mutable std::mutex mu_;
    std::map<std::string, Entry> entries_;
};

struct RunHooks {
    /// Called once per client epoch, serialized across threads.
    std::function<void(std::uint64_t seed, int client, const client::EpochRecord&)> on_epoch;
    /// Called for every server iteration.
    std::function<void(std::uint64_t seed, std::int64_t iteration, double loss)> on_server_iteration;
    /// Receives each seed's trained server (corast variants) before evaluation.
    std::function<void(std::uint64_t seed, const server::FmServer&)> on_server_trained;
    /// Receives each trained client model.
    std::function<void(std::uint64_t seed, int client, const client::ClientModel&)> on_client_trained;
    ServerCache* cache = nullptr;
};

data::TimeSeriesTable load_table(const ExperimentConfig& config);

RunReport run_experiment(const ExperimentConfig& config, const RunHooks& hooks = {});
/// Same, on an already loaded raw (unnormalized) table.
RunReport run_experiment(const ExperimentConfig& config, const data::TimeSeriesTable& table,
                         const RunHooks& hooks = {});

/// Reference sizes from the published model setup table.
inline constexpr std::size_t kReferenceServerParameters = 337152;
inline constexpr std::size_t kReferenceClientParametersMin = 12970;
inline constexpr std::size_t kReferenceClientParametersMax = 15214;

}  // namespace corast::orchestrator
