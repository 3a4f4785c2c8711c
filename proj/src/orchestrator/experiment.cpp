#include "corast/orchestrator/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstring>
#include <exception>
#include <set>
#include <sstream>
#include <thread>

#include "corast/data/synthetic.hpp"
#include "corast/errors.hpp"
#include "corast/log.hpp"

namespace corast::orchestrator {

std::string to_string(FmVariant v) {
    switch (v) {
        case FmVariant::no_fm: return "no-fm";
        case FmVariant::corast_rho: return "corast-rho";
        case FmVariant::corast: return "corast";
    }
    return "?";
}

std::string to_string(Task t) { return t == Task::h2co_forecast ? "h2co-forecast" : "local-forecast"; }

FmVariant parse_variant(std::string_view text) {
    if (text == "no-fm") return FmVariant::no_fm;
    if (text == "corast-rho") return FmVariant::corast_rho;
    if (text == "corast") return FmVariant::corast;
    throw ConfigError("unknown variant '" + std::string(text) + "' (expected no-fm, corast-rho or corast)");
}

Task parse_task(std::string_view text) {
    if (text == "h2co-forecast") return Task::h2co_forecast;
    if (text == "local-forecast") return Task::local_forecast;
    throw ConfigError("unknown task '" + std::string(text) + "' (expected h2co-forecast or local-forecast)");
}

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    schedule.validate();
    if (variant != FmVariant::corast && !server_columns.empty())
        throw ConfigError("server columns can only be set for variant corast (" + to_string(variant) + " fixes them)");
    if (task == Task::h2co_forecast && target.empty()) throw ConfigError("h2co-forecast needs a target column");
    if (inference_window < 1) throw ConfigError("inference window must be >= 1");
    if (server_update_iterations < 1) throw ConfigError("server update iterations must be >= 1");
    if (epochs_per_round < 1) throw ConfigError("epochs per round must be >= 1");
    if (window_stride < 1) throw ConfigError("window stride must be >= 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    const auto n = static_cast<int>(data::assign_features(setting).clients.size());
    std::set<int> seen;
    for (int c : clients) {
        if (c < 0 || c >= n)
            throw ConfigError("client index " + std::to_string(c) + " out of range for setting " +
                              data::to_string(setting));
        if (!seen.insert(c).second) throw ConfigError("client index " + std::to_string(c) + " listed twice");
    }
    if (variant != FmVariant::no_fm) {
        auto enc = encoder;
        enc.input_features = static_cast<std::int64_t>(resolved_server_columns().size());
        enc.validate();
    }
    for (const auto& c : resolved_clients()) c.validate();
}

std::vector<std::string> ExperimentConfig::resolved_server_columns() const {
    switch (variant) {
        case FmVariant::no_fm: return {};
        case FmVariant::corast_rho: return {"rho"};
        case FmVariant::corast: return server_columns.empty() ? data::assign_features(setting).server : server_columns;
    }
    return {};
}

std::vector<client::ClientConfig> ExperimentConfig::resolved_clients() const {
    const auto assignment = data::assign_features(setting);
    std::vector<int> ids = clients;
    if (ids.empty())
        for (int i = 0; i < static_cast<int>(assignment.clients.size()); ++i) ids.push_back(i);
    std::sort(ids.begin(), ids.end());
    std::vector<client::ClientConfig> out;
    for (int id : ids) {
        client::ClientConfig c = client;
        c.id = id;
        c.inputs = assignment.clients[static_cast<std::size_t>(id)];
        c.targets = task == Task::h2co_forecast ? std::vector<std::string>{target} : c.inputs;
        c.variant = variant == FmVariant::no_fm ? client::Variant::no_fm : client::Variant::with_repr;
        c.repr_dim = encoder.repr_dim;
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<std::string> ExperimentConfig::required_columns() const {
    std::vector<std::string> cols;
    auto add = [&](const std::string& c) {
        if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
    };
    for (const auto& c : resolved_clients()) {
        for (const auto& x : c.inputs) add(x);
        for (const auto& x : c.targets) add(x);
    }
    for (const auto& x : resolved_server_columns()) add(x);
    return cols;
}

std::optional<ServerCache::Entry> ServerCache::find(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ServerCache::put(const std::string& key, Entry entry) {
    std::lock_guard lock(mu_);
    entries_[key] = std::move(entry);
}

data::TimeSeriesTable load_table(const ExperimentConfig& config) {
    const auto cols = config.required_columns();
    if (config.data.path.empty()) {
        data::SyntheticWeatherOptions opts;
        opts.rows = config.data.synthetic_rows;
        opts.seed = config.data.synthetic_seed;
        auto table = data::synthetic_weather(opts);
        if (config.data.rows) {
            const auto& r = *config.data.rows;
            const auto total = static_cast<std::int64_t>(table.rows());
            const std::int64_t end = std::min(r.end.value_or(total), total);
            if (r.begin < 0 || r.begin >= end)
                throw DataError("row range " + std::to_string(r.begin) + ":" + std::to_string(end) + " is empty");
            data::TimeSeriesTable cut;
            cut.columns = table.columns;
            cut.timestamps.assign(table.timestamps.begin() + r.begin, table.timestamps.begin() + end);
            cut.values.assign(table.values.begin() + r.begin * static_cast<std::int64_t>(table.cols()),
                              table.values.begin() + end * static_cast<std::int64_t>(table.cols()));
            table = std::move(cut);
        }
        return table.select(cols);
    }
    data::CsvOptions opts;
    opts.rows = config.data.rows;
    opts.bad_rows = config.data.bad_rows;
    return data::load_weather_csv(config.data.path, cols, opts);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string context(std::uint64_t seed, int client, const std::string& phase) {
    std::string s = "(seed " + std::to_string(seed);
    if (client >= 0) s += ", client " + std::to_string(client);
    return s + ", phase " + phase + ") ";
}

// Rethrows the active exception with `ctx` prepended, keeping its type.
[[noreturn]] void rethrow_with(const std::string& ctx) {
    try {
        throw;
    } catch (const ConfigError& e) {
        throw ConfigError(ctx + e.what());
    } catch (const UsageError& e) {
        throw UsageError(ctx + e.what());
    } catch (const NumericError& e) {
        throw NumericError(ctx + e.what());
    } catch (const DataError& e) {
        throw DataError(ctx + e.what());
    } catch (const RangeError& e) {
        throw RangeError(ctx + e.what());
    } catch (const DecodeError& e) {
        throw DecodeError(ctx + e.what());
    } catch (const std::exception& e) {
        throw Error(ctx + e.what());
    }
}

template <typename F>
auto in_phase(std::uint64_t seed, int client, const std::string& phase, F&& f) {
    try {
        return f();
    } catch (...) {
        rethrow_with(context(seed, client, phase));
    }
}

// Runs f(i) for i in [0, n) on up to `threads` workers. Exceptions are
// rethrown after all workers join, lowest index first.
template <typename F>
void for_each_client(std::size_t n, int threads, F&& f) {
    std::vector<std::exception_ptr> errors(n);
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                f(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(threads));
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        f(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::string join(const std::vector<std::string>& v, const char* sep = ",") {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
    return s;
}

std::string cache_key(const ExperimentConfig& cfg, const data::TimeSeriesTable& norm, std::uint64_t seed,
                      const std::vector<std::string>& cols) {
    // FNV-1a over the normalized server columns identifies the data
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& c : cols)
        for (double v : norm.column(c)) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            h = (h ^ bits) * 1099511628211ULL;
        }
    const auto& e = cfg.encoder;
    std::ostringstream os;
    os << join(cols) << '|' << seed << '|' << norm.rows() << '|' << h << '|' << e.hidden << ',' << e.blocks << ','
       << e.repr_dim << ',' << e.kernel << ',' << static_cast<int>(e.padding) << ',' << e.mask_prob << ','
       << e.train_window << ',' << e.crop_min << ',' << e.lr0 << ',' << e.batch_size << ',' << e.iterations << '|'
       << cfg.inference_window;
    return os.str();
}

struct ClientState {
    client::ClientConfig config;
    std::unique_ptr<client::ClientModel> model;
    std::mt19937_64 rng;
    nn::Adam optimizer;
    data::WindowBatch train, val, test;
    // latest received representations aligned to train/val windows
    std::shared_ptr<const nn::Tensor> train_repr, val_repr;
    std::shared_ptr<const Message> last_matrix;  // reused between server updates
    ClientReport report;
};

// Alignment results shared between clients whose windows end at the same rows.
class AlignmentPool {
public:
    std::shared_ptr<const nn::Tensor> get(const Message& m, const data::WindowBatch& w) {
        for (const auto& [ends, t] : cache_)
            if (ends == w.end_indices()) return t;
        auto t = std::make_shared<const nn::Tensor>(align_representations(m, w));
        cache_.emplace_back(w.end_indices(), t);
        return t;
    }

private:
    std::vector<std::pair<std::vector<std::int64_t>, std::shared_ptr<const nn::Tensor>>> cache_;
};

SeedReport run_seed(const ExperimentConfig& cfg, const data::NormalizedTable& norm, const data::DatasetSplits& splits,
                    std::uint64_t seed, const RunHooks& hooks) {
    const auto t_seed = Clock::now();
    SeedReport report;
    report.seed = seed;
    const bool with_server = cfg.variant != FmVariant::no_fm;
    const int rounds = cfg.schedule.rounds;
    const auto& table = norm.table;
    const auto L = cfg.client.seq_len, H = cfg.client.horizon;

    std::vector<ClientState> clients;
    for (const auto& cc : cfg.resolved_clients()) {
        ClientState s;
        s.config = cc;
        s.rng.seed(derive_seed(seed, "client:" + join(cc.inputs)));
        in_phase(seed, cc.id, "setup", [&] {
            s.model = std::make_unique<client::ClientModel>(cc, s.rng);
            s.val = data::windows_for_split(table, cc.inputs, cc.targets, splits.validation, L, H, 1);
            s.test = data::windows_for_split(table, cc.inputs, cc.targets, splits.test, L, H, 1);
            if (s.test.count() == 0) throw DataError("test split yields no windows");
            return 0;
        });
        s.report.client = cc.id;
        s.report.inputs = cc.inputs;
        s.report.targets = cc.targets;
        s.report.parameter_count = s.model->parameter_count();
        s.report.branch_counts = s.model->branch_counts();
        clients.push_back(std::move(s));
    }

    std::unique_ptr<server::FmServer> owned;
    std::shared_ptr<const server::FmServer> cached;
    const server::FmServer* srv = nullptr;
    const auto server_cols = cfg.resolved_server_columns();
    std::string key;
    if (with_server) {
        in_phase(seed, -1, "server-setup", [&] {
            if (hooks.cache != nullptr && rounds == 1) {
                key = cache_key(cfg, table, seed, server_cols);
                if (auto hit = hooks.cache->find(key)) {
                    cached = hit->server;
                    report.server_losses = hit->losses;
                    report.server_seconds = hit->seconds;
                }
            }
            if (!cached) {
                auto enc = cfg.encoder;
                enc.input_features = static_cast<std::int64_t>(server_cols.size());
                owned = std::make_unique<server::FmServer>(enc, server_cols, derive_seed(seed, "server"),
                                                          cfg.inference_window);
            }
            return 0;
        });
        srv = cached ? cached.get() : owned.get();
        report.server_parameter_count = srv->encoder().parameter_count();
    }

    MessageBus bus;
    std::mutex hook_mu;
    std::vector<int> epoch_offset(clients.size(), 0);
    const data::IndexRange broadcast_range{0, splits.validation.end};

    for (int r = 0; r < rounds; ++r) {
        const auto act = schedule_rounds(cfg.schedule, r);
        // train rows observed by round r; the full split in single-round runs
        const data::IndexRange horizon{splits.train.begin,
                                       splits.train.begin + splits.train.size() * (r + 1) / rounds};

        if (with_server && act.server_update) {
            report.server_update_rounds.push_back(r);
            if (!cached) {
                const auto t0 = Clock::now();
                const auto iters = r == 0 ? cfg.encoder.iterations : cfg.server_update_iterations;
                auto res = in_phase(seed, -1, r == 0 ? "pretrain" : "server-update", [&] {
                    const auto offset = static_cast<std::int64_t>(report.server_losses.size());
                    return owned->train(table, horizon, iters, [&](std::int64_t it, double loss) {
                        if (hooks.on_server_iteration) hooks.on_server_iteration(seed, offset + it, loss);
                    });
                });
                report.server_losses.insert(report.server_losses.end(), res.losses.begin(), res.losses.end());
                report.server_seconds += seconds_since(t0);
            }
        }
        if (with_server && act.broadcast) {
            report.broadcast_rounds.push_back(r);
            auto matrix = in_phase(seed, -1, "broadcast", [&] { return srv->emit_training_matrix(table, broadcast_range); });
            const auto notice = std::make_shared<const Message>(make_update_notice(srv->version()));
            const auto msg =
                std::make_shared<const Message>(make_message(MessageKind::repr_training_matrix, std::move(matrix)));
            AlignmentPool pool;
            for (auto& s : clients) {
                bus.send_from_server(r, s.config.id, notice);
                const auto received = bus.send_from_server(r, s.config.id, msg);
                s.report.repr_bytes += frame_size(*received);
                s.report.messages_received += 2;
                s.last_matrix = received;
                s.val_repr = in_phase(seed, s.config.id, "align", [&] { return pool.get(*received, s.val); });
            }
        }
        if (!act.clients_update) continue;

        for_each_client(clients.size(), cfg.threads, [&](std::size_t k) {
            auto& s = clients[k];
            const int id = s.config.id;
            const auto t0 = Clock::now();
            in_phase(seed, id, rounds == 1 ? "local-train" : "local-train round " + std::to_string(r), [&] {
                s.train = data::windows_for_split(table, s.config.inputs, s.config.targets, horizon, L, H,
                                                      cfg.window_stride);
                if (s.train.count() == 0) {
                    warn("client " + std::to_string(id) + " has no training windows in round " + std::to_string(r));
                    return 0;
                }
                if (with_server)
                    s.train_repr = std::make_shared<const nn::Tensor>(align_representations(*s.last_matrix, s.train));
                client::TrainOptions opts = cfg.train;
                if (rounds > 1) opts.max_epochs = cfg.epochs_per_round;
                const int offset = epoch_offset[k];
                opts.on_epoch = [&](const client::EpochRecord& rec) {
                    client::EpochRecord shifted = rec;
                    shifted.epoch += offset;
                    s.report.curve.push_back(shifted);
                    if (hooks.on_epoch) {
                        std::lock_guard lock(hook_mu);
                        hooks.on_epoch(seed, id, shifted);
                    }
                };
                const client::ClientDataset train{&s.train, s.train_repr.get()};
                const client::ClientDataset val{&s.val, s.val_repr.get()};
                auto res = client::local_train(*s.model, train, val, opts, s.rng, &s.optimizer);
                epoch_offset[k] += static_cast<int>(res.epochs.size());
                s.report.best_epoch = res.best_epoch + offset;
                s.report.stopped_early = res.stopped_early;
                s.train_repr.reset();
                return 0;
            });
            s.report.seconds += seconds_since(t0);
        });
    }

    // evaluation: one inference-point vector per test window end, sent to every client
    std::vector<server::ReprMatrix> points;
    std::map<std::int64_t, std::shared_ptr<const Message>> point_msgs;
    if (with_server) {
        std::set<std::int64_t> times;
        for (const auto& s : clients) times.insert(s.test.end_indices().begin(), s.test.end_indices().end());
        points = in_phase(seed, -1, "inference", [&] {
            return srv->emit_inference_points(table, std::vector<std::int64_t>(times.begin(), times.end()));
        });
        for (const auto& p : points)
            point_msgs[p.time_begin] = std::make_shared<const Message>(make_message(MessageKind::repr_inference_vector, p));
    }
    for (auto& s : clients) {
        if (with_server)
            for (auto t : s.test.end_indices()) {
                const auto m = bus.send_from_server(rounds, s.config.id, point_msgs.at(t));
                s.report.repr_bytes += frame_size(*m);
                ++s.report.messages_received;
            }
    }
    for_each_client(clients.size(), cfg.threads, [&](std::size_t k) {
        auto& s = clients[k];
        in_phase(seed, s.config.id, "evaluate", [&] {
            nn::Tensor h;
            if (with_server) h = align_representations(points, s.test);
            const client::ClientDataset test{&s.test, with_server ? &h : nullptr};
            s.report.test = client::evaluate(*s.model, test, cfg.denormalize ? &norm.norm : nullptr);
            return 0;
        });
    });

    if (with_server && owned && hooks.cache != nullptr && rounds == 1)
        hooks.cache->put(key, {std::shared_ptr<const server::FmServer>(std::move(owned)), report.server_losses,
                               report.server_seconds});
    if (with_server && hooks.on_server_trained) hooks.on_server_trained(seed, *srv);

    for (auto& s : clients) {
        if (hooks.on_client_trained) hooks.on_client_trained(seed, s.config.id, *s.model);
        report.repr_bytes += s.report.repr_bytes;
        report.clients.push_back(std::move(s.report));
    }
    for (auto kind : {MessageKind::repr_training_matrix, MessageKind::repr_inference_vector,
                      MessageKind::server_model_updated})
        report.message_counts[to_string(kind)] = bus.count(kind);
    report.trace = bus.trace();
    report.seconds = seconds_since(t_seed);
    return report;
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config, const RunHooks& hooks) {
    config.validate();
    return run_experiment(config, load_table(config), hooks);
}

RunReport run_experiment(const ExperimentConfig& config, const data::TimeSeriesTable& raw, const RunHooks& hooks) {
    config.validate();
    RunReport report;
    report.config = config;
    const auto table = raw.select(config.required_columns());
    report.rows = static_cast<std::int64_t>(table.rows());
    report.splits = data::split_chronological(report.rows);
    const auto norm = data::normalize(table, report.splits);

    for (auto seed : config.seeds) report.seeds.push_back(run_seed(config, norm, report.splits, seed, hooks));

    if (!report.seeds.empty()) {
        const auto& first = report.seeds.front();
        if (config.variant != FmVariant::no_fm) {
            std::ostringstream os;
            os << "server encoder has " << first.server_parameter_count << " parameters (reference "
               << kReferenceServerParameters
               << "); the hidden width 64 / 3 residual blocks / d=256 layout is a reconstruction and the reference "
                  "count implies a wider or deeper stack";
            report.notes.push_back(os.str());
        }
        for (const auto& c : first.clients) {
            std::ostringstream os;
            os << "client " << c.client << " has " << c.parameter_count << " parameters (reference range "
               << kReferenceClientParametersMin << "-" << kReferenceClientParametersMax << ")";
            if (c.parameter_count < kReferenceClientParametersMin || c.parameter_count > kReferenceClientParametersMax)
                os << "; outside the range because the hidden width and TCN depth are reconstructed defaults";
            report.notes.push_back(os.str());
        }
    }
    return report;
}

}  // namespace corast::orchestrator
