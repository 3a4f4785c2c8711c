#include "corast/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "corast/data/synthetic.hpp"
#include "corast/errors.hpp"
#include "corast/nn/checkpoint.hpp"

namespace corast::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using orchestrator::ExperimentConfig;
using orchestrator::RunReport;

namespace {

ordered_json config_to_json(const ExperimentConfig& c) {
    ordered_json j;
    j["run_id"] = c.run_id;
    j["setting"] = data::to_string(c.setting);
    j["variant"] = orchestrator::to_string(c.variant);
    j["task"] = orchestrator::to_string(c.task);
    j["seeds"] = c.seeds;
    j["target"] = c.target;
    j["denormalize"] = c.denormalize;
    j["clients"] = c.clients;
    j["data"] = {{"path", c.data.path.empty() ? "synthetic" : c.data.path},
                 {"rows", c.data.rows ? std::to_string(c.data.rows->begin) + ":" +
                                            (c.data.rows->end ? std::to_string(*c.data.rows->end) : std::string())
                                      : std::string()},
                 {"synthetic_rows", c.data.synthetic_rows},
                 {"synthetic_seed", c.data.synthetic_seed},
                 {"stride", c.window_stride}};
    const auto& e = c.encoder;
    j["server"] = {{"columns", c.resolved_server_columns()},
                   {"hidden", e.hidden},
                   {"blocks", e.blocks},
                   {"repr_dim", e.repr_dim},
                   {"kernel", e.kernel},
                   {"padding", e.padding == nn::Padding::causal ? "causal" : "centered"},
                   {"mask_prob", e.mask_prob},
                   {"train_window", e.train_window},
                   {"crop_min", e.crop_min},
                   {"lr", e.lr0},
                   {"batch_size", e.batch_size},
                   {"iterations", e.iterations},
                   {"inference_window", c.inference_window},
                   {"update_iterations", c.server_update_iterations}};
    j["client"] = {{"seq_len", c.client.seq_len},
                   {"horizon", c.client.horizon},
                   {"depth", c.client.depth},
                   {"kernel", c.client.kernel},
                   {"hidden", c.client.hidden},
                   {"lr", c.train.lr0},
                   {"eta_min", c.train.eta_min},
                   {"batch_size", c.train.batch_size},
                   {"max_epochs", c.train.max_epochs},
                   {"patience", c.train.patience}};
    j["schedule"] = {{"server_interval", c.schedule.server_interval},
                     {"client_interval", c.schedule.client_interval},
                     {"rounds", c.schedule.rounds},
                     {"epochs_per_round", c.epochs_per_round}};
    return j;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
    if (!out) throw DataError("write to '" + path + "' failed");
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

}  // namespace

ordered_json report_to_json(const RunReport& r) {
    ordered_json j;
    j["run_id"] = r.config.run_id;
    j["task"] = orchestrator::to_string(r.config.task);
    j["setting"] = data::to_string(r.config.setting);
    j["variant"] = orchestrator::to_string(r.config.variant);
    j["mse_space"] = r.config.denormalize ? "original units" : "normalized";
    j["rows"] = r.rows;
    j["splits"] = {{"train", {r.splits.train.begin, r.splits.train.end}},
                   {"validation", {r.splits.validation.begin, r.splits.validation.end}},
                   {"test", {r.splits.test.begin, r.splits.test.end}}};
    j["config"] = config_to_json(r.config);

    ordered_json seeds = ordered_json::array();
    for (const auto& s : r.seeds) {
        ordered_json js;
        js["seed"] = s.seed;
        if (r.config.variant != orchestrator::FmVariant::no_fm)
            js["server"] = {{"parameters", s.server_parameter_count},
                            {"iterations", s.server_losses.size()},
                            {"update_rounds", s.server_update_rounds},
                            {"losses", s.server_losses}};
        js["repr_bytes"] = s.repr_bytes;
        js["messages"] = s.message_counts;
        js["broadcast_rounds"] = s.broadcast_rounds;
        ordered_json clients = ordered_json::array();
        for (const auto& c : s.clients) {
            ordered_json jc;
            jc["client"] = c.client;
            jc["inputs"] = c.inputs;
            jc["targets"] = c.targets;
            jc["parameters"] = c.parameter_count;
            jc["branch_parameters"] = c.branch_counts;
            jc["epochs"] = c.curve.size();
            jc["best_epoch"] = c.best_epoch;
            jc["stopped_early"] = c.stopped_early;
            jc["test_mse"] = c.test.mean;
            jc["test_mse_per_variable"] = c.test.per_variable;
            jc["repr_bytes"] = c.repr_bytes;
            jc["messages_received"] = c.messages_received;
            clients.push_back(std::move(jc));
        }
        js["clients"] = std::move(clients);
        seeds.push_back(std::move(js));
    }
    j["seeds"] = std::move(seeds);

    ordered_json counts;
    if (!r.seeds.empty()) {
        const auto& s = r.seeds.front();
        if (r.config.variant != orchestrator::FmVariant::no_fm) counts["server"] = s.server_parameter_count;
        ordered_json cl = ordered_json::object();
        for (const auto& c : s.clients) cl[std::to_string(c.client)] = c.parameter_count;
        counts["clients"] = std::move(cl);
    }
    counts["reference"] = {{"server", orchestrator::kReferenceServerParameters},
                           {"client_min", orchestrator::kReferenceClientParametersMin},
                           {"client_max", orchestrator::kReferenceClientParametersMax}};
    j["parameter_counts"] = std::move(counts);
    j["notes"] = r.notes;
    return j;
}

ordered_json timing_to_json(const RunReport& r) {
    ordered_json j;
    j["run_id"] = r.config.run_id;
    ordered_json seeds = ordered_json::array();
    for (const auto& s : r.seeds) {
        ordered_json c = ordered_json::object();
        for (const auto& cl : s.clients) c[std::to_string(cl.client)] = cl.seconds;
        seeds.push_back({{"seed", s.seed}, {"total_seconds", s.seconds}, {"server_seconds", s.server_seconds},
                         {"client_seconds", c}});
    }
    j["seeds"] = std::move(seeds);
    return j;
}

CurveLog::CurveLog(const std::string& path) : path_(path) {
    std::ofstream out(path_, std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path_ + "'");
    out << "run_id,seed,client,epoch,split,loss\n";
}

void CurveLog::append(const std::string& run_id, std::uint64_t seed, int client, const client::EpochRecord& rec) {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw DataError("cannot append to '" + path_ + "'");
    out << std::setprecision(17);
    for (const auto& [split, loss] : {std::pair{"train", rec.train_loss}, std::pair{"val", rec.val_loss}}) {
        out << run_id << ',' << seed << ',' << client << ',' << rec.epoch - 1 << ',' << split << ',' << loss << '\n';
        out.flush();
        ++rows_;
    }
}

RunOutputs cmd_run(const RunConfig& config, std::ostream& log) {
    const auto& cfg = config.experiment;
    fs::create_directories(config.output.dir);
    RunOutputs out;
    out.metrics = (fs::path(config.output.dir) / "metrics.json").string();
    out.timing = (fs::path(config.output.dir) / "timing.json").string();
    out.curves = (fs::path(config.output.dir) / "curves.csv").string();
    const auto ckpt_dir = fs::path(config.output.dir) / "checkpoints";
    if (config.output.checkpoints) fs::create_directories(ckpt_dir);

    CurveLog curves(out.curves);
    orchestrator::RunHooks hooks;
    hooks.on_epoch = [&](std::uint64_t seed, int client, const client::EpochRecord& rec) {
        curves.append(cfg.run_id, seed, client, rec);
        log << "seed " << seed << " client " << client << " epoch " << rec.epoch << " train " << fmt(rec.train_loss, 5)
            << " val " << fmt(rec.val_loss, 5) << '\n';
    };
    hooks.on_server_iteration = [&](std::uint64_t seed, std::int64_t it, double loss) {
        if ((it + 1) % 50 == 0) log << "seed " << seed << " server iteration " << it + 1 << " loss " << fmt(loss, 5) << '\n';
    };
    if (config.output.checkpoints) {
        hooks.on_server_trained = [&](std::uint64_t seed, const server::FmServer& srv) {
            const auto p = (ckpt_dir / ("server_seed" + std::to_string(seed) + ".ckpt")).string();
            srv.save(p);
            out.checkpoints.push_back(p);
        };
        hooks.on_client_trained = [&](std::uint64_t seed, int client, const client::ClientModel& m) {
            const auto p =
                (ckpt_dir / ("client_seed" + std::to_string(seed) + "_client" + std::to_string(client) + ".ckpt")).string();
            std::map<std::string, std::string> meta{{"kind", "client"},
                                                    {"variant", client::to_string(m.config().variant)},
                                                    {"seed", std::to_string(seed)},
                                                    {"client", std::to_string(client)}};
            nn::save_checkpoint(p, m.parameters(), meta);
            out.checkpoints.push_back(p);
        };
    }
    const auto report = orchestrator::run_experiment(cfg, hooks);
    write_file(out.metrics, report_to_json(report).dump(2) + "\n");
    write_file(out.timing, timing_to_json(report).dump(2) + "\n");
    for (const auto& s : report.seeds)
        for (const auto& c : s.clients)
            log << "seed " << s.seed << " client " << c.client << " test MSE " << fmt(c.test.mean, 6) << '\n';
    for (const auto& n : report.notes) log << "note: " << n << '\n';
    return out;
}

std::vector<std::string> cmd_pretrain(const RunConfig& config, std::ostream& log) {
    const auto& cfg = config.experiment;
    if (cfg.variant == orchestrator::FmVariant::no_fm) throw ConfigError("variant no-fm has no server to pretrain");
    const auto table = orchestrator::load_table(cfg);
    const auto splits = data::split_chronological(static_cast<std::int64_t>(table.rows()));
    const auto norm = data::normalize(table, splits);
    const auto dir = fs::path(config.output.dir) / "checkpoints";
    fs::create_directories(dir);
    std::vector<std::string> paths;
    auto enc = cfg.encoder;
    const auto cols = cfg.resolved_server_columns();
    enc.input_features = static_cast<std::int64_t>(cols.size());
    for (auto seed : cfg.seeds) {
        server::FmServer srv(enc, cols, orchestrator::derive_seed(seed, "server"), cfg.inference_window);
        const auto res = srv.train(norm.table, splits.train, enc.iterations, [&](std::int64_t it, double loss) {
            if ((it + 1) % 50 == 0) log << "seed " << seed << " iteration " << it + 1 << " loss " << fmt(loss, 5) << '\n';
        });
        const auto p = (dir / ("server_seed" + std::to_string(seed) + ".ckpt")).string();
        srv.save(p);
        log << "seed " << seed << ": " << srv.encoder().parameter_count() << " parameters, final loss "
            << fmt(res.losses.empty() ? 0.0 : res.losses.back(), 5) << ", wrote " << p << '\n';
        paths.push_back(p);
    }
    return paths;
}

double Cell::mean() const {
    double s = 0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double Cell::std() const {
    if (values.size() < 2) return std::nan("");
    const double m = mean();
    double s = 0;
    for (double v : values) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(values.size() - 1));
}

int ResultsTable::Row::best() const {
    int best = -1;
    for (int i = 0; i < static_cast<int>(cells.size()); ++i)
        if (cells[static_cast<std::size_t>(i)] &&
            (best < 0 || cells[static_cast<std::size_t>(i)]->mean() < cells[static_cast<std::size_t>(best)]->mean()))
            best = i;
    return best;
}

ResultsTable build_results_table(const std::vector<json>& reports, const std::vector<std::string>& names) {
    if (reports.empty()) throw UsageError("report needs at least one metrics.json");
    ResultsTable t;
    try {
        t.task = reports.front().at("task").get<std::string>();
    } catch (const json::exception& e) {
        throw UsageError(names.front() + " is not a valid run report: " + e.what());
    }
    // (setting, variable) -> variant -> cell; seeds per (setting, variant) checked for repeats
    std::map<std::pair<std::string, std::string>, std::map<std::string, Cell>> cells;
    std::map<std::pair<std::string, std::string>, std::set<std::uint64_t>> seen;
    static const std::vector<std::string> order{"1-centralized", "1-distributed", "2-centralized", "2-distributed"};

    for (std::size_t k = 0; k < reports.size(); ++k) {
        const auto& r = reports[k];
        const auto& name = names.at(k);
        try {
            const auto task = r.at("task").get<std::string>();
            if (task != t.task)
                throw UsageError("cannot mix tasks in one table: " + names.front() + " is " + t.task + ", " + name +
                                 " is " + task);
            const auto setting = r.at("setting").get<std::string>();
            const auto variant = r.at("variant").get<std::string>();
            if (std::find(t.variants.begin(), t.variants.end(), variant) == t.variants.end())
                throw UsageError(name + ": unknown variant '" + variant + "'");
            for (const auto& s : r.at("seeds")) {
                const auto seed = s.at("seed").get<std::uint64_t>();
                if (!seen[{setting, variant}].insert(seed).second)
                    throw UsageError("seed " + std::to_string(seed) + " of " + setting + "/" + variant +
                                     " appears twice (" + name + ")");
                const std::string src = name + "#seed" + std::to_string(seed);
                if (t.task == "h2co-forecast") {
                    // one value per seed: mean test MSE over the setting's clients
                    double sum = 0;
                    std::size_t n = 0;
                    for (const auto& c : s.at("clients")) {
                        sum += c.at("test_mse").get<double>();
                        ++n;
                    }
                    if (n == 0) throw UsageError(name + ": seed " + std::to_string(seed) + " has no clients");
                    auto& cell = cells[{setting, ""}][variant];
                    cell.values.push_back(sum / static_cast<double>(n));
                    cell.sources.push_back(src);
                } else {
                    for (const auto& c : s.at("clients"))
                        for (const auto& [var, v] : c.at("test_mse_per_variable").items()) {
                            auto& cell = cells[{setting, var}][variant];
                            cell.values.push_back(v.get<double>());
                            cell.sources.push_back(src + "#client" + std::to_string(c.at("client").get<int>()));
                        }
                }
            }
        } catch (const json::exception& e) {
            throw UsageError(name + " is not a valid run report: " + e.what());
        }
    }

    std::vector<std::pair<std::string, std::string>> keys;
    for (const auto& [key, _] : cells) keys.push_back(key);
    std::stable_sort(keys.begin(), keys.end(), [&](const auto& a, const auto& b) {
        auto rank = [&](const std::string& s) {
            return std::find(order.begin(), order.end(), s) - order.begin();
        };
        return rank(a.first) < rank(b.first);
    });
    // local rows: every variable of a present setting, even when no run covered it
    if (t.task == "local-forecast") {
        std::vector<std::pair<std::string, std::string>> full;
        std::set<std::string> settings_done;
        for (const auto& [setting, _] : keys) {
            if (!settings_done.insert(setting).second) continue;
            std::vector<std::string> vars;
            try {
                vars = data::assign_features(setting).server;
            } catch (const ConfigError&) {
            }
            for (const auto& [s2, v] : keys)
                if (s2 == setting && std::find(vars.begin(), vars.end(), v) == vars.end()) vars.push_back(v);
            for (const auto& v : vars) full.emplace_back(setting, v);
        }
        keys = std::move(full);
    }
    for (const auto& key : keys) {
        ResultsTable::Row row;
        row.setting = key.first;
        row.variable = key.second;
        for (const auto& v : t.variants) {
            auto it = cells.find(key);
            if (it != cells.end() && it->second.count(v)) row.cells.emplace_back(it->second.at(v));
            else row.cells.emplace_back(std::nullopt);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

namespace {

const std::map<std::string, std::string>& column_titles() {
    static const std::map<std::string, std::string> m{{"no-fm", "No FM"}, {"corast-rho", "CoRAST-rho"}, {"corast", "CoRAST"}};
    return m;
}

std::string cell_text(const std::optional<Cell>& c, bool best) {
    if (!c) return "(missing)";
    const double sd = c->std();
    return fmt(c->mean()) + " ± " + (std::isnan(sd) ? std::string("n/a") : fmt(sd)) + (best ? " *" : "  ");
}

}  // namespace

std::string render_text(const ResultsTable& t) {
    const bool local = t.task == "local-forecast";
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> head{"Setting"};
    if (local) head.push_back("Variable");
    for (const auto& v : t.variants) head.push_back(column_titles().at(v));
    grid.push_back(head);
    for (const auto& row : t.rows) {
        std::vector<std::string> line{row.setting};
        if (local) line.push_back(row.variable);
        const int best = row.best();
        for (std::size_t i = 0; i < row.cells.size(); ++i)
            line.push_back(cell_text(row.cells[i], static_cast<int>(i) == best));
        grid.push_back(std::move(line));
    }
    // width in code points, so the ± sign counts once
    auto width = [](const std::string& s) {
        std::size_t n = 0;
        for (unsigned char ch : s) n += (ch & 0xC0) != 0x80;
        return n;
    };
    std::vector<std::size_t> w(head.size(), 0);
    for (const auto& line : grid)
        for (std::size_t i = 0; i < line.size(); ++i) w[i] = std::max(w[i], width(line[i]));
    std::ostringstream os;
    os << (local ? "Local forecast" : "H2OC forecast") << ", test MSE (mean ± sample std over seeds, * = row minimum)\n";
    for (std::size_t r = 0; r < grid.size(); ++r) {
        for (std::size_t i = 0; i < grid[r].size(); ++i) {
            const auto& s = grid[r][i];
            os << (i ? "  " : "") << s << std::string(w[i] - width(s), ' ');
        }
        os << '\n';
        if (r == 0) {
            std::size_t total = 0;
            for (auto x : w) total += x + 2;
            os << std::string(total - 2, '-') << '\n';
        }
    }
    return os.str();
}

std::string render_csv(const ResultsTable& t) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "task,setting,variable,variant,mean,std,n_seeds,row_min,sources\n";
    for (const auto& row : t.rows) {
        const int best = row.best();
        for (std::size_t i = 0; i < row.cells.size(); ++i) {
            const auto& c = row.cells[i];
            os << t.task << ',' << row.setting << ',' << row.variable << ',' << t.variants[i] << ',';
            if (!c) {
                os << ",,0,0,\n";
                continue;
            }
            const double sd = c->std();
            os << c->mean() << ',';
            if (!std::isnan(sd)) os << sd;
            os << ',' << c->values.size() << ',' << (static_cast<int>(i) == best ? 1 : 0) << ',';
            for (std::size_t k = 0; k < c->sources.size(); ++k) os << (k ? ";" : "") << c->sources[k];
            os << '\n';
        }
    }
    return os.str();
}

std::string cmd_report(const std::vector<std::string>& paths, bool csv) {
    std::vector<json> reports;
    for (const auto& p : paths) {
        std::ifstream in(p);
        if (!in) throw UsageError("cannot open report '" + p + "'");
        try {
            reports.push_back(json::parse(in));
        } catch (const json::exception& e) {
            throw UsageError("'" + p + "' is not valid JSON: " + e.what());
        }
    }
    const auto table = build_results_table(reports, paths);
    return csv ? render_csv(table) : render_text(table);
}

std::string cmd_entropy(const std::string& data_path, const std::string& x, const std::string& y, int bins,
                        std::optional<data::EntropyTriple>* out) {
    if (bins < 1) throw ConfigError("--bins must be >= 1");
    std::vector<std::string> cols{x};
    if (y != x) cols.push_back(y);
    data::TimeSeriesTable table;
    if (data_path == "synthetic") table = data::synthetic_weather().select(cols);
    else table = data::load_weather_csv(data_path, cols);
    const auto splits = data::split_chronological(static_cast<std::int64_t>(table.rows()));
    auto train_part = [&](const std::string& c) {
        const auto all = table.column(c);
        return std::vector<double>(all.begin() + splits.train.begin, all.begin() + splits.train.end);
    };
    const auto e = data::entropy_check_continuous(train_part(x), train_part(y), bins);
    if (out != nullptr) *out = e;
    std::ostringstream os;
    os << std::setprecision(6) << std::fixed;
    os << "train split rows [" << splits.train.begin << ", " << splits.train.end << "), " << bins
       << " equal-frequency bins\n";
    os << "H(" << x << ") = " << e.hx << " bits\n";
    os << "H(" << y << ") = " << e.hy << " bits\n";
    os << "H(" << x << "," << y << ") = " << e.hxy << " bits\n";
    os << "H(x)+H(y) = " << e.hx + e.hy << " bits\n";
    os << (e.correlated() ? "correlated: H(x,y) < H(x)+H(y)" : "not correlated: H(x,y) = H(x)+H(y)") << '\n';
    return os.str();
}

void cmd_synth(const std::string& path, std::int64_t rows, std::uint64_t seed) {
    data::SyntheticWeatherOptions o;
    o.rows = rows;
    o.seed = seed;
    data::write_synthetic_weather_csv(path, o);
}

}  // namespace corast::cli
