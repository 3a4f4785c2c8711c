#include "corast/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "corast/errors.hpp"

namespace corast::cli {

namespace {

namespace fs = std::filesystem;

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

struct Entry {
    std::string value;
    int line = 0;
};

using Sections = std::map<std::string, std::map<std::string, Entry>>;

const std::map<std::string, std::vector<std::string>>& known_keys() {
    static const std::map<std::string, std::vector<std::string>> k{
        {"experiment", {"run_id", "setting", "variant", "task", "seeds", "target", "threads", "denormalize", "clients"}},
        {"data", {"path", "rows", "synthetic_rows", "synthetic_seed", "bad_rows", "stride"}},
        {"server",
         {"columns", "hidden", "blocks", "repr_dim", "kernel", "padding", "mask_prob", "train_window", "crop_min", "lr",
          "batch_size", "iterations", "inference_window", "update_iterations"}},
        {"client",
         {"seq_len", "horizon", "depth", "kernel", "hidden", "lr", "eta_min", "batch_size", "max_epochs", "patience",
          "crop_to_receptive_field"}},
        {"schedule", {"server_interval", "client_interval", "rounds", "epochs_per_round"}},
        {"output", {"dir", "checkpoints"}},
    };
    return k;
}

Sections parse_ini(const std::string& text) {
    Sections out;
    std::istringstream in(text);
    std::string raw, section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        // comments: whole-line, or inline after whitespace
        std::string line = raw;
        for (std::size_t i = 0; i < line.size(); ++i)
            if ((line[i] == '#' || line[i] == ';') && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t')) {
                line.resize(i);
                break;
            }
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (known_keys().count(section) == 0)
                throw ConfigError("line " + std::to_string(line_no) + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find_first_of("=:");
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value', got '" + line + "'");
        const auto key = trim(std::string_view(line).substr(0, eq));
        const auto value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        if (section.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": key '" + key + "' appears before any section");
        const auto& keys = known_keys().at(section);
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw ConfigError("unknown key '" + key + "' in [" + section + "] (line " + std::to_string(line_no) + ")");
        auto [it, fresh] = out[section].emplace(key, Entry{value, line_no});
        if (!fresh)
            throw ConfigError("key '" + section + "." + key + "' set twice (lines " + std::to_string(it->second.line) +
                              " and " + std::to_string(line_no) + ")");
    }
    return out;
}

class Reader {
public:
    explicit Reader(Sections& s) : s_(s) {}

    const Entry* find(const std::string& section, const std::string& key) const {
        auto sec = s_.find(section);
        if (sec == s_.end()) return nullptr;
        auto it = sec->second.find(key);
        if (it == sec->second.end()) return nullptr;
        return &it->second;
    }

    std::string required(const std::string& section, const std::string& key) {
        const auto* e = find(section, key);
        if (e == nullptr || e->value.empty()) throw ConfigError("missing required key '" + section + "." + key + "'");
        return e->value;
    }

    template <typename T>
    void integer(const std::string& section, const std::string& key, T& dst) {
        const auto* e = find(section, key);
        if (e == nullptr) return;
        T v{};
        const auto* end = e->value.data() + e->value.size();
        auto [p, ec] = std::from_chars(e->value.data(), end, v);
        if (ec != std::errc{} || p != end || e->value.empty()) throw bad(section, key, *e, "an integer");
        dst = v;
    }

    void real(const std::string& section, const std::string& key, double& dst) {
        const auto* e = find(section, key);
        if (e == nullptr) return;
        try {
            std::size_t used = 0;
            const double v = std::stod(e->value, &used);
            if (used != e->value.size()) throw std::invalid_argument("trailing");
            dst = v;
        } catch (const std::exception&) {
            throw bad(section, key, *e, "a number");
        }
    }

    void boolean(const std::string& section, const std::string& key, bool& dst) {
        const auto* e = find(section, key);
        if (e == nullptr) return;
        if (e->value == "true" || e->value == "yes" || e->value == "1") dst = true;
        else if (e->value == "false" || e->value == "no" || e->value == "0") dst = false;
        else throw bad(section, key, *e, "true or false");
    }

    void text(const std::string& section, const std::string& key, std::string& dst) {
        if (const auto* e = find(section, key)) dst = e->value;
    }

    static ConfigError bad(const std::string& section, const std::string& key, const Entry& e, const char* want) {
        return ConfigError("key '" + section + "." + key + "' (line " + std::to_string(e.line) + "): expected " + want +
                           ", got '" + e.value + "'");
    }

private:
    Sections& s_;
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text + ",") {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    return out;
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    for (const auto& item : split_list(text)) {
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc{} || p != item.data() + item.size())
            throw ConfigError("seed '" + item + "' is not a non-negative integer");
        seeds.push_back(v);
    }
    if (seeds.empty()) throw ConfigError("empty seed list");
    return seeds;
}

std::string resolve_data_path(const std::string& path, const std::string& base_dir) {
    if (path == "synthetic" || path.empty()) return path;
    fs::path p(path);
    if (p.is_absolute()) return path;
    if (const char* dir = std::getenv("CORAST_DATA_DIR"); dir != nullptr && *dir != '\0') return (fs::path(dir) / p).string();
    return (fs::path(base_dir) / p).lexically_normal().string();
}

RunConfig parse_config_text(const std::string& text, const ConfigOverrides& overrides, const std::string& base_dir) {
    auto sections = parse_ini(text);
    Reader r(sections);
    RunConfig out;
    auto& c = out.experiment;

    c.setting = data::parse_setting(r.required("experiment", "setting"));
    c.variant = orchestrator::parse_variant(r.required("experiment", "variant"));
    c.task = orchestrator::parse_task(r.required("experiment", "task"));
    r.text("experiment", "run_id", c.run_id);
    if (const auto* e = r.find("experiment", "seeds")) {
        try {
            c.seeds = parse_seed_list(e->value);
        } catch (const ConfigError& err) {
            throw ConfigError("key 'experiment.seeds': " + std::string(err.what()));
        }
    }
    r.text("experiment", "target", c.target);
    r.integer("experiment", "threads", c.threads);
    r.boolean("experiment", "denormalize", c.denormalize);
    if (const auto* e = r.find("experiment", "clients")) {
        for (const auto& item : split_list(e->value)) {
            int v = 0;
            auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
            if (ec != std::errc{} || p != item.data() + item.size())
                throw Reader::bad("experiment", "clients", *e, "a list of client indices");
            c.clients.push_back(v);
        }
    }

    const auto path = r.required("data", "path");
    c.data.path = path == "synthetic" ? std::string() : resolve_data_path(path, base_dir);
    std::string rows;
    r.text("data", "rows", rows);
    if (overrides.rows) rows = *overrides.rows;
    if (!rows.empty()) c.data.rows = data::parse_row_range(rows);
    r.integer("data", "synthetic_rows", c.data.synthetic_rows);
    r.integer("data", "synthetic_seed", c.data.synthetic_seed);
    if (const auto* e = r.find("data", "bad_rows")) {
        if (e->value == "reject") c.data.bad_rows = data::BadRowPolicy::reject;
        else if (e->value == "drop") c.data.bad_rows = data::BadRowPolicy::drop;
        else throw Reader::bad("data", "bad_rows", *e, "reject or drop");
    }
    r.integer("data", "stride", c.window_stride);

    if (const auto* e = r.find("server", "columns")) {
        if (c.variant != orchestrator::FmVariant::corast)
            throw ConfigError("key 'server.columns' contradicts variant " + orchestrator::to_string(c.variant) +
                              " (line " + std::to_string(e->line) + ")");
        c.server_columns = split_list(e->value);
    }
    auto& enc = c.encoder;
    r.integer("server", "hidden", enc.hidden);
    r.integer("server", "blocks", enc.blocks);
    r.integer("server", "repr_dim", enc.repr_dim);
    r.integer("server", "kernel", enc.kernel);
    if (const auto* e = r.find("server", "padding")) {
        if (e->value == "causal") enc.padding = nn::Padding::causal;
        else if (e->value == "centered") enc.padding = nn::Padding::centered;
        else throw Reader::bad("server", "padding", *e, "causal or centered");
    }
    r.real("server", "mask_prob", enc.mask_prob);
    r.integer("server", "train_window", enc.train_window);
    r.integer("server", "crop_min", enc.crop_min);
    r.real("server", "lr", enc.lr0);
    r.integer("server", "batch_size", enc.batch_size);
    r.integer("server", "iterations", enc.iterations);
    r.integer("server", "inference_window", c.inference_window);
    r.integer("server", "update_iterations", c.server_update_iterations);

    auto& cl = c.client;
    r.integer("client", "seq_len", cl.seq_len);
    r.integer("client", "horizon", cl.horizon);
    r.integer("client", "depth", cl.depth);
    r.integer("client", "kernel", cl.kernel);
    r.integer("client", "hidden", cl.hidden);
    r.boolean("client", "crop_to_receptive_field", cl.crop_to_receptive_field);
    r.real("client", "lr", c.train.lr0);
    r.real("client", "eta_min", c.train.eta_min);
    r.integer("client", "batch_size", c.train.batch_size);
    r.integer("client", "max_epochs", c.train.max_epochs);
    r.integer("client", "patience", c.train.patience);

    r.integer("schedule", "server_interval", c.schedule.server_interval);
    r.integer("schedule", "client_interval", c.schedule.client_interval);
    r.integer("schedule", "rounds", c.schedule.rounds);
    r.integer("schedule", "epochs_per_round", c.epochs_per_round);

    r.text("output", "dir", out.output.dir);
    r.boolean("output", "checkpoints", out.output.checkpoints);

    if (overrides.seeds) c.seeds = *overrides.seeds;
    if (overrides.out) out.output.dir = *overrides.out;
    if (c.train.max_epochs < 1) throw ConfigError("key 'client.max_epochs' must be >= 1");
    if (c.train.patience < 1) throw ConfigError("key 'client.patience' must be >= 1");
    if (c.train.batch_size < 1) throw ConfigError("key 'client.batch_size' must be >= 1");
    if (!(c.train.lr0 > 0)) throw ConfigError("key 'client.lr' must be > 0");
    c.validate();
    return out;
}

RunConfig parse_config(const std::string& path, const ConfigOverrides& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const auto dir = fs::path(path).parent_path().string();
    try {
        return parse_config_text(ss.str(), overrides, dir.empty() ? "." : dir);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

}  // namespace corast::cli
