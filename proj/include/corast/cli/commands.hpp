#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "corast/cli/config.hpp"
#include "corast/data/pipeline.hpp"
#include "json.hpp"

namespace corast::cli {

/// Deterministic report content: no wall-clock values.
nlohmann::ordered_json report_to_json(const orchestrator::RunReport& report);
/// Wall-clock durations, kept out of metrics.json so reruns compare byte-equal.
nlohmann::ordered_json timing_to_json(const orchestrator::RunReport& report);

/// Appends "run_id,seed,client,epoch,split,loss" rows, flushing after each.
/// Epochs are written 0-based.
class CurveLog {
public:
    explicit CurveLog(const std::string& path);
    void append(const std::string& run_id, std::uint64_t seed, int client, const client::EpochRecord& rec);
    std::size_t rows() const { return rows_; }

private:
    std::string path_;
    std::size_t rows_ = 0;
};

struct RunOutputs {
    std::string metrics;
    std::string timing;
    std::string curves;
    std::vector<std::string> checkpoints;
};

/// Runs the experiment and writes metrics.json, timing.json, curves.csv and
/// (unless disabled) checkpoints/ under the output directory.
RunOutputs cmd_run(const RunConfig& config, std::ostream& log);

/// Server-only phase: pretrains one encoder per seed on the train split and
/// writes checkpoints/server_seed<S>.ckpt. Returns the checkpoint paths.
std::vector<std::string> cmd_pretrain(const RunConfig& config, std::ostream& log);

struct Cell {
    std::vector<double> values;  ///< one per seed
    std::vector<std::string> sources;
    double mean() const;
    /// Sample standard deviation; NaN with fewer than two seeds.
    double std() const;
};

/// Rows keyed by setting (h2co) or (setting, variable) (local); one column per
/// variant. Missing combinations stay empty cells.
struct ResultsTable {
    std::string task;
    std::vector<std::string> variants{"no-fm", "corast-rho", "corast"};
    struct Row {
        std::string setting;
        std::string variable;  ///< empty for h2co
        std::vector<std::optional<Cell>> cells;
        /// Column with the lowest mean, or -1 when the row is empty.
        int best() const;
    };
    std::vector<Row> rows;
};

/// Throws UsageError when the reports mix tasks or repeat a seed.
ResultsTable build_results_table(const std::vector<nlohmann::json>& reports, const std::vector<std::string>& names);
std::string render_text(const ResultsTable& table);
std::string render_csv(const ResultsTable& table);

/// Reads the given metrics.json files and renders the table.
std::string cmd_report(const std::vector<std::string>& paths, bool csv);

/// Entropy diagnostic on the train split; returns the printed text.
std::string cmd_entropy(const std::string& data, const std::string& x, const std::string& y, int bins,
                        std::optional<data::EntropyTriple>* out = nullptr);

void cmd_synth(const std::string& path, std::int64_t rows, std::uint64_t seed);

}  // namespace corast::cli
