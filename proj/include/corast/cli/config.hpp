#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "corast/orchestrator/experiment.hpp"

namespace corast::cli {

struct OutputOptions {
    std::string dir = "corast-out";
    bool checkpoints = true;
};

struct RunConfig {
    orchestrator::ExperimentConfig experiment;
    OutputOptions output;
};

/// Command-line values that replace whatever the file says.
struct ConfigOverrides {
    std::optional<std::vector<std::uint64_t>> seeds;
    std::optional<std::string> rows;  ///< "A:B"
    std::optional<std::string> out;
};

// Config files are INI-style:
//
//   # comment
//   [experiment]
//   setting = 1-distributed
//   variant = corast
//   task = h2co-forecast
//   [data]
//   path = weather.csv        # or "synthetic"
//
// Sections: experiment, data, server, client, schedule, output. setting,
// variant, task and data.path are required; everything else has a default.
// Relative data paths resolve against $CORAST_DATA_DIR when set, otherwise
// against `base_dir`.

/// Throws ConfigError naming the offending key, section or line.
RunConfig parse_config_text(const std::string& text, const ConfigOverrides& overrides = {},
                            const std::string& base_dir = ".");
RunConfig parse_config(const std::string& path, const ConfigOverrides& overrides = {});

/// Comma- or space-separated unsigned integers.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// Resolves a data path the way config files do; "synthetic" is kept as is.
std::string resolve_data_path(const std::string& path, const std::string& base_dir);

}  // namespace corast::cli
