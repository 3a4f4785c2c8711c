#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "corast/cli/commands.hpp"
#include "corast/errors.hpp"

namespace {

std::string default_data(const std::string& name) {
    const char* dir = std::getenv("CORAST_DATA_DIR");
    if (dir == nullptr || *dir == '\0') return {};
    return std::string(dir) + "/" + name;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace corast;

    CLI::App app{"Simulator for server-side representation sharing with edge forecasting clients.\n"
                 "Environment: CORAST_DATA_DIR is the default directory for relative data paths and for\n"
                 "entropy --data when omitted (weather.csv)."};
    app.require_subcommand(1);

    std::string config_path, rows, out;
    std::vector<std::uint64_t> seeds;
    auto* run = app.add_subcommand("run", "Run one experiment: writes metrics.json, timing.json, curves.csv, checkpoints/");
    run->add_option("--config", config_path, "Experiment config file (INI)")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seeds, "Seed(s); replaces the config's seed list")->expected(1, -1);
    run->add_option("--rows", rows, "Row range A:B of the data file");
    run->add_option("--out", out, "Output directory");

    auto* pre = app.add_subcommand("pretrain", "Server-only phase: pretrain the encoder and write its checkpoint");
    pre->add_option("--config", config_path, "Experiment config file (INI)")->required()->check(CLI::ExistingFile);
    pre->add_option("--seed", seeds, "Seed(s); replaces the config's seed list")->expected(1, -1);
    pre->add_option("--rows", rows, "Row range A:B of the data file");
    pre->add_option("--out", out, "Output directory");

    std::vector<std::string> reports;
    bool csv = false;
    auto* rep = app.add_subcommand("report", "Results table (mean ± std over seeds) from run reports");
    rep->add_option("reports", reports, "metrics.json files")->required()->check(CLI::ExistingFile);
    rep->add_flag("--csv", csv, "Emit CSV instead of aligned text");

    std::string data_path = default_data("weather.csv"), vars;
    int bins = 8;
    auto* ent = app.add_subcommand("entropy", "Plug-in entropy check H(x,y) < H(x)+H(y) on the train split");
    ent->add_option("--data", data_path, "Weather CSV, or 'synthetic'")->required(data_path.empty());
    ent->add_option("--vars", vars, "Variable pair X,Y")->required();
    ent->add_option("--bins", bins, "Equal-frequency bins per variable")->check(CLI::PositiveNumber);

    std::string synth_out;
    std::int64_t synth_rows = 52696;
    std::uint64_t synth_seed = 2020;
    auto* syn = app.add_subcommand("synth", "Write a synthetic weather CSV");
    syn->add_option("--out", synth_out, "Output CSV path")->required();
    syn->add_option("--rows", synth_rows, "Number of 10-minute rows")->check(CLI::PositiveNumber);
    syn->add_option("--seed", synth_seed, "Generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        cli::ConfigOverrides ov;
        if (!seeds.empty()) ov.seeds = seeds;
        if (!rows.empty()) ov.rows = rows;
        if (!out.empty()) ov.out = out;
        if (*run) {
            const auto outputs = cli::cmd_run(cli::parse_config(config_path, ov), std::cerr);
            std::cout << outputs.metrics << '\n' << outputs.timing << '\n' << outputs.curves << '\n';
            for (const auto& p : outputs.checkpoints) std::cout << p << '\n';
        } else if (*pre) {
            for (const auto& p : cli::cmd_pretrain(cli::parse_config(config_path, ov), std::cerr)) std::cout << p << '\n';
        } else if (*rep) {
            std::cout << cli::cmd_report(reports, csv);
        } else if (*ent) {
            const auto comma = vars.find(',');
            if (comma == std::string::npos || comma == 0 || comma + 1 == vars.size())
                throw UsageError("--vars expects X,Y");
            std::cout << cli::cmd_entropy(data_path, vars.substr(0, comma), vars.substr(comma + 1), bins);
        } else if (*syn) {
            cli::cmd_synth(synth_out, synth_rows, synth_seed);
            std::cout << synth_out << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
