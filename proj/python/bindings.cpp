// Thin Python surface over the C++ core: whole runs, reports, and a few of
// the pure helpers that are handy from notebooks.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <iostream>
#include <sstream>

#include "corast/cli/commands.hpp"
#include "corast/cli/config.hpp"
#include "corast/data/pipeline.hpp"
#include "corast/errors.hpp"
#include "corast/nn/tensor.hpp"
#include "corast/orchestrator/protocol.hpp"
#include "corast/server/contrastive.hpp"

namespace py = pybind11;
using namespace corast;

namespace {

cli::ConfigOverrides overrides(std::optional<std::vector<std::uint64_t>> seeds, std::optional<std::string> rows,
                               std::optional<std::string> out) {
    cli::ConfigOverrides ov;
    ov.seeds = std::move(seeds);
    ov.rows = std::move(rows);
    ov.out = std::move(out);
    return ov;
}

py::dict outputs_dict(const cli::RunOutputs& o) {
    py::dict d;
    d["metrics"] = o.metrics;
    d["timing"] = o.timing;
    d["curves"] = o.curves;
    d["checkpoints"] = o.checkpoints;
    return d;
}

}  // namespace

PYBIND11_MODULE(_corast, m) {
    m.doc() = "corast simulator core";

    // translators are tried newest first, so the base class goes first
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);

    m.def(
        "run",
        [](const std::string& config, std::optional<std::vector<std::uint64_t>> seeds, std::optional<std::string> rows,
           std::optional<std::string> out, bool verbose) {
            const auto cfg = cli::parse_config(config, overrides(std::move(seeds), std::move(rows), std::move(out)));
            std::ostringstream sink;
            py::gil_scoped_release release;
            const auto o = verbose ? cli::cmd_run(cfg, std::cerr) : cli::cmd_run(cfg, sink);
            py::gil_scoped_acquire acquire;
            return outputs_dict(o);
        },
        py::arg("config"), py::arg("seeds") = py::none(), py::arg("rows") = py::none(), py::arg("out") = py::none(),
        py::arg("verbose") = false, "Run the experiment in an INI config; returns the paths written.");

    m.def(
        "run_text",
        [](const std::string& text, const std::string& base_dir, std::optional<std::string> out) {
            const auto cfg = cli::parse_config_text(text, overrides(std::nullopt, std::nullopt, std::move(out)), base_dir);
            std::ostringstream sink;
            py::gil_scoped_release release;
            const auto o = cli::cmd_run(cfg, sink);
            py::gil_scoped_acquire acquire;
            return outputs_dict(o);
        },
        py::arg("text"), py::arg("base_dir") = ".", py::arg("out") = py::none());

    m.def("report", &cli::cmd_report, py::arg("paths"), py::arg("csv") = false,
          "Results table over metrics.json files.");

    m.def("synth", &cli::cmd_synth, py::arg("path"), py::arg("rows") = 52696, py::arg("seed") = 2020);

    m.def(
        "entropy",
        [](const std::vector<double>& x, const std::vector<double>& y, int bins) {
            const auto e = data::entropy_check_continuous(x, y, bins);
            return py::make_tuple(e.hx, e.hy, e.hxy);
        },
        py::arg("x"), py::arg("y"), py::arg("bins") = 8, "(H(x), H(y), H(x,y)) in bits after equal-frequency binning.");

    m.def(
        "split_sizes",
        [](std::int64_t rows) {
            const auto s = data::split_chronological(rows);
            return py::make_tuple(s.train.size(), s.validation.size(), s.test.size());
        },
        py::arg("rows"));

    m.def(
        "schedule",
        [](int server_interval, int client_interval, int rounds) {
            orchestrator::ScheduleConfig c{server_interval, client_interval, rounds};
            c.validate();
            std::vector<std::tuple<bool, bool, bool>> out;
            for (int r = 0; r < rounds; ++r) {
                const auto a = orchestrator::schedule_rounds(c, r);
                out.emplace_back(a.server_update, a.clients_update, a.broadcast);
            }
            return out;
        },
        py::arg("server_interval"), py::arg("client_interval"), py::arg("rounds"),
        "(server_update, clients_update, broadcast) for each round.");

    m.def(
        "contrastive_loss",
        [](const std::vector<std::vector<std::vector<double>>>& z1,
           const std::vector<std::vector<std::vector<double>>>& z2) {
            auto tensor = [](const std::vector<std::vector<std::vector<double>>>& z) {
                const auto n = static_cast<std::int64_t>(z.size());
                const auto o = n ? static_cast<std::int64_t>(z[0].size()) : 0;
                const auto d = o ? static_cast<std::int64_t>(z[0][0].size()) : 0;
                std::vector<double> flat;
                for (const auto& a : z) {
                    if (static_cast<std::int64_t>(a.size()) != o) throw UsageError("ragged representation array");
                    for (const auto& b : a) {
                        if (static_cast<std::int64_t>(b.size()) != d) throw UsageError("ragged representation array");
                        flat.insert(flat.end(), b.begin(), b.end());
                    }
                }
                return nn::Tensor({n, o, d}, std::move(flat));
            };
            return server::hierarchical_contrastive_loss(tensor(z1), tensor(z2));
        },
        py::arg("z1"), py::arg("z2"), "Hierarchical contrastive loss of two N x O x d views (nested lists).");

    m.def(
        "encode_frame",
        [](std::uint64_t version, std::int64_t time_begin, std::uint32_t dim, std::uint32_t steps,
           std::vector<double> values, bool inference) {
            server::ReprMatrix r{version, dim, steps, time_begin, std::move(values)};
            if (r.values.size() != static_cast<std::size_t>(dim) * steps) throw UsageError("values must hold dim*steps doubles");
            const auto kind = inference ? orchestrator::MessageKind::repr_inference_vector
                                        : orchestrator::MessageKind::repr_training_matrix;
            const auto bytes = orchestrator::serialize_message(orchestrator::make_message(kind, std::move(r)));
            return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
        },
        py::arg("version"), py::arg("time_begin"), py::arg("dim"), py::arg("steps"), py::arg("values"),
        py::arg("inference") = false);

    m.def(
        "decode_frame",
        [](py::bytes b) {
            const std::string s = b;
            const auto msg = orchestrator::deserialize_message(std::vector<std::uint8_t>(s.begin(), s.end()));
            py::dict d;
            d["kind"] = orchestrator::to_string(msg.kind);
            d["version"] = msg.version;
            d["dim"] = msg.dim;
            d["steps"] = msg.steps;
            d["time_begin"] = msg.time_begin;
            d["values"] = msg.payload;
            return d;
        },
        py::arg("frame"));
}
