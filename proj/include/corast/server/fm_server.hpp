#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "corast/data/pipeline.hpp"
#include "corast/data/table.hpp"
#include "corast/nn/optim.hpp"
#include "corast/server/encoder.hpp"

namespace corast::server {

/// Server representations: d x T values covering absolute rows
/// [time_begin, time_begin + steps), or a single column for an inference point.
struct ReprMatrix {
    std::uint64_t version = 0;
    std::int64_t dim = 0;
    std::int64_t steps = 0;
    std::int64_t time_begin = 0;
    std::vector<double> values;  // dim x steps, row-major

    std::int64_t time_end() const { return time_begin + steps; }
    double at(std::int64_t j, std::int64_t t) const { return values[static_cast<std::size_t>(j * steps + t)]; }
    /// Representation of absolute row `row` as a d-vector.
    std::vector<double> column_at(std::int64_t row) const;
};

/// Little-endian: u64 version, u32 d, u32 T, i64 time_begin, i64 time_end, d*T float64.
std::vector<std::uint8_t> serialize(const ReprMatrix& m);
ReprMatrix deserialize_repr(const std::vector<std::uint8_t>& bytes);

struct PretrainOptions {
    std::int64_t iterations = 600;
    double lr0 = 1e-3;
    /// Called after every iteration with (iteration, loss).
    std::function<void(std::int64_t, double)> on_iteration;
};

struct PretrainResult {
    std::vector<double> losses;  ///< one per iteration
};

/// Contrastive pre-training of `encoder` on a [T x F] series with Adam and a
/// per-iteration cosine schedule (T_max = iterations). Throws NumericError with
/// iteration, learning rate and gradient norm when the loss or a gradient
/// stops being finite.
PretrainResult pretrain(Encoder& encoder, std::span<const double> series, std::int64_t steps,
                        const PretrainOptions& options, std::mt19937_64& rng, nn::Adam* optimizer = nullptr);

/// The server side of the protocol: owns the encoder trained on its columns
/// and emits versioned representations.
class FmServer {
public:
    FmServer(EncoderConfig config, std::vector<std::string> columns, std::uint64_t seed,
             std::int64_t inference_window = 128);

    const std::vector<std::string>& columns() const { return columns_; }
    const Encoder& encoder() const { return encoder_; }
    Encoder& encoder() { return encoder_; }
    std::uint64_t version() const { return version_; }
    std::int64_t inference_window() const { return inference_window_; }

    /// Train on rows `horizon` of `table` (which must contain the server
    /// columns); bumps the version. The first call is the pre-training.
    PretrainResult train(const data::TimeSeriesTable& table, data::IndexRange horizon, std::int64_t iterations,
                         std::function<void(std::int64_t, double)> on_iteration = {});

    /// d x T over `range`, every column computed from the whole range.
    ReprMatrix emit_training_matrix(const data::TimeSeriesTable& table, data::IndexRange range) const;

    /// d x 1 at row t from the `inference_window` rows ending at t.
    ReprMatrix emit_inference_point(const data::TimeSeriesTable& table, std::int64_t t) const;

    /// Same values as calling emit_inference_point for each t, computed in bulk.
    std::vector<ReprMatrix> emit_inference_points(const data::TimeSeriesTable& table,
                                                  const std::vector<std::int64_t>& times) const;

    void save(const std::string& path) const;
    /// Restores parameters and version from a checkpoint written by save();
    /// the stored config and columns must match this server.
    void load(const std::string& path);

    std::map<std::string, std::string> checkpoint_meta() const;

private:
    std::vector<double> server_rows(const data::TimeSeriesTable& table, data::IndexRange range) const;

    EncoderConfig config_;
    std::vector<std::string> columns_;
    std::mt19937_64 rng_;
    Encoder encoder_;
    nn::Adam optimizer_;
    std::uint64_t version_ = 0;
    std::int64_t inference_window_;
};

}  // namespace corast::server
