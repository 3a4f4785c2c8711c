#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "corast/data/table.hpp"

namespace corast::data {

struct IndexRange {
    std::int64_t begin = 0;
    std::int64_t end = 0;
    std::int64_t size() const { return end - begin; }
    bool contains(std::int64_t i) const { return i >= begin && i < end; }
};

/// Chronological train/validation/test partition.
struct DatasetSplits {
    IndexRange train;
    IndexRange validation;
    IndexRange test;
};

/// 7:1:2 split: |train| = floor(0.7 T), |val| = floor(0.1 T), test gets the rest.
/// Requires T >= 10.
DatasetSplits split_chronological(std::int64_t rows);

struct ColumnStats {
    double mean = 0.0;
    double std = 1.0;
    bool degenerate = false;  ///< train std < 1e-12; column maps to zeros
};

/// Per-column z-score statistics fitted on the training range only.
struct Normalization {
    std::vector<std::string> columns;
    std::vector<ColumnStats> stats;

    const ColumnStats& of(std::string_view column) const;
    double apply(std::size_t col, double raw) const;
    double invert(std::size_t col, double z) const;
};

Normalization fit_normalization(const TimeSeriesTable& table, IndexRange train);
TimeSeriesTable apply_normalization(const TimeSeriesTable& table, const Normalization& norm);

struct NormalizedTable {
    TimeSeriesTable table;
    Normalization norm;
};

NormalizedTable normalize(const TimeSeriesTable& table, const DatasetSplits& splits);

/// Fixed-length windows over a contiguous segment of a table. Window i reads
/// inputs at absolute rows [start_i, start_i + L) and targets at
/// [start_i + L, start_i + L + H).
class WindowBatch {
public:
    WindowBatch() = default;

    std::int64_t count() const { return static_cast<std::int64_t>(starts_.size()); }
    std::int64_t length() const { return length_; }
    std::int64_t horizon() const { return horizon_; }
    std::int64_t input_features() const { return static_cast<std::int64_t>(input_columns_.size()); }
    std::int64_t target_features() const { return static_cast<std::int64_t>(target_columns_.size()); }
    const std::vector<std::string>& input_columns() const { return input_columns_; }
    const std::vector<std::string>& target_columns() const { return target_columns_; }

    /// Window i inputs as [L x F_in], row-major (time-major).
    std::span<const double> input(std::int64_t i) const;
    /// Window i targets as [H x F_target].
    std::span<const double> target(std::int64_t i) const;
    /// Absolute row index of the last input step of window i.
    std::int64_t end_index(std::int64_t i) const { return starts_[static_cast<std::size_t>(i)] + length_ - 1; }
    std::int64_t start_index(std::int64_t i) const { return starts_[static_cast<std::size_t>(i)]; }
    const std::vector<std::int64_t>& end_indices() const { return ends_; }

private:
    friend WindowBatch make_windows(const TimeSeriesTable&, const std::vector<std::string>&,
                                    const std::vector<std::string>&, IndexRange, std::int64_t, std::int64_t,
                                    std::int64_t);
    std::int64_t length_ = 0;
    std::int64_t horizon_ = 0;
    std::int64_t segment_begin_ = 0;
    std::vector<std::string> input_columns_;
    std::vector<std::string> target_columns_;
    std::vector<double> inputs_;   // segment rows x F_in
    std::vector<double> targets_;  // segment rows x F_target
    std::vector<std::int64_t> starts_;
    std::vector<std::int64_t> ends_;
};

/// N = floor((T_seg - L - H) / stride) + 1 windows, or an empty batch (with a
/// warning) when the segment is shorter than L + H.
WindowBatch make_windows(const TimeSeriesTable& table, const std::vector<std::string>& input_columns,
                         const std::vector<std::string>& target_columns, IndexRange segment, std::int64_t length,
                         std::int64_t horizon, std::int64_t stride);

/// Windows whose first target row lies inside `split`; inputs may reach back
/// up to L rows before the split begins.
WindowBatch windows_for_split(const TimeSeriesTable& table, const std::vector<std::string>& input_columns,
                              const std::vector<std::string>& target_columns, IndexRange split, std::int64_t length,
                              std::int64_t horizon, std::int64_t stride);

enum class Setting { centralized1, distributed1, centralized2, distributed2 };

Setting parse_setting(std::string_view id);
std::string to_string(Setting s);
bool is_distributed(Setting s);

/// Client and server column lists of one experiment setting.
struct FeatureAssignment {
    std::vector<std::vector<std::string>> clients;
    std::vector<std::string> server;
};

FeatureAssignment assign_features(Setting setting);
FeatureAssignment assign_features(std::string_view setting_id);

/// Plug-in Shannon entropies in bits.
struct EntropyTriple {
    double hx = 0.0;
    double hy = 0.0;
    double hxy = 0.0;
    /// H(x,y) < H(x) + H(y) beyond `tolerance`.
    bool correlated(double tolerance = 1e-12) const { return hxy < hx + hy - tolerance; }
};

EntropyTriple entropy_check(std::span<const int> x, std::span<const int> y);

/// Equal-frequency discretization into `bins` symbols using empirical quantile cut points.
std::vector<int> equal_frequency_bins(std::span<const double> values, int bins);

EntropyTriple entropy_check_continuous(std::span<const double> x, std::span<const double> y, int bins = 8);

}  // namespace corast::data
