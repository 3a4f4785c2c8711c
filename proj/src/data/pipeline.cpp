#include "corast/data/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "corast/errors.hpp"
#include "corast/log.hpp"

namespace corast::data {

DatasetSplits split_chronological(std::int64_t rows) {
    if (rows < 10) throw DataError("dataset too small to split: " + std::to_string(rows) + " rows (need >= 10)");
    const std::int64_t n_train = rows * 7 / 10;
    const std::int64_t n_val = rows / 10;
    return {{0, n_train}, {n_train, n_train + n_val}, {n_train + n_val, rows}};
}

const ColumnStats& Normalization::of(std::string_view column) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == column) return stats[i];
    throw DataError("no normalization statistics for column '" + std::string(column) + "'");
}

double Normalization::apply(std::size_t col, double raw) const {
    const auto& s = stats[col];
    return s.degenerate ? 0.0 : (raw - s.mean) / s.std;
}

double Normalization::invert(std::size_t col, double z) const {
    const auto& s = stats[col];
    return s.degenerate ? s.mean : z * s.std + s.mean;
}

Normalization fit_normalization(const TimeSeriesTable& table, IndexRange train) {
    if (train.begin < 0 || train.end > static_cast<std::int64_t>(table.rows()) || train.size() < 1)
        throw RangeError("normalization range outside table");
    Normalization norm;
    norm.columns = table.columns;
    const double n = static_cast<double>(train.size());
    for (std::size_t c = 0; c < table.cols(); ++c) {
        double mean = 0.0;
        for (auto r = train.begin; r < train.end; ++r) mean += table.at(static_cast<std::size_t>(r), c);
        mean /= n;
        double var = 0.0;
        for (auto r = train.begin; r < train.end; ++r) {
            const double d = table.at(static_cast<std::size_t>(r), c) - mean;
            var += d * d;
        }
        ColumnStats s{mean, std::sqrt(var / n), false};
        if (s.std < 1e-12) {
            s.degenerate = true;
            warn("column '" + table.columns[c] + "' has degenerate std on the training range; mapped to zeros");
        }
        norm.stats.push_back(s);
    }
    return norm;
}

TimeSeriesTable apply_normalization(const TimeSeriesTable& table, const Normalization& norm) {
    if (norm.columns != table.columns) throw ConfigError("normalization columns do not match table");
    TimeSeriesTable out = table;
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out.at(r, c) = norm.apply(c, table.at(r, c));
    return out;
}

NormalizedTable normalize(const TimeSeriesTable& table, const DatasetSplits& splits) {
    auto norm = fit_normalization(table, splits.train);
    return {apply_normalization(table, norm), std::move(norm)};
}

std::span<const double> WindowBatch::input(std::int64_t i) const {
    const auto f = static_cast<std::size_t>(input_features());
    const auto off = static_cast<std::size_t>(starts_[static_cast<std::size_t>(i)] - segment_begin_) * f;
    return {inputs_.data() + off, static_cast<std::size_t>(length_) * f};
}

std::span<const double> WindowBatch::target(std::int64_t i) const {
    const auto f = static_cast<std::size_t>(target_features());
    const auto off = static_cast<std::size_t>(starts_[static_cast<std::size_t>(i)] + length_ - segment_begin_) * f;
    return {targets_.data() + off, static_cast<std::size_t>(horizon_) * f};
}

WindowBatch make_windows(const TimeSeriesTable& table, const std::vector<std::string>& input_columns,
                         const std::vector<std::string>& target_columns, IndexRange segment, std::int64_t length,
                         std::int64_t horizon, std::int64_t stride) {
    if (length < 1 || horizon < 1 || stride < 1) throw ConfigError("window length, horizon and stride must be >= 1");
    if (input_columns.empty() || target_columns.empty()) throw ConfigError("window feature lists must be nonempty");
    if (segment.begin < 0 || segment.end > static_cast<std::int64_t>(table.rows()) || segment.begin > segment.end)
        throw RangeError("window segment outside table");

    WindowBatch wb;
    wb.length_ = length;
    wb.horizon_ = horizon;
    wb.segment_begin_ = segment.begin;
    wb.input_columns_ = input_columns;
    wb.target_columns_ = target_columns;

    const std::int64_t seg_len = segment.size();
    if (seg_len < length + horizon) {
        warn("segment of " + std::to_string(seg_len) + " rows is too short for windows of " + std::to_string(length) +
             "+" + std::to_string(horizon) + "; no windows produced");
        return wb;
    }
    auto copy_cols = [&](const std::vector<std::string>& names, std::vector<double>& dst) {
        std::vector<std::size_t> idx;
        for (const auto& n : names) idx.push_back(table.column_index(n));
        dst.resize(static_cast<std::size_t>(seg_len) * idx.size());
        for (std::int64_t r = 0; r < seg_len; ++r)
            for (std::size_t j = 0; j < idx.size(); ++j)
                dst[static_cast<std::size_t>(r) * idx.size() + j] = table.at(static_cast<std::size_t>(segment.begin + r), idx[j]);
    };
    copy_cols(input_columns, wb.inputs_);
    copy_cols(target_columns, wb.targets_);

    const std::int64_t n = (seg_len - length - horizon) / stride + 1;
    wb.starts_.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        wb.starts_.push_back(segment.begin + i * stride);
        wb.ends_.push_back(segment.begin + i * stride + length - 1);
    }
    return wb;
}

WindowBatch windows_for_split(const TimeSeriesTable& table, const std::vector<std::string>& input_columns,
                              const std::vector<std::string>& target_columns, IndexRange split, std::int64_t length,
                              std::int64_t horizon, std::int64_t stride) {
    const IndexRange segment{std::max<std::int64_t>(0, split.begin - length), split.end};
    return make_windows(table, input_columns, target_columns, segment, length, horizon, stride);
}

Setting parse_setting(std::string_view id) {
    if (id == "1-centralized") return Setting::centralized1;
    if (id == "1-distributed") return Setting::distributed1;
    if (id == "2-centralized") return Setting::centralized2;
    if (id == "2-distributed") return Setting::distributed2;
    throw ConfigError("unknown setting '" + std::string(id) + "'");
}

std::string to_string(Setting s) {
    switch (s) {
        case Setting::centralized1: return "1-centralized";
        case Setting::distributed1: return "1-distributed";
        case Setting::centralized2: return "2-centralized";
        case Setting::distributed2: return "2-distributed";
    }
    return "?";
}

bool is_distributed(Setting s) { return s == Setting::distributed1 || s == Setting::distributed2; }

FeatureAssignment assign_features(Setting setting) {
    switch (setting) {
        case Setting::centralized1: return {{{"Tdew", "rh", "sh"}}, {"Tdew", "rh", "sh"}};
        case Setting::distributed1: return {{{"Tdew"}, {"rh"}, {"sh"}}, {"Tdew", "rh", "sh"}};
        case Setting::centralized2: return {{{"Tdew", "Tpot", "rh", "p", "sh"}}, {"Tdew", "Tpot", "rh", "p", "sh"}};
        case Setting::distributed2: return {{{"Tdew", "Tpot"}, {"rh", "p"}, {"sh"}}, {"Tdew", "Tpot", "rh", "p", "sh"}};
    }
    throw ConfigError("unknown setting");
}

FeatureAssignment assign_features(std::string_view setting_id) { return assign_features(parse_setting(setting_id)); }

namespace {

double entropy_bits(const std::vector<std::size_t>& counts, std::size_t total) {
    double h = 0.0;
    for (auto c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h;
}

template <typename Key>
std::vector<std::size_t> tally(const std::vector<Key>& keys) {
    std::map<Key, std::size_t> m;
    for (const auto& k : keys) ++m[k];
    std::vector<std::size_t> out;
    for (const auto& [k, c] : m) out.push_back(c);
    return out;
}

}  // namespace

EntropyTriple entropy_check(std::span<const int> x, std::span<const int> y) {
    if (x.size() != y.size()) throw UsageError("entropy_check: sequences differ in length");
    if (x.empty()) throw UsageError("entropy_check: empty sequences");
    std::vector<int> xs(x.begin(), x.end()), ys(y.begin(), y.end());
    std::vector<std::pair<int, int>> joint;
    joint.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) joint.emplace_back(x[i], y[i]);
    const std::size_t n = x.size();
    return {entropy_bits(tally(xs), n), entropy_bits(tally(ys), n), entropy_bits(tally(joint), n)};
}

std::vector<int> equal_frequency_bins(std::span<const double> values, int bins) {
    if (bins < 1) throw ConfigError("bin count must be >= 1");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> cuts;
    const std::size_t n = sorted.size();
    for (int q = 1; q < bins && n > 0; ++q) cuts.push_back(sorted[static_cast<std::size_t>(q) * n / static_cast<std::size_t>(bins)]);
    std::vector<int> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        out[i] = static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), values[i]) - cuts.begin());
    return out;
}

EntropyTriple entropy_check_continuous(std::span<const double> x, std::span<const double> y, int bins) {
    if (x.size() != y.size()) throw UsageError("entropy_check: sequences differ in length");
    const auto bx = equal_frequency_bins(x, bins);
    const auto by = equal_frequency_bins(y, bins);
    return entropy_check(bx, by);
}

}  // namespace corast::data
