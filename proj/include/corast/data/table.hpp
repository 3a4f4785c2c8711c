#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace corast::data {

/// Named, timestamped multivariate series (rows = time steps).
struct TimeSeriesTable {
    std::vector<std::string> timestamps;
    std::vector<std::string> columns;
    std::vector<double> values;  // rows() x cols(), row-major

    std::size_t rows() const { return timestamps.size(); }
    std::size_t cols() const { return columns.size(); }
    double at(std::size_t row, std::size_t col) const { return values[row * cols() + col]; }
    double& at(std::size_t row, std::size_t col) { return values[row * cols() + col]; }

    /// Throws DataError naming the column when absent.
    std::size_t column_index(std::string_view name) const;
    std::vector<double> column(std::string_view name) const;
    /// New table with `names` in the given order.
    TimeSeriesTable select(const std::vector<std::string>& names) const;
};

/// Half-open data-row range; end == nullopt means through the last row.
struct RowRange {
    std::int64_t begin = 0;
    std::optional<std::int64_t> end;
};

/// Parses "A:B", "A:" or ":B".
RowRange parse_row_range(std::string_view text);

enum class BadRowPolicy { reject, drop };

struct CsvOptions {
    std::optional<RowRange> rows;
    BadRowPolicy bad_rows = BadRowPolicy::reject;
};

/// Column names of a CSV header, excluding the leading timestamp column.
std::vector<std::string> csv_columns(const std::string& path);

/// Load the requested columns (all when `columns` is empty) from a weather CSV
/// whose first column is a timestamp. A requested name matches a header field
/// exactly or by its base name, so "Tdew" selects "Tdew (degC)".
TimeSeriesTable load_weather_csv(const std::string& path, const std::vector<std::string>& columns,
                                 const CsvOptions& options = {});

/// Write a table in the same layout load_weather_csv reads, "date" header first.
void write_weather_csv(const std::string& path, const TimeSeriesTable& table,
                       const std::vector<std::string>& header_names = {});

}  // namespace corast::data
