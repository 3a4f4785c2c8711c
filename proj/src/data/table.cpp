#include "corast/data/table.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "corast/errors.hpp"
#include "corast/log.hpp"

namespace corast::data {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string base_name(const std::string& header) {
    const auto p = header.find(" (");
    return p == std::string::npos ? header : header.substr(0, p);
}

bool parse_double(const std::string& text, double& out) {
    if (text.empty()) return false;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

bool iso_like(const std::string& ts) {
    return ts.size() >= 10 && ts[4] == '-' && ts[7] == '-' && std::isdigit(static_cast<unsigned char>(ts[0]));
}

std::vector<std::string> read_header(std::istream& in, const std::string& path) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // UTF-8 BOM
    auto fields = split_fields(line);
    for (auto& f : fields) f = trim(f);
    if (fields.size() < 2) throw DataError("'" + path + "': header needs a timestamp column and at least one value column");
    return fields;
}

std::size_t resolve_column(const std::vector<std::string>& header, const std::string& wanted) {
    for (std::size_t i = 1; i < header.size(); ++i)
        if (header[i] == wanted) return i;
    std::size_t found = 0;
    for (std::size_t i = 1; i < header.size(); ++i) {
        if (base_name(header[i]) != wanted) continue;
        if (found != 0) throw DataError("column name '" + wanted + "' is ambiguous");
        found = i;
    }
    if (found == 0) throw DataError("missing column '" + wanted + "'");
    return found;
}

}  // namespace

std::size_t TimeSeriesTable::column_index(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return i;
    throw DataError("missing column '" + std::string(name) + "'");
}

std::vector<double> TimeSeriesTable::column(std::string_view name) const {
    const std::size_t c = column_index(name);
    std::vector<double> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, c);
    return out;
}

TimeSeriesTable TimeSeriesTable::select(const std::vector<std::string>& names) const {
    std::vector<std::size_t> idx;
    for (const auto& n : names) idx.push_back(column_index(n));
    TimeSeriesTable out;
    out.timestamps = timestamps;
    out.columns = names;
    out.values.resize(rows() * names.size());
    for (std::size_t r = 0; r < rows(); ++r)
        for (std::size_t j = 0; j < idx.size(); ++j) out.values[r * names.size() + j] = at(r, idx[j]);
    return out;
}

RowRange parse_row_range(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) throw ConfigError("row range '" + std::string(text) + "' must look like A:B");
    auto parse_part = [&](std::string_view part) -> std::optional<std::int64_t> {
        if (part.empty()) return std::nullopt;
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (ec != std::errc() || ptr != part.data() + part.size() || v < 0)
            throw ConfigError("row range '" + std::string(text) + "' is not a pair of non-negative integers");
        return v;
    };
    RowRange r;
    r.begin = parse_part(text.substr(0, colon)).value_or(0);
    r.end = parse_part(text.substr(colon + 1));
    if (r.end && *r.end <= r.begin) throw ConfigError("row range '" + std::string(text) + "' is empty");
    return r;
}

std::vector<std::string> csv_columns(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file '" + path + "'");
    auto header = read_header(in, path);
    return {header.begin() + 1, header.end()};
}

TimeSeriesTable load_weather_csv(const std::string& path, const std::vector<std::string>& columns,
                                 const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file '" + path + "'");
    const auto header = read_header(in, path);

    TimeSeriesTable table;
    std::vector<std::size_t> source;
    if (columns.empty()) {
        for (std::size_t i = 1; i < header.size(); ++i) {
            source.push_back(i);
            table.columns.push_back(base_name(header[i]));
        }
    } else {
        for (const auto& c : columns) {
            source.push_back(resolve_column(header, c));
            table.columns.push_back(c);
        }
    }
    for (std::size_t i = 0; i < table.columns.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (table.columns[i] == table.columns[j]) throw DataError("duplicate column '" + table.columns[i] + "'");

    const std::int64_t first = options.rows ? options.rows->begin : 0;
    const std::int64_t last =
        options.rows && options.rows->end ? *options.rows->end : std::numeric_limits<std::int64_t>::max();

    std::string line;
    std::int64_t data_row = -1;
    std::size_t dropped = 0;
    std::vector<double> row(source.size());
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++data_row;
        if (data_row < first) continue;
        if (data_row >= last) break;
        const auto fields = split_fields(line);
        std::string problem;
        if (fields.size() != header.size()) {
            problem = "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size());
        } else {
            for (std::size_t j = 0; j < source.size(); ++j) {
                const std::string cell = trim(fields[source[j]]);
                if (!parse_double(cell, row[j])) {
                    problem = "column '" + table.columns[j] + "': cannot parse '" + cell + "'";
                    break;
                }
            }
        }
        if (!problem.empty()) {
            if (options.bad_rows == BadRowPolicy::reject)
                throw DataError("'" + path + "' data row " + std::to_string(data_row) + ": " + problem);
            ++dropped;
            continue;
        }
        std::string ts = trim(fields[0]);
        if (!table.timestamps.empty() && iso_like(ts) && iso_like(table.timestamps.back()) &&
            !(table.timestamps.back() < ts))
            throw DataError("'" + path + "': timestamps not strictly increasing at data row " + std::to_string(data_row));
        table.timestamps.push_back(std::move(ts));
        table.values.insert(table.values.end(), row.begin(), row.end());
    }
    if (dropped > 0) warn("dropped " + std::to_string(dropped) + " unparseable rows from '" + path + "'");
    return table;
}

void write_weather_csv(const std::string& path, const TimeSeriesTable& table,
                       const std::vector<std::string>& header_names) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    const auto& names = header_names.empty() ? table.columns : header_names;
    if (names.size() != table.cols()) throw UsageError("write_weather_csv: header size mismatch");
    out << "date";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    out << std::setprecision(10);
    for (std::size_t r = 0; r < table.rows(); ++r) {
        out << table.timestamps[r];
        for (std::size_t c = 0; c < table.cols(); ++c) out << ',' << table.at(r, c);
        out << '\n';
    }
}

}  // namespace corast::data
