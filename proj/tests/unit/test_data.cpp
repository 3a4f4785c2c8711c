#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "corast/data/pipeline.hpp"
#include "corast/data/synthetic.hpp"
#include "corast/data/table.hpp"
#include "corast/errors.hpp"
#include "corast/log.hpp"
#include "doctest.h"

using namespace corast;
using namespace corast::data;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("corast_test_" + name); }

std::string write_text(const std::string& name, const std::string& text) {
    const auto p = temp_file(name);
    std::ofstream(p) << text;
    return p.string();
}

std::string ten_row_csv() {
    std::string s = "date,a,b\n";
    for (int i = 0; i < 10; ++i)
        s += "2020-01-01 00:" + std::to_string(10 + i) + ":00," + std::to_string(i) + "," + std::to_string(i * 2.5) + "\n";
    return s;
}

const std::string& benchmark_like_csv() {
    static const std::string path = [] {
        const auto p = temp_file("synthetic_weather.csv").string();
        write_synthetic_weather_csv(p, {.rows = 6000, .seed = 3});
        return p;
    }();
    return path;
}

}  // namespace

TEST_CASE("load_weather_csv selects columns in the requested order") {
    const auto path = write_text("ten.csv", ten_row_csv());
    const auto t = load_weather_csv(path, {"b"});
    CHECK(t.rows() == 10);
    CHECK(t.cols() == 1);
    CHECK(t.at(4, 0) == doctest::Approx(10.0));

    const auto w = load_weather_csv(benchmark_like_csv(), {"Tdew", "rh", "sh"});
    CHECK(w.columns == std::vector<std::string>{"Tdew", "rh", "sh"});
    CHECK(w.rows() == 6000);

    const auto full_names = load_weather_csv(benchmark_like_csv(), {"Tdew (degC)"});
    CHECK(full_names.column("Tdew (degC)") == w.column("Tdew"));
}

TEST_CASE("load_weather_csv errors and row policies") {
    const auto path = write_text("ten.csv", ten_row_csv());
    try {
        load_weather_csv(path, {"xyz"});
        FAIL("expected missing-column error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("xyz") != std::string::npos);
    }

    const auto bad = write_text("bad.csv", "date,a\n2020-01-01 00:10:00,1\n2020-01-01 00:20:00,oops\n2020-01-01 00:30:00,3\n");
    CHECK_THROWS_AS(load_weather_csv(bad, {"a"}), DataError);
    set_warnings_quiet(true);
    WarningCapture cap;
    const auto kept = load_weather_csv(bad, {"a"}, {.rows = std::nullopt, .bad_rows = BadRowPolicy::drop});
    CHECK(kept.rows() == 2);
    CHECK(cap.contains("dropped"));
    set_warnings_quiet(false);

    const auto ranged = load_weather_csv(path, {"a"}, {.rows = parse_row_range("2:5")});
    CHECK(ranged.rows() == 3);
    CHECK(ranged.at(0, 0) == 2.0);
    CHECK_THROWS_AS(parse_row_range("5:2"), ConfigError);
    CHECK_THROWS_AS(parse_row_range("abc"), ConfigError);

    const auto unordered = write_text("unordered.csv", "date,a\n2020-01-01 00:20:00,1\n2020-01-01 00:10:00,2\n");
    CHECK_THROWS_AS(load_weather_csv(unordered, {"a"}), DataError);
}

TEST_CASE("chronological 7:1:2 split") {
    auto check = [](std::int64_t t, std::int64_t a, std::int64_t b, std::int64_t c) {
        const auto s = split_chronological(t);
        CHECK(s.train.size() == a);
        CHECK(s.validation.size() == b);
        CHECK(s.test.size() == c);
        CHECK(s.train.begin == 0);
        CHECK(s.train.end == s.validation.begin);
        CHECK(s.validation.end == s.test.begin);
        CHECK(s.test.end == t);
    };
    check(100, 70, 10, 20);
    check(10, 7, 1, 2);
    check(101, 70, 10, 21);
    check(52696, 36887, 5269, 10540);
    CHECK_THROWS_AS(split_chronological(9), DataError);
}

TEST_CASE("normalization uses training statistics only") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> d(3.0, 2.0);
    TimeSeriesTable t;
    t.columns = {"x", "flat"};
    for (int r = 0; r < 200; ++r) {
        t.timestamps.push_back(std::to_string(r));
        t.values.push_back(d(rng));
        t.values.push_back(4.25);
    }
    const auto splits = split_chronological(200);
    set_warnings_quiet(true);
    WarningCapture cap;
    const auto nt = normalize(t, splits);
    set_warnings_quiet(false);
    CHECK(cap.contains("flat"));
    CHECK(nt.norm.of("flat").degenerate);
    for (std::size_t r = 0; r < 200; ++r) CHECK(nt.table.at(r, 1) == 0.0);

    double mean = 0, sq = 0;
    for (auto r = splits.train.begin; r < splits.train.end; ++r) mean += nt.table.at(static_cast<std::size_t>(r), 0);
    mean /= static_cast<double>(splits.train.size());
    for (auto r = splits.train.begin; r < splits.train.end; ++r) {
        const double v = nt.table.at(static_cast<std::size_t>(r), 0) - mean;
        sq += v * v;
    }
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(sq / static_cast<double>(splits.train.size())) - 1.0) < 1e-9);

    for (auto r = splits.validation.begin; r < splits.test.end; ++r) {
        const auto row = static_cast<std::size_t>(r);
        CHECK(nt.norm.invert(0, nt.table.at(row, 0)) == doctest::Approx(t.at(row, 0)).epsilon(1e-12));
    }

    // mutating a test-range cell leaves the statistics untouched
    TimeSeriesTable mutated = t;
    mutated.at(static_cast<std::size_t>(splits.test.begin + 3), 0) = 1e6;
    const auto norm2 = fit_normalization(mutated, splits.train);
    CHECK(norm2.stats[0].mean == nt.norm.stats[0].mean);
    CHECK(norm2.stats[0].std == nt.norm.stats[0].std);
}

TEST_CASE("window counts and contents") {
    TimeSeriesTable t;
    t.columns = {"u", "v"};
    for (int r = 0; r < 300; ++r) {
        t.timestamps.push_back(std::to_string(r));
        t.values.push_back(r);
        t.values.push_back(-0.5 * r);
    }
    CHECK(make_windows(t, {"u"}, {"v"}, {0, 130}, 128, 1, 1).count() == 2);
    set_warnings_quiet(true);
    WarningCapture cap;
    CHECK(make_windows(t, {"u"}, {"v"}, {0, 128}, 128, 1, 1).count() == 0);
    CHECK(cap.contains("too short"));
    set_warnings_quiet(false);

    const IndexRange seg{17, 261};
    const std::int64_t len = 20, hor = 3, stride = 4;
    const auto wb = make_windows(t, {"u", "v"}, {"v"}, seg, len, hor, stride);
    CHECK(wb.count() == (seg.size() - len - hor) / stride + 1);
    for (std::int64_t i = 0; i < wb.count(); ++i) {
        const std::int64_t start = seg.begin + i * stride;
        const auto in = wb.input(i);
        for (std::int64_t l = 0; l < len; ++l) {
            CHECK(in[static_cast<std::size_t>(l * 2)] == t.at(static_cast<std::size_t>(start + l), 0));
            CHECK(in[static_cast<std::size_t>(l * 2 + 1)] == t.at(static_cast<std::size_t>(start + l), 1));
        }
        const auto tg = wb.target(i);
        for (std::int64_t h = 0; h < hor; ++h) CHECK(tg[static_cast<std::size_t>(h)] == t.at(static_cast<std::size_t>(start + len + h), 1));
        CHECK(wb.end_index(i) == start + len - 1);
        CHECK(wb.end_index(i) < start + len);  // last input row precedes first target row
        CHECK(start + len + hor <= seg.end);
    }

    const auto val = windows_for_split(t, {"u"}, {"u"}, {200, 240}, 32, 1, 1);
    CHECK(val.count() == 40);
    CHECK(val.target(0)[0] == 200.0);
    CHECK(val.end_index(0) == 199);
}

TEST_CASE("feature assignment per setting") {
    const auto d1 = assign_features("1-distributed");
    CHECK(d1.clients == std::vector<std::vector<std::string>>{{"Tdew"}, {"rh"}, {"sh"}});
    CHECK(d1.server == std::vector<std::string>{"Tdew", "rh", "sh"});
    const auto d2 = assign_features("2-distributed");
    CHECK(d2.clients == std::vector<std::vector<std::string>>{{"Tdew", "Tpot"}, {"rh", "p"}, {"sh"}});
    const auto c2 = assign_features("2-centralized");
    REQUIRE(c2.clients.size() == 1);
    CHECK(c2.clients[0].size() == 5);
    CHECK(assign_features("1-centralized").clients[0] == std::vector<std::string>{"Tdew", "rh", "sh"});
    CHECK_THROWS_AS(assign_features("3-distributed"), ConfigError);

    for (auto s : {Setting::distributed1, Setting::distributed2}) {
        const auto fa = assign_features(s);
        for (std::size_t i = 0; i < fa.clients.size(); ++i)
            for (std::size_t j = i + 1; j < fa.clients.size(); ++j)
                for (const auto& a : fa.clients[i])
                    for (const auto& b : fa.clients[j]) CHECK(a != b);
    }
}

TEST_CASE("entropy diagnostic") {
    const std::vector<int> x{0, 0, 1, 1}, y{0, 1, 0, 1};
    const auto e = entropy_check(x, y);
    CHECK(e.hx == doctest::Approx(1.0));
    CHECK(e.hy == doctest::Approx(1.0));
    CHECK(e.hxy == doctest::Approx(2.0));
    CHECK_FALSE(e.correlated());

    const auto same = entropy_check(x, x);
    CHECK(same.hxy == doctest::Approx(same.hx));
    CHECK(same.correlated());

    CHECK_THROWS_AS(entropy_check(std::vector<int>{1, 2}, std::vector<int>{1}), UsageError);

    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> sym(0, 5);
    std::uniform_int_distribution<int> len(1, 300);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = len(rng);
        std::vector<int> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            a[static_cast<std::size_t>(i)] = sym(rng);
            b[static_cast<std::size_t>(i)] = trial % 3 == 0 ? a[static_cast<std::size_t>(i)] : sym(rng);
        }
        const auto r = entropy_check(a, b);
        CHECK(r.hxy <= r.hx + r.hy + 1e-9);
    }

    const std::vector<double> vals{5, 1, 4, 2, 3, 8, 7, 6};
    const auto bins = equal_frequency_bins(vals, 4);
    CHECK(bins == std::vector<int>{2, 0, 1, 0, 1, 3, 3, 2});
}

TEST_CASE("correlated weather variables on the training split") {
    const auto t = load_weather_csv(benchmark_like_csv(), {"Tdew", "rh"});
    const auto s = split_chronological(static_cast<std::int64_t>(t.rows()));
    const auto tdew = t.column("Tdew");
    const auto rh = t.column("rh");
    const std::span<const double> x(tdew.data(), static_cast<std::size_t>(s.train.size()));
    const std::span<const double> y(rh.data(), static_cast<std::size_t>(s.train.size()));
    const auto e = entropy_check_continuous(x, y, 8);
    CHECK(e.hxy < e.hx + e.hy);
}

TEST_CASE("synthetic weather obeys the psychrometric relations it encodes") {
    const auto t = synthetic_weather({.rows = 500, .seed = 1});
    CHECK(t.rows() == 500);
    CHECK(t.timestamps.front() == "2020-01-01 00:10:00");
    CHECK(t.timestamps[143] == "2020-01-02 00:00:00");
    const auto p = t.column("p"), e = t.column("VPact"), h2oc = t.column("H2OC"), rh = t.column("rh");
    for (std::size_t i = 0; i < t.rows(); ++i) {
        CHECK(h2oc[i] == doctest::Approx(1000.0 * e[i] / p[i]).epsilon(2e-3));
        CHECK(rh[i] <= 100.0);
    }
}
