#include "corast/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "corast/errors.hpp"

namespace corast::data {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::int64_t kStepsPerDay = 144;  // 10-minute resolution

struct Civil {
    int year;
    unsigned month;
    unsigned day;
};

// days since 1970-01-01 -> proleptic Gregorian date
Civil civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {static_cast<int>(y + (m <= 2)), m, d};
}

std::string timestamp(std::int64_t step) {
    constexpr std::int64_t kEpochDays2020 = 18262;  // 2020-01-01
    const std::int64_t minutes = (step + 1) * 10;
    const auto c = civil_from_days(kEpochDays2020 + minutes / 1440);
    const auto mod = minutes % 1440;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d:00", c.year, c.month, c.day,
                  static_cast<int>(mod / 60), static_cast<int>(mod % 60));
    return buf;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

/// AR(1) with correlation time `tau` steps and stationary standard deviation `sd`.
struct Ar1 {
    double phi;
    double innovation_sd;
    double state = 0.0;
    Ar1(double tau, double sd) : phi(std::exp(-1.0 / tau)), innovation_sd(sd * std::sqrt(1.0 - phi * phi)) {}
    double step(double shock) {
        state = phi * state + innovation_sd * shock;
        return state;
    }
};

double dew_point(double e_hpa) {
    const double g = std::log(e_hpa / 6.112);
    return 243.12 * g / (17.62 - g);
}

}  // namespace

double saturation_vapour_pressure(double celsius) { return 6.112 * std::exp(17.62 * celsius / (243.12 + celsius)); }

std::vector<std::string> synthetic_weather_header() {
    return {"p (mbar)",      "T (degC)",      "Tpot (K)", "Tdew (degC)",      "rh (%)",       "VPmax (mbar)",
            "VPact (mbar)", "VPdef (mbar)", "sh (g/kg)", "H2OC (mmol/mol)", "rho (g/m**3)", "wv (m/s)"};
}

TimeSeriesTable synthetic_weather(const SyntheticWeatherOptions& options) {
    if (options.rows < 1) throw ConfigError("synthetic weather needs at least one row");
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> n01(0.0, 1.0);

    Ar1 pressure(3.0 * kStepsPerDay, 8.0);
    Ar1 temperature(2.0 * kStepsPerDay, 3.0);
    Ar1 moisture(1.5 * kStepsPerDay, 9.0);  // relative humidity anomaly, %
    Ar1 cloud(0.5 * kStepsPerDay, 1.2);
    Ar1 wind(0.25 * kStepsPerDay, 1.0);

    TimeSeriesTable t;
    for (const auto& h : synthetic_weather_header()) t.columns.push_back(h.substr(0, h.find(" (")));
    t.timestamps.reserve(static_cast<std::size_t>(options.rows));
    t.values.reserve(static_cast<std::size_t>(options.rows) * t.columns.size());

    for (std::int64_t k = 0; k < options.rows; ++k) {
        const double hour = static_cast<double>((k + 1) % kStepsPerDay) / 6.0;
        const double year_phase = kTwoPi * static_cast<double>(k) / (365.25 * kStepsPerDay);
        const double season = -std::cos(year_phase);  // -1 in January, +1 in July

        // Falling pressure comes with warm, moist advection.
        const double p_shock = n01(rng);
        const double pa = pressure.step(p_shock);
        const double ta = temperature.step(-0.35 * p_shock + std::sqrt(1.0 - 0.35 * 0.35) * n01(rng));
        const double ma = moisture.step(n01(rng));
        const double cover = 1.0 / (1.0 + std::exp(-cloud.step(n01(rng))));  // 0 clear .. 1 overcast

        const double diurnal = -std::cos(kTwoPi * (hour - 3.0) / 24.0);  // min 03:00, max 15:00
        const double amplitude = (3.0 + 2.5 * (season + 1.0)) * (1.0 - 0.7 * cover);
        const double temp = 10.0 + 8.5 * season + amplitude * diurnal + ta;

        // Relative humidity anti-correlates with the diurnal temperature cycle.
        double rh = 78.0 - 6.0 * season - 1.8 * amplitude * diurnal + 12.0 * (cover - 0.5) + ma;
        const double p = 989.0 + pa + 0.4 * std::cos(2.0 * kTwoPi * hour / 24.0);

        const double temp_meas = temp + 0.03 * n01(rng);
        rh = std::clamp(rh + 0.4 * n01(rng), 8.0, 100.0);
        const double p_meas = p + 0.03 * n01(rng);

        const double t_r = round2(temp_meas);
        const double rh_r = round2(rh);
        const double p_r = round2(p_meas);
        const double vp_max = saturation_vapour_pressure(t_r);
        const double vp_act = rh_r / 100.0 * vp_max;
        const double tdew = dew_point(vp_act);
        const double sh = 1000.0 * 0.622 * vp_act / (p_r - 0.378 * vp_act);
        const double h2oc = 1000.0 * vp_act / p_r;
        const double tpot = (t_r + 273.15) * std::pow(1000.0 / p_r, 0.2857);
        const double rho = (p_r - 0.378 * vp_act) * 100.0 / (287.05 * (t_r + 273.15)) * 1000.0;
        const double wv = std::abs(1.8 + wind.step(n01(rng)));

        t.timestamps.push_back(timestamp(k));
        for (double v : {p_r, t_r, round2(tpot), round2(tdew), rh_r, round2(vp_max), round2(vp_act),
                         round2(vp_max - vp_act), round2(sh), round2(h2oc), round2(rho), round2(wv)})
            t.values.push_back(v);
    }
    return t;
}

void write_synthetic_weather_csv(const std::string& path, const SyntheticWeatherOptions& options) {
    write_weather_csv(path, synthetic_weather(options), synthetic_weather_header());
}

}  // namespace corast::data
