#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "corast/data/table.hpp"

namespace corast::data {

/// Stand-in for the 10-minute weather station benchmark when the real file is
/// not available. Air temperature, relative humidity and pressure follow
/// seasonal, diurnal and synoptic (AR(1)) components with sensor noise; every
/// other column is derived from them with the standard psychrometric formulas
/// (Magnus vapour pressure, specific humidity, potential temperature, density),
/// rounded to the two decimals the benchmark file carries.
struct SyntheticWeatherOptions {
    std::int64_t rows = 52696;
    std::uint64_t seed = 2020;
};

/// Table columns use base names (p, T, Tpot, Tdew, rh, ...).
TimeSeriesTable synthetic_weather(const SyntheticWeatherOptions& options = {});

/// Header fields with units in the benchmark's style, e.g. "Tdew (degC)".
std::vector<std::string> synthetic_weather_header();

void write_synthetic_weather_csv(const std::string& path, const SyntheticWeatherOptions& options = {});

/// Magnus saturation vapour pressure over water, hPa.
double saturation_vapour_pressure(double celsius);

}  // namespace corast::data
