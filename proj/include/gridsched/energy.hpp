#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridsched/domain.hpp"

namespace gridsched {

struct WeatherSample {
    std::string timestamp;
    double temperature_c = 0.0;
    double dew_point_c = 0.0;
    double pressure_hpa = 1013.25;
    double wind_speed_ms = 0.0;
    double dni_wm2 = 0.0;

    double temperature_k() const { return temperature_c + 273.15; }
};

struct TurbineSpec {
    double swept_area_m2 = 0.0;
    double power_coefficient = 0.0; // Betz limit caps this at 0.59
    double cut_in_ms = 0.0;
    double cut_out_ms = 0.0;
    double unit_cost_per_kwh = 0.0;
};

struct PanelSpec {
    double area_m2 = 0.0;   // whole array
    double efficiency = 0.0;
    double unit_cost_per_kwh = 0.0;
};

struct ProsumerModel {
    int count = 10;
    double cost_mean_divisor = 1.5; // mean = grid_price / divisor
    double cost_sigma = 0.025;
    double energy_min_kwh = 0.0;
    double energy_max_kwh = 1.0;
    std::uint64_t rng_seed = 0;
};

// Wobus approximating polynomial for the saturation vapour pressure at the
// dew point, valid on [-50, 60] degC. Throws std::domain_error outside.
double saturation_vapour_pressure_hpa(double dew_point_c);

// Partial-pressure air density: dry-air and water-vapour terms with their
// gas constants. Throws std::domain_error when the vapour pressure exceeds
// the total pressure or the temperature is not positive.
double air_density_kg_m3(double pressure_hpa, double temperature_k, double dew_point_c);

// 0.5 * rho * Cp * A * v^3 inside the [cut-in, cut-out] band, 0 outside.
double wind_power_w(const TurbineSpec& turbine, double rho_kg_m3, double wind_speed_ms);

// eta * S * I * (1 - 0.005 * (T - 25)), clamped at 0.
double pv_power_w(const PanelSpec& panel, double dni_wm2, double temperature_c);

// Per slot: `count` prosumer offers with cost ~ N(grid_price/divisor,
// sigma^2) clamped at 0 and energy ~ U[min, max]. Deterministic for a given
// seed. Offers below 1 micro-kWh are dropped.
std::vector<std::vector<EnergySource>> generate_prosumers(const ProsumerModel& model,
                                                          std::span<const Money> grid_prices);

// Affine min-max rescale of a raw day-ahead series into [low, high] per
// kWh. A constant series maps to the midpoint.
std::vector<Money> normalize_grid_prices(std::span<const double> raw, double low, double high);

// Assembles the per-slot source lists: wind and PV offers from the weather,
// prosumer offers, and one unbounded grid source at the normalized price.
std::vector<std::vector<EnergySource>> build_sources(const TimeGrid& grid,
                                                     std::span<const WeatherSample> weather,
                                                     const std::optional<TurbineSpec>& turbine,
                                                     const std::optional<PanelSpec>& panel,
                                                     const ProsumerModel& prosumers,
                                                     std::span<const Money> grid_prices);

} // namespace gridsched
