#include "gridsched/energy.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace gridsched {

namespace {

// Standard Wobus coefficients; the polynomial itself only names "known
// constants". Validated against tabulated saturation pressures in tests.
constexpr double kWobus[10] = {
    0.99999683,     -9.0826951e-3,  7.8736169e-5,   -6.1117958e-7, 4.3884187e-9,
    -2.9883885e-11, 2.1874425e-13,  -1.7892321e-15, 1.1112018e-17, -3.0994571e-20,
};
constexpr double kEso = 6.1078;
constexpr double kGasConstDryAir = 287.058;  // J/(kg K)
constexpr double kGasConstVapour = 461.495;  // J/(kg K)

// Deterministic sampling helpers. The engine is mt19937_64; the variate
// transforms are spelled out so the streams do not depend on the standard
// library's distribution internals (bundled fixtures bake in sampled
// values).
double next_uniform01(std::mt19937_64& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

double next_normal(std::mt19937_64& eng, double mean, double sigma) {
    // Box-Muller, cosine branch only
    double u1 = next_uniform01(eng);
    double u2 = next_uniform01(eng);
    while (u1 <= 0.0) u1 = next_uniform01(eng);
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mean + sigma * z;
}

} // namespace

double saturation_vapour_pressure_hpa(double dew_point_c) {
    if (dew_point_c < -50.0 || dew_point_c > 60.0)
        throw std::domain_error("dew point outside the polynomial validity window [-50, 60] degC");
    double poly = kWobus[9];
    for (int i = 8; i >= 0; --i) poly = kWobus[i] + dew_point_c * poly;
    const double c8 = std::pow(poly, 8.0);
    return kEso / c8;
}

double air_density_kg_m3(double pressure_hpa, double temperature_k, double dew_point_c) {
    if (temperature_k <= 0.0) throw std::domain_error("temperature must be positive kelvin");
    const double p_s = saturation_vapour_pressure_hpa(dew_point_c);
    const double p_d = pressure_hpa - p_s;
    if (p_d < 0.0)
        throw std::domain_error("saturation vapour pressure exceeds total pressure");
    return 100.0 * p_d / (kGasConstDryAir * temperature_k) +
           100.0 * p_s / (kGasConstVapour * temperature_k);
}

double wind_power_w(const TurbineSpec& turbine, double rho_kg_m3, double wind_speed_ms) {
    if (wind_speed_ms < turbine.cut_in_ms || wind_speed_ms > turbine.cut_out_ms) return 0.0;
    return 0.5 * rho_kg_m3 * turbine.power_coefficient * turbine.swept_area_m2 *
           wind_speed_ms * wind_speed_ms * wind_speed_ms;
}

double pv_power_w(const PanelSpec& panel, double dni_wm2, double temperature_c) {
    const double p =
        panel.efficiency * panel.area_m2 * dni_wm2 * (1.0 - 0.005 * (temperature_c - 25.0));
    return std::max(0.0, p);
}

std::vector<std::vector<EnergySource>> generate_prosumers(const ProsumerModel& model,
                                                          std::span<const Money> grid_prices) {
    std::mt19937_64 eng(model.rng_seed);
    std::vector<std::vector<EnergySource>> out(grid_prices.size());
    for (size_t t = 0; t < grid_prices.size(); ++t) {
        out[t].reserve(model.count);
        for (int k = 0; k < model.count; ++k) {
            const double mean = grid_prices[t].units() / model.cost_mean_divisor;
            const double cost = std::max(0.0, next_normal(eng, mean, model.cost_sigma));
            const double energy =
                model.energy_min_kwh +
                (model.energy_max_kwh - model.energy_min_kwh) * next_uniform01(eng);
            const MicroKwh e = micro_kwh_from_kwh(energy);
            if (e < 1) continue; // sub-micro offers are noise
            char id[24];
            std::snprintf(id, sizeof(id), "prosumer%02d", k);
            out[t].push_back({id, SourceKind::prosumer, Money::from_units(cost), e, false});
        }
    }
    return out;
}

std::vector<Money> normalize_grid_prices(std::span<const double> raw, double low, double high) {
    if (raw.empty()) throw std::invalid_argument("empty price series");
    if (!(low < high)) throw std::invalid_argument("normalization bounds need low < high");
    const auto [mn_it, mx_it] = std::minmax_element(raw.begin(), raw.end());
    const double mn = *mn_it, mx = *mx_it;
    std::vector<Money> out;
    out.reserve(raw.size());
    for (double r : raw) {
        const double v = mx > mn ? low + (r - mn) / (mx - mn) * (high - low)
                                 : 0.5 * (low + high);
        out.push_back(Money::from_units(v));
    }
    return out;
}

std::vector<std::vector<EnergySource>> build_sources(const TimeGrid& grid,
                                                     std::span<const WeatherSample> weather,
                                                     const std::optional<TurbineSpec>& turbine,
                                                     const std::optional<PanelSpec>& panel,
                                                     const ProsumerModel& prosumers,
                                                     std::span<const Money> grid_prices) {
    const size_t h = static_cast<size_t>(grid.horizon_slots);
    if (weather.size() != h)
        throw std::invalid_argument("weather series length != horizon_slots");
    if (grid_prices.size() != h)
        throw std::invalid_argument("grid price series length != horizon_slots");

    auto prosumer_lists = generate_prosumers(prosumers, grid_prices);
    std::vector<std::vector<EnergySource>> out(h);
    for (size_t t = 0; t < h; ++t) {
        auto& slot = out[t];
        if (turbine) {
            const double rho = air_density_kg_m3(weather[t].pressure_hpa,
                                                 weather[t].temperature_k(),
                                                 weather[t].dew_point_c);
            const double p_w = wind_power_w(*turbine, rho, weather[t].wind_speed_ms);
            slot.push_back({"wind", SourceKind::wind,
                            Money::from_units(turbine->unit_cost_per_kwh),
                            micro_kwh_from_power(p_w, grid.slot_duration_hours), false});
        }
        if (panel) {
            const double p_pv = pv_power_w(*panel, weather[t].dni_wm2, weather[t].temperature_c);
            slot.push_back({"pv", SourceKind::pv,
                            Money::from_units(panel->unit_cost_per_kwh),
                            micro_kwh_from_power(p_pv, grid.slot_duration_hours), false});
        }
        for (auto& src : prosumer_lists[t]) slot.push_back(std::move(src));
        slot.push_back({"grid", SourceKind::grid, grid_prices[t], 0, true});
    }
    return out;
}

} // namespace gridsched
