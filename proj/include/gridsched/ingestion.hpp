#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gridsched/domain.hpp"
#include "gridsched/energy.hpp"

namespace gridsched {

// Structural problem with an input file: parse failure, schema violation,
// cross-file inconsistency. The message names the file.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A scenario file plus everything it references, fully assembled. The raw
// pieces (weather, prices, specs) stay visible for the prediction and
// prosumer-synthesis commands.
struct Scenario {
    std::string scenario_id;
    TimeGrid grid;
    std::optional<TurbineSpec> turbine;
    std::optional<PanelSpec> panel;
    std::optional<BatterySpec> battery;
    ProsumerModel prosumers;
    double price_low = 0.40;
    double price_high = 0.60;
    std::vector<WeatherSample> weather;  // per slot
    std::vector<Money> grid_prices;      // per slot, normalized
    ScheduleProblem problem;
};

// Parses the scenario JSON, loads the referenced device repository, price
// and weather files, and assembles the ScheduleProblem through
// build_sources. Deterministic for a fixed seed. seed_override replaces the
// scenario's prosumer seed when set.
Scenario load_scenario(const std::filesystem::path& path,
                       std::optional<std::uint64_t> seed_override = std::nullopt);

std::vector<DeviceSpec> load_device_repository(const std::filesystem::path& path,
                                               const TimeGrid& grid,
                                               std::optional<BatterySpec>& battery_out);

// Weather input: CSV with the documented header or a JSON array of objects
// with the same keys.
std::vector<WeatherSample> load_weather(const std::filesystem::path& path);

// Hourly day-ahead prices: CSV (timestamp, price). Values are raw series
// units; normalization happens later.
std::vector<double> load_hourly_prices(const std::filesystem::path& path);

// Replicates hourly prices across the slots each hour covers. Requires the
// slot duration to divide one hour and enough hourly rows for the horizon.
std::vector<double> expand_hourly_to_slots(const std::vector<double>& hourly,
                                           const TimeGrid& grid,
                                           const std::string& file_label);

struct ScheduleMeta {
    std::string scenario_id;
    std::string solver;
    int threads = 1;
    double duration_ms = 0.0;
};

void write_schedule(const Schedule& schedule, const ScheduleMeta& meta, const TimeGrid& grid,
                    const std::filesystem::path& path);

struct ParsedSchedule {
    Schedule schedule;
    ScheduleMeta meta;
};

ParsedSchedule read_schedule(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

struct PowerTrace {
    std::string device_id;
    std::vector<std::pair<std::string, double>> samples; // (timestamp, watts)
};

PowerTrace load_power_trace(const std::filesystem::path& path);

// 1-D Lloyd's iteration over sample watts: k centers seeded from min/max
// (quantile-spread for k > 2), convergence below 1e-6 W shift, 500-round
// cap. Returns centroids ascending as power states S0..S{k-1}. Throws
// InputError with fewer than k distinct values.
std::vector<DeviceState> cluster_power_states(const PowerTrace& trace, int k = 2);

// Decision boundaries between adjacent centroids (their midpoints).
std::vector<double> cluster_boundaries(const std::vector<DeviceState>& states);

// ISO-8601 UTC label of a slot's start.
std::string slot_timestamp(const TimeGrid& grid, int slot);

} // namespace gridsched
