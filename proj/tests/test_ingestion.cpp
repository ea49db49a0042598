#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "gridsched/ingestion.hpp"
#include "gridsched/search.hpp"
#include "test_helpers.hpp"

using namespace gridsched;
using namespace gridsched::testing;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("gridsched_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    fs::path file(const std::string& name, const std::string& content) const {
        const fs::path p = path / name;
        std::ofstream(p) << content;
        return p;
    }
};

std::string tiny_weather_csv(int slots, double wind = 5.0, double dni = 0.0) {
    std::string s = "timestamp,temperature_c,dew_point_c,pressure_hpa,wind_speed_ms,dni_wm2\n";
    for (int t = 0; t < slots; ++t)
        s += "2022-02-08T0" + std::to_string(t / 4) + ":" +
             (t % 4 == 0 ? "00" : std::to_string(15 * (t % 4))) + ":00Z,10.0,2.0,1013.25," +
             std::to_string(wind) + "," + std::to_string(dni) + "\n";
    return s;
}

std::string tiny_prices_csv(std::initializer_list<double> hourly) {
    std::string s = "timestamp,price\n";
    int h = 0;
    for (double p : hourly)
        s += "2022-02-08T0" + std::to_string(h++) + ":00:00Z," + std::to_string(p) + "\n";
    return s;
}

const char* kTinyDevices = R"([
  {"device_id": "lamp",
   "states": [{"state_id": "S0", "power_w": 0.5}, {"state_id": "S1", "power_w": 60.0}],
   "policy": {"variant": "total", "target_state": "S1", "slots_required": 2}},
  {"device_id": "storage",
   "policy": {"variant": "battery", "capacity_max_kwh": 1.0, "capacity_min_kwh": 0.0,
              "charge_rate_max_w": 1000, "discharge_rate_max_w": 1000,
              "efficiency": 1.0, "initial_charge_kwh": 0.0,
              "enforce_end_equals_start": true}}
])";

std::string tiny_scenario_json(const std::string& devices_file = "devices.json") {
    return std::string(R"({
  "scenario_id": "tiny",
  "grid": {"horizon_slots": 8, "slot_duration_hours": 0.25, "start": "2022-02-08T00:00:00Z"},
  "devices_file": ")") +
           devices_file + R"(",
  "prices_file": "prices.csv",
  "weather_file": "weather.csv",
  "price_normalization": {"low": 0.40, "high": 0.60},
  "prosumers": {"count": 2, "rng_seed": 11}
})";
}

} // namespace

TEST_CASE("scenario loading") {
    TempDir dir;
    dir.file("devices.json", kTinyDevices);
    dir.file("prices.csv", tiny_prices_csv({30.0, 60.0}));
    dir.file("weather.csv", tiny_weather_csv(8));
    const auto scenario_path = dir.file("scenario.json", tiny_scenario_json());

    SUBCASE("assembles problem, battery from the repository") {
        const Scenario sc = load_scenario(scenario_path);
        CHECK(sc.scenario_id == "tiny");
        CHECK(sc.problem.devices.size() == 1);
        REQUIRE(sc.problem.battery.has_value());
        CHECK(sc.problem.battery->capacity_max_kwh == 1.0);
        CHECK(validate_problem(sc.problem).ok());
        REQUIRE(sc.grid_prices.size() == 8);
        // hourly prices fan out over 4 quarter-hour slots after normalization
        for (int t = 0; t < 4; ++t) CHECK(sc.grid_prices[t] == Money::from_units(0.40));
        for (int t = 4; t < 8; ++t) CHECK(sc.grid_prices[t] == Money::from_units(0.60));
        // each slot: 2 prosumers + grid
        for (const auto& slot : sc.problem.sources_per_slot)
            CHECK(slot.size() <= 3);
    }
    SUBCASE("deterministic given the seed") {
        const Scenario a = load_scenario(scenario_path);
        const Scenario b = load_scenario(scenario_path);
        REQUIRE(a.problem.sources_per_slot.size() == b.problem.sources_per_slot.size());
        for (size_t t = 0; t < a.problem.sources_per_slot.size(); ++t) {
            REQUIRE(a.problem.sources_per_slot[t].size() ==
                    b.problem.sources_per_slot[t].size());
            for (size_t i = 0; i < a.problem.sources_per_slot[t].size(); ++i) {
                CHECK(a.problem.sources_per_slot[t][i].cost_per_kwh ==
                      b.problem.sources_per_slot[t][i].cost_per_kwh);
                CHECK(a.problem.sources_per_slot[t][i].energy ==
                      b.problem.sources_per_slot[t][i].energy);
            }
        }
    }
    SUBCASE("seed override changes the prosumer draw") {
        const Scenario a = load_scenario(scenario_path);
        const Scenario b = load_scenario(scenario_path, 999);
        bool any_diff = false;
        for (size_t t = 0; t < a.problem.sources_per_slot.size() && !any_diff; ++t)
            for (size_t i = 0; i < a.problem.sources_per_slot[t].size() && !any_diff; ++i)
                any_diff = a.problem.sources_per_slot[t][i].energy !=
                           b.problem.sources_per_slot[t][i].energy;
        CHECK(any_diff);
    }
    SUBCASE("short price file names the gap") {
        TempDir dir2;
        dir2.file("devices.json", kTinyDevices);
        dir2.file("prices.csv", tiny_prices_csv({30.0})); // 1 h for a 2 h horizon
        dir2.file("weather.csv", tiny_weather_csv(8));
        const auto p = dir2.file("scenario.json", tiny_scenario_json());
        CHECK_THROWS_WITH_AS(load_scenario(p),
                             doctest::Contains("covers 1 h, scenario needs 2 h"), InputError);
    }
    SUBCASE("weather row count must match the horizon") {
        TempDir dir2;
        dir2.file("devices.json", kTinyDevices);
        dir2.file("prices.csv", tiny_prices_csv({30.0, 60.0}));
        dir2.file("weather.csv", tiny_weather_csv(5));
        const auto p = dir2.file("scenario.json", tiny_scenario_json());
        CHECK_THROWS_AS(load_scenario(p), InputError);
    }
    SUBCASE("unknown policy variant is named") {
        TempDir dir2;
        dir2.file("devices.json", R"([{"device_id":"x","states":[{"state_id":"S0","power_w":1}],
                    "policy":{"variant":"bogus"}}])");
        dir2.file("prices.csv", tiny_prices_csv({30.0, 60.0}));
        dir2.file("weather.csv", tiny_weather_csv(8));
        const auto p = dir2.file("scenario.json", tiny_scenario_json());
        CHECK_THROWS_WITH_AS(load_scenario(p), doctest::Contains("bogus"), InputError);
    }
    SUBCASE("two policies on one device are rejected") {
        TempDir dir2;
        dir2.file("devices.json",
                  R"([{"device_id":"x",
                       "states":[{"state_id":"S0","power_w":1},{"state_id":"S1","power_w":2}],
                       "policies":[{"variant":"total","target_state":"S1","slots_required":1},
                                   {"variant":"total","target_state":"S0","slots_required":1}]}])");
        dir2.file("prices.csv", tiny_prices_csv({30.0, 60.0}));
        dir2.file("weather.csv", tiny_weather_csv(8));
        const auto p = dir2.file("scenario.json", tiny_scenario_json());
        CHECK_THROWS_WITH_AS(load_scenario(p), doctest::Contains("exactly one policy"),
                             InputError);
    }
    SUBCASE("weather accepted as json too") {
        TempDir dir2;
        dir2.file("devices.json", kTinyDevices);
        dir2.file("prices.csv", tiny_prices_csv({30.0, 60.0}));
        std::string wj = "[";
        for (int t = 0; t < 8; ++t) {
            if (t) wj += ",";
            wj += R"({"timestamp":"2022-02-08T00:00:00Z","temperature_c":10.0,
                      "dew_point_c":2.0,"pressure_hpa":1013.25,"wind_speed_ms":5.0,
                      "dni_wm2":0.0})";
        }
        wj += "]";
        dir2.file("weather.csv", wj); // json content, csv name: sniffed by shape
        const auto p = dir2.file("scenario.json", tiny_scenario_json());
        CHECK(load_scenario(p).weather.size() == 8);
    }
}

TEST_CASE("schedule write/read round trip") {
    TempDir dir;
    dir.file("devices.json", kTinyDevices);
    dir.file("prices.csv", tiny_prices_csv({30.0, 60.0}));
    dir.file("weather.csv", tiny_weather_csv(8));
    const Scenario sc = load_scenario(dir.file("scenario.json", tiny_scenario_json()));

    const auto res = solve_sequential(sc.problem);
    REQUIRE(res.status == SolveStatus::optimal);
    const fs::path out = dir.path / "schedule.json";
    ScheduleMeta meta{"tiny", "memopt", 1, res.stats.duration_ms};
    write_schedule(*res.schedule, meta, sc.grid, out);

    const ParsedSchedule parsed = read_schedule(out);
    CHECK(parsed.meta.scenario_id == "tiny");
    CHECK(parsed.schedule.total_cost == res.schedule->total_cost);
    CHECK(parsed.schedule.per_slot_cost == res.schedule->per_slot_cost);
    CHECK(parsed.schedule.per_slot_demand == res.schedule->per_slot_demand);
    CHECK(parsed.schedule.battery_trajectory == res.schedule->battery_trajectory);

    // replay through dispatch reproduces the totals bit-exactly
    const Schedule replayed = replay_schedule_ids(sc.problem, parsed.schedule.assignments,
                                                  parsed.schedule.battery_actions);
    CHECK(replayed.total_cost == res.schedule->total_cost);
    CHECK(replayed.battery_trajectory == parsed.schedule.battery_trajectory);
}

TEST_CASE("power state clustering") {
    auto trace_of = [](std::initializer_list<double> watts) {
        PowerTrace t;
        t.device_id = "dev";
        int i = 0;
        for (double w : watts) {
            char ts[40];
            std::snprintf(ts, sizeof(ts), "2022-02-08T00:%02d:%02dZ", i / 60, i % 60);
            t.samples.emplace_back(ts, w);
            ++i;
        }
        return t;
    };

    SUBCASE("two well-separated groups") {
        const auto states = cluster_power_states(trace_of({1, 2, 3, 100, 101, 102}), 2);
        REQUIRE(states.size() == 2);
        CHECK(states[0].power_w == doctest::Approx(2.0));
        CHECK(states[1].power_w == doctest::Approx(101.0));
        CHECK(states[0].state_id == "S0");
        const auto bounds = cluster_boundaries(states);
        REQUIRE(bounds.size() == 1);
        CHECK(bounds[0] == doctest::Approx(51.5));
    }
    SUBCASE("constant trace, k=1") {
        const auto states = cluster_power_states(trace_of({36.4, 36.4, 36.4}), 1);
        REQUIRE(states.size() == 1);
        CHECK(states[0].power_w == doctest::Approx(36.4));
    }
    SUBCASE("display-like bimodal trace") {
        std::mt19937_64 rng(3);
        PowerTrace t;
        t.device_id = "display";
        for (int i = 0; i < 2000; ++i) {
            const bool on = i % 3 == 0;
            const double base = on ? 36.36 : 0.63;
            const double jitter =
                (static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5) * base * 0.1;
            char ts[40];
            std::snprintf(ts, sizeof(ts), "2022-02-08T%02d:%02d:%02dZ", i / 3600,
                          (i / 60) % 60, i % 60);
            t.samples.emplace_back(ts, base + jitter);
        }
        const auto states = cluster_power_states(t, 2);
        CHECK(states[0].power_w == doctest::Approx(0.63).epsilon(0.05));
        CHECK(states[1].power_w == doctest::Approx(36.36).epsilon(0.05));
    }
    SUBCASE("permutation invariance") {
        const auto a = cluster_power_states(trace_of({5, 80, 6, 81, 7, 82}), 2);
        const auto b = cluster_power_states(trace_of({82, 7, 81, 6, 80, 5}), 2);
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i)
            CHECK(a[i].power_w == doctest::Approx(b[i].power_w));
    }
    SUBCASE("fewer distinct values than k") {
        CHECK_THROWS_AS(cluster_power_states(trace_of({4.0, 4.0, 4.0}), 2), InputError);
    }
}

TEST_CASE("bundled scenario fixtures load and validate") {
    const fs::path dir = SCENARIO_DIR;
    for (const char* name : {"case_a.json", "case_b.json", "case_c.json"}) {
        CAPTURE(name);
        const Scenario sc = load_scenario(dir / name);
        CHECK(validate_problem(sc.problem).ok());
        // the office: 7 schedulable devices plus the battery storage
        CHECK(sc.problem.devices.size() == 7);
        CHECK(sc.problem.battery.has_value());
        CHECK(sc.grid.horizon_slots == 96);
    }
}
