#include <doctest.h>

#include <cstdlib>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct CliRun {
    int exit_code;
    std::string stdout_text;
};

CliRun run_tool(const std::string& args, const fs::path& workdir) {
    const fs::path out = workdir / "stdout.txt";
    const std::string cmd = "cd " + workdir.string() + " && " + GRIDSCHED_TOOL + " " + args +
                            " > " + out.string() + " 2> " + (workdir / "stderr.txt").string();
    const int rc = std::system(cmd.c_str());
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    return {rc == -1 ? -1 : WEXITSTATUS(rc), ss.str()};
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("gridsched_cli_" + std::to_string(::getpid()) +
                                            "_" + std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    void file(const std::string& name, const std::string& content) const {
        std::ofstream(path / name) << content;
    }
};

void write_tiny_scenario(const TempDir& dir) {
    dir.file("devices.json", R"([
      {"device_id": "lamp",
       "states": [{"state_id": "S0", "power_w": 0.5}, {"state_id": "S1", "power_w": 60.0}],
       "policy": {"variant": "total", "target_state": "S1", "slots_required": 2}}
    ])");
    std::string prices = "timestamp,price\n2022-02-08T00:00:00Z,30\n2022-02-08T01:00:00Z,60\n";
    dir.file("prices.csv", prices);
    std::string weather = "timestamp,temperature_c,dew_point_c,pressure_hpa,wind_speed_ms,dni_wm2\n";
    for (int t = 0; t < 8; ++t)
        weather += "2022-02-08T00:00:00Z,10.0,2.0,1013.25,9.0,0.0\n";
    dir.file("weather.csv", weather);
    dir.file("scenario.json", R"({
      "scenario_id": "tiny",
      "grid": {"horizon_slots": 8, "slot_duration_hours": 0.25, "start": "2022-02-08T00:00:00Z"},
      "devices_file": "devices.json",
      "prices_file": "prices.csv",
      "weather_file": "weather.csv",
      "turbine": {"swept_area_m2": 12.88, "power_coefficient": 0.11, "cut_in_ms": 3.0,
                  "cut_out_ms": 60.0, "unit_cost_per_kwh": 0.08},
      "battery": {"capacity_max_kwh": 1.0, "capacity_min_kwh": 0.0, "charge_rate_max_w": 1000,
                  "discharge_rate_max_w": 1000, "efficiency": 1.0, "initial_charge_kwh": 0.0,
                  "enforce_end_equals_start": true},
      "prosumers": {"count": 2, "rng_seed": 11}
    })");
}

} // namespace

TEST_CASE("cli schedule") {
    TempDir dir;
    write_tiny_scenario(dir);

    SUBCASE("memopt and parallel --threads 1 agree") {
        const auto a = run_tool("schedule --scenario scenario.json --solver memopt --out a.json",
                                dir.path);
        REQUIRE(a.exit_code == 0);
        const auto b = run_tool(
            "schedule --scenario scenario.json --solver parallel --threads 1 --out b.json",
            dir.path);
        REQUIRE(b.exit_code == 0);
        const auto cost_of = [](const std::string& text) {
            const auto pos = text.find("total_cost=");
            REQUIRE(pos != std::string::npos);
            return text.substr(pos + 11, text.find(' ', pos) - pos - 11);
        };
        CHECK(cost_of(a.stdout_text) == cost_of(b.stdout_text));
        CHECK(fs::exists(dir.path / "a.json"));
        CHECK(fs::exists(dir.path / "b.json"));
    }
    SUBCASE("--no-battery can only raise the cost") {
        const auto with = run_tool(
            "schedule --scenario scenario.json --out with.json", dir.path);
        const auto without = run_tool(
            "schedule --scenario scenario.json --no-battery --out without.json", dir.path);
        REQUIRE(with.exit_code == 0);
        REQUIRE(without.exit_code == 0);
        auto cost_of = [](const std::string& text) {
            const auto pos = text.find("total_cost=");
            return std::stod(text.substr(pos + 11));
        };
        CHECK(cost_of(with.stdout_text) <= cost_of(without.stdout_text) + 1e-12);
        nlohmann::json doc;
        std::ifstream(dir.path / "with.json") >> doc;
        CHECK(doc.at("slots").size() == 8);
    }
    SUBCASE("missing scenario file exits nonzero without output") {
        const auto r = run_tool("schedule --scenario nope.json --out x.json", dir.path);
        CHECK(r.exit_code == 2);
        CHECK(!fs::exists(dir.path / "x.json"));
    }
}

TEST_CASE("cli validate") {
    TempDir dir;
    write_tiny_scenario(dir);
    const auto r = run_tool("validate --scenario scenario.json", dir.path);
    CHECK(r.exit_code == 0);
    CHECK(r.stdout_text.find("status=valid") != std::string::npos);
}

TEST_CASE("cli bench with an empty matrix writes a header-only csv") {
    TempDir dir;
    dir.file("matrix.json", R"({"instances": [], "variants": ["memopt"], "iterations": 2})");
    const auto r = run_tool("bench --matrix matrix.json --out bench.csv", dir.path);
    REQUIRE(r.exit_code == 0);
    std::ifstream in(dir.path / "bench.csv");
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line.find("instance_id,variant,threads,duration_ms") == 0);
    CHECK(!std::getline(in, line));
}

TEST_CASE("cli predict-gen and gen-prosumers") {
    TempDir dir;
    write_tiny_scenario(dir);

    const auto g = run_tool("predict-gen --scenario scenario.json --out gen.csv", dir.path);
    REQUIRE(g.exit_code == 0);
    std::ifstream in(dir.path / "gen.csv");
    std::string header, row;
    REQUIRE(std::getline(in, header));
    CHECK(header.find("wind_w") != std::string::npos);
    REQUIRE(std::getline(in, row));
    // 9 m/s wind on the tiny fixture: nonzero wind, zero pv columns
    CHECK(row.find(",0,") != std::string::npos);

    const auto p = run_tool("gen-prosumers --scenario scenario.json --out pro.csv", dir.path);
    REQUIRE(p.exit_code == 0);
    std::ifstream pin(dir.path / "pro.csv");
    REQUIRE(std::getline(pin, header));
    CHECK(header == "slot,start,source_id,cost_per_kwh,energy_kwh");
    int rows = 0;
    while (std::getline(pin, row)) ++rows;
    CHECK(rows > 0);
    CHECK(rows <= 16); // 8 slots x 2 prosumers
}

TEST_CASE("cli profile-device") {
    TempDir dir;
    std::string trace = "timestamp,watts\n";
    for (int i = 0; i < 60; ++i) {
        char ts[40];
        std::snprintf(ts, sizeof(ts), "2022-02-08T00:%02d:%02dZ", i / 60, i % 60);
        trace += std::string(ts) + "," + (i % 2 ? "36.4" : "0.6") + "\n";
    }
    dir.file("display.csv", trace);
    const auto r = run_tool("profile-device --trace display.csv --k 2 --out states.json",
                            dir.path);
    REQUIRE(r.exit_code == 0);
    nlohmann::json doc;
    std::ifstream(dir.path / "states.json") >> doc;
    CHECK(doc.at("device_id") == "display");
    REQUIRE(doc.at("states").size() == 2);
    CHECK(double(doc.at("states")[0].at("power_w")) == doctest::Approx(0.6));
    CHECK(double(doc.at("states")[1].at("power_w")) == doctest::Approx(36.4));
}
