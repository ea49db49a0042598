#include "gridsched/ingestion.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gridsched {

namespace {

using nlohmann::json;

json parse_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
    }
    return out;
}

double to_double(const std::string& s, const std::string& where) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw InputError(where + ": not a number: '" + s + "'");
    }
}

std::time_t parse_iso8601(const std::string& s, const std::string& where) {
    std::tm tm{};
    int y, mo, d, h, mi, sec = 0;
    const int n = std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d, &h, &mi, &sec);
    if (n < 5) throw InputError(where + ": bad ISO-8601 timestamp '" + s + "'");
    tm.tm_year = y - 1900;
    tm.tm_mon = mo - 1;
    tm.tm_mday = d;
    tm.tm_hour = h;
    tm.tm_min = mi;
    tm.tm_sec = sec;
    return timegm(&tm);
}

std::string format_iso8601(std::time_t t) {
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Policy parse_policy(const json& j, const DeviceSpec& dev, const TimeGrid& grid,
                    const std::string& where) {
    if (!j.is_object() || !j.contains("variant"))
        throw InputError(where + ": policy needs a 'variant'");
    const std::string variant = j.at("variant").get<std::string>();
    Policy p;
    p.policy_id = j.value("policy_id", dev.device_id + "_policy");

    auto state_vector = [&]() -> std::vector<std::string> {
        if (j.contains("state_per_slot")) {
            auto v = j.at("state_per_slot").get<std::vector<std::string>>();
            return v;
        }
        if (j.contains("segments")) {
            std::vector<std::string> v(grid.horizon_slots);
            for (const auto& seg : j.at("segments")) {
                const int from = seg.at("from").get<int>();
                const int to = seg.at("to").get<int>();
                const std::string st = seg.at("state").get<std::string>();
                if (from < 0 || to > grid.horizon_slots || from >= to)
                    throw InputError(where + ": segment [" + std::to_string(from) + "," +
                                     std::to_string(to) + ") outside the horizon");
                for (int t = from; t < to; ++t) v[t] = st;
            }
            for (int t = 0; t < grid.horizon_slots; ++t)
                if (v[t].empty())
                    throw InputError(where + ": segments leave slot " + std::to_string(t) +
                                     " unassigned");
            return v;
        }
        throw InputError(where + ": needs 'state_per_slot' or 'segments'");
    };

    if (variant == "total") {
        p.params = TotalPolicy{j.at("target_state").get<std::string>(),
                               j.at("slots_required").get<int>()};
    } else if (variant == "continuous") {
        p.params = ContinuousPolicy{j.at("target_state").get<std::string>(),
                                    j.at("slots_required").get<int>()};
    } else if (variant == "repeat") {
        p.params = RepeatPolicy{j.at("target_state").get<std::string>(),
                                j.at("slots_on").get<int>(), j.at("period_slots").get<int>()};
    } else if (variant == "multiple") {
        p.params = MultiplePolicy{j.at("target_state").get<std::string>(),
                                  j.at("job_count").get<int>(),
                                  j.at("job_length_slots").get<int>()};
    } else if (variant == "strict") {
        p.params = StrictPolicy{state_vector()};
    } else if (variant == "pattern") {
        p.params = PatternPolicy{state_vector()};
    } else if (variant == "sleep") {
        p.params = SleepPolicy{j.at("target_state").get<std::string>(),
                               j.at("window_start_slot").get<int>(),
                               j.at("window_end_slot").get<int>()};
    } else {
        throw InputError(where + ": unknown policy variant '" + variant + "'");
    }
    return p;
}

BatterySpec parse_battery(const json& j, const std::string& where) {
    BatterySpec b;
    b.capacity_max_kwh = j.at("capacity_max_kwh").get<double>();
    b.capacity_min_kwh = j.value("capacity_min_kwh", 0.0);
    b.charge_rate_max_w = j.at("charge_rate_max_w").get<double>();
    b.discharge_rate_max_w = j.at("discharge_rate_max_w").get<double>();
    b.efficiency = j.value("efficiency", 1.0);
    b.initial_charge_kwh = j.value("initial_charge_kwh", b.capacity_min_kwh);
    b.enforce_end_equals_start = j.value("enforce_end_equals_start", true);
    const std::string mode = j.value("efficiency_mode", "paper");
    if (mode == "paper")
        b.efficiency_mode = EfficiencyMode::paper_literal;
    else if (mode == "physical")
        b.efficiency_mode = EfficiencyMode::physical;
    else
        throw InputError(where + ": efficiency_mode must be 'paper' or 'physical'");
    return b;
}

} // namespace

std::vector<DeviceSpec> load_device_repository(const std::filesystem::path& path,
                                               const TimeGrid& grid,
                                               std::optional<BatterySpec>& battery_out) {
    const json doc = parse_json_file(path);
    if (!doc.is_array()) throw InputError(path.string() + ": device repository must be an array");
    std::vector<DeviceSpec> devices;
    for (const auto& jd : doc) {
        DeviceSpec dev;
        dev.device_id = jd.at("device_id").get<std::string>();
        const std::string where = path.string() + ": device " + dev.device_id;
        if (jd.contains("policies")) {
            if (!jd.at("policies").is_array() || jd.at("policies").size() != 1)
                throw InputError(where + ": exactly one policy per device");
        }
        const json& jp = jd.contains("policies") ? jd.at("policies").at(0) : jd.at("policy");
        if (jp.is_object() && jp.value("variant", "") == "battery") {
            if (battery_out)
                throw InputError(where + ": a battery is already defined");
            battery_out = parse_battery(jp, where);
            continue;
        }
        if (!jd.contains("states"))
            throw InputError(where + ": needs 'states'");
        for (const auto& js : jd.at("states"))
            dev.states.push_back(
                {js.at("state_id").get<std::string>(), js.at("power_w").get<double>()});
        dev.policy = parse_policy(jp, dev, grid, where);
        devices.push_back(std::move(dev));
    }
    return devices;
}

std::vector<WeatherSample> load_weather(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    // sniff: JSON array or CSV
    char first = 0;
    in >> std::ws;
    in.get(first);
    in.unget();
    std::vector<WeatherSample> out;
    if (first == '[') {
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::parse_error& e) {
            throw InputError(path.string() + ": " + e.what());
        }
        for (const auto& j : doc) {
            WeatherSample w;
            w.timestamp = j.at("timestamp").get<std::string>();
            w.temperature_c = j.at("temperature_c").get<double>();
            w.dew_point_c = j.at("dew_point_c").get<double>();
            w.pressure_hpa = j.at("pressure_hpa").get<double>();
            w.wind_speed_ms = j.at("wind_speed_ms").get<double>();
            w.dni_wm2 = j.at("dni_wm2").get<double>();
            out.push_back(std::move(w));
        }
        return out;
    }
    std::string line;
    if (!std::getline(in, line)) throw InputError(path.string() + ": empty weather file");
    const auto header = split_csv_line(line);
    const std::vector<std::string> expected = {"timestamp",     "temperature_c", "dew_point_c",
                                               "pressure_hpa",  "wind_speed_ms", "dni_wm2"};
    if (header != expected)
        throw InputError(path.string() + ": weather header must be timestamp,temperature_c,"
                                         "dew_point_c,pressure_hpa,wind_speed_ms,dni_wm2");
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 6)
            throw InputError(path.string() + ":" + std::to_string(line_no) +
                             ": expected 6 fields");
        const std::string where = path.string() + ":" + std::to_string(line_no);
        WeatherSample w;
        w.timestamp = f[0];
        w.temperature_c = to_double(f[1], where);
        w.dew_point_c = to_double(f[2], where);
        w.pressure_hpa = to_double(f[3], where);
        w.wind_speed_ms = to_double(f[4], where);
        w.dni_wm2 = to_double(f[5], where);
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<double> load_hourly_prices(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw InputError(path.string() + ": empty price file");
    const auto header = split_csv_line(line);
    if (header.size() != 2)
        throw InputError(path.string() + ": price header must have 2 columns (timestamp,price)");
    std::vector<double> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 2)
            throw InputError(path.string() + ":" + std::to_string(line_no) +
                             ": expected 2 fields");
        out.push_back(to_double(f[1], path.string() + ":" + std::to_string(line_no)));
    }
    return out;
}

std::vector<double> expand_hourly_to_slots(const std::vector<double>& hourly,
                                           const TimeGrid& grid,
                                           const std::string& file_label) {
    const double per_hour = 1.0 / grid.slot_duration_hours;
    const int slots_per_hour = static_cast<int>(std::llround(per_hour));
    if (slots_per_hour < 1 || std::abs(per_hour - slots_per_hour) > 1e-9)
        throw InputError(file_label + ": slot duration must divide one hour for hourly prices");
    const int hours_needed =
        (grid.horizon_slots + slots_per_hour - 1) / slots_per_hour;
    if (static_cast<int>(hourly.size()) < hours_needed)
        throw InputError(file_label + ": price file covers " + std::to_string(hourly.size()) +
                         " h, scenario needs " + std::to_string(hours_needed) + " h");
    std::vector<double> out(grid.horizon_slots);
    for (int t = 0; t < grid.horizon_slots; ++t) out[t] = hourly[t / slots_per_hour];
    return out;
}

Scenario load_scenario(const std::filesystem::path& path,
                       std::optional<std::uint64_t> seed_override) {
    const json doc = parse_json_file(path);
    const auto dir = path.parent_path();
    Scenario sc;
    sc.scenario_id = doc.value("scenario_id", path.stem().string());

    const json& jg = doc.at("grid");
    sc.grid.horizon_slots = jg.at("horizon_slots").get<int>();
    sc.grid.slot_duration_hours = jg.value("slot_duration_hours", 0.25);
    sc.grid.start_label = jg.value("start", "");

    if (doc.contains("turbine")) {
        const json& jt = doc.at("turbine");
        TurbineSpec t;
        t.swept_area_m2 = jt.at("swept_area_m2").get<double>();
        t.power_coefficient = jt.at("power_coefficient").get<double>();
        t.cut_in_ms = jt.at("cut_in_ms").get<double>();
        t.cut_out_ms = jt.at("cut_out_ms").get<double>();
        t.unit_cost_per_kwh = jt.at("unit_cost_per_kwh").get<double>();
        sc.turbine = t;
    }
    if (doc.contains("panel")) {
        const json& jp = doc.at("panel");
        PanelSpec p;
        p.area_m2 = jp.at("area_m2").get<double>();
        p.efficiency = jp.at("efficiency").get<double>();
        p.unit_cost_per_kwh = jp.at("unit_cost_per_kwh").get<double>();
        sc.panel = p;
    }
    if (doc.contains("battery"))
        sc.battery = parse_battery(doc.at("battery"), path.string() + ": battery");

    if (doc.contains("prosumers")) {
        const json& jp = doc.at("prosumers");
        sc.prosumers.count = jp.value("count", 10);
        sc.prosumers.cost_mean_divisor = jp.value("cost_mean_divisor", 1.5);
        sc.prosumers.cost_sigma = jp.value("cost_sigma", 0.025);
        sc.prosumers.energy_min_kwh = jp.value("energy_min_kwh", 0.0);
        sc.prosumers.energy_max_kwh = jp.value("energy_max_kwh", 1.0);
        sc.prosumers.rng_seed = jp.value("rng_seed", std::uint64_t{0});
    } else {
        sc.prosumers.count = 0;
    }
    if (seed_override) sc.prosumers.rng_seed = *seed_override;

    if (doc.contains("price_normalization")) {
        sc.price_low = doc.at("price_normalization").value("low", 0.40);
        sc.price_high = doc.at("price_normalization").value("high", 0.60);
    }

    sc.weather = load_weather(dir / doc.at("weather_file").get<std::string>());
    if (static_cast<int>(sc.weather.size()) != sc.grid.horizon_slots)
        throw InputError(path.string() + ": weather file has " +
                         std::to_string(sc.weather.size()) + " rows, horizon needs " +
                         std::to_string(sc.grid.horizon_slots));

    const auto price_path = dir / doc.at("prices_file").get<std::string>();
    const auto hourly = load_hourly_prices(price_path);
    const auto raw_slots = expand_hourly_to_slots(hourly, sc.grid, price_path.string());
    sc.grid_prices = normalize_grid_prices(raw_slots, sc.price_low, sc.price_high);

    std::optional<BatterySpec> repo_battery;
    auto devices = load_device_repository(dir / doc.at("devices_file").get<std::string>(),
                                          sc.grid, repo_battery);
    if (repo_battery) {
        if (sc.battery)
            throw InputError(path.string() +
                             ": battery defined both in scenario and device repository");
        sc.battery = repo_battery;
    }

    sc.problem.grid = sc.grid;
    sc.problem.devices = std::move(devices);
    sc.problem.battery = sc.battery;
    sc.problem.sources_per_slot =
        build_sources(sc.grid, sc.weather, sc.turbine, sc.panel, sc.prosumers, sc.grid_prices);
    return sc;
}

// ---------------------------------------------------------------------------

std::string slot_timestamp(const TimeGrid& grid, int slot) {
    if (grid.start_label.empty()) return "slot-" + std::to_string(slot);
    const std::time_t start = parse_iso8601(grid.start_label, "grid.start");
    const auto offset =
        static_cast<std::time_t>(std::llround(slot * grid.slot_duration_hours * 3600.0));
    return format_iso8601(start + offset);
}

void write_schedule(const Schedule& schedule, const ScheduleMeta& meta, const TimeGrid& grid,
                    const std::filesystem::path& path) {
    json doc;
    doc["metadata"] = {{"scenario_id", meta.scenario_id},
                       {"solver", meta.solver},
                       {"threads", meta.threads},
                       {"duration_ms", meta.duration_ms}};
    doc["device_ids"] = schedule.device_ids;

    const bool has_battery = !schedule.battery_actions.empty();
    json slots = json::array();
    MicroKwh total_demand = 0;
    for (size_t t = 0; t < schedule.assignments.size(); ++t) {
        json rec;
        rec["slot_index"] = t;
        rec["start"] = slot_timestamp(grid, static_cast<int>(t));
        json states;
        for (size_t i = 0; i < schedule.device_ids.size(); ++i)
            states[schedule.device_ids[i]] = schedule.assignments[t][i];
        rec["states"] = states;
        if (has_battery) {
            rec["battery_action"] = to_string(schedule.battery_actions[t]);
            rec["battery_charge_micro_kwh"] = schedule.battery_trajectory[t + 1];
            rec["battery_charge_kwh"] = kwh_from_micro(schedule.battery_trajectory[t + 1]);
        }
        rec["demand_micro_kwh"] = schedule.per_slot_demand[t];
        rec["demand_kwh"] = kwh_from_micro(schedule.per_slot_demand[t]);
        rec["cost_micro"] = schedule.per_slot_cost[t].micro();
        rec["cost"] = schedule.per_slot_cost[t].str();
        total_demand += schedule.per_slot_demand[t];
        slots.push_back(std::move(rec));
    }
    doc["slots"] = std::move(slots);
    doc["totals"] = {{"total_cost_micro", schedule.total_cost.micro()},
                     {"total_cost", schedule.total_cost.str()},
                     {"total_demand_micro_kwh", total_demand},
                     {"total_demand_kwh", kwh_from_micro(total_demand)}};
    if (has_battery) {
        doc["totals"]["battery_start_micro_kwh"] = schedule.battery_trajectory.front();
        doc["totals"]["battery_end_micro_kwh"] = schedule.battery_trajectory.back();
    }

    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

ParsedSchedule read_schedule(const std::filesystem::path& path) {
    const json doc = parse_json_file(path);
    ParsedSchedule ps;
    const json& jm = doc.at("metadata");
    ps.meta.scenario_id = jm.value("scenario_id", "");
    ps.meta.solver = jm.value("solver", "");
    ps.meta.threads = jm.value("threads", 1);
    ps.meta.duration_ms = jm.value("duration_ms", 0.0);

    ps.schedule.device_ids = doc.at("device_ids").get<std::vector<std::string>>();
    const json& slots = doc.at("slots");
    const bool has_battery =
        !slots.empty() && slots.front().contains("battery_charge_micro_kwh");
    if (has_battery && doc.at("totals").contains("battery_start_micro_kwh"))
        ps.schedule.battery_trajectory.push_back(
            doc.at("totals").at("battery_start_micro_kwh").get<MicroKwh>());

    Money total;
    for (const auto& rec : slots) {
        std::vector<std::string> row;
        for (const auto& id : ps.schedule.device_ids)
            row.push_back(rec.at("states").at(id).get<std::string>());
        ps.schedule.assignments.push_back(std::move(row));
        if (has_battery) {
            const auto a =
                battery_action_from_string(rec.at("battery_action").get<std::string>());
            if (!a) throw InputError(path.string() + ": unknown battery_action");
            ps.schedule.battery_actions.push_back(*a);
            ps.schedule.battery_trajectory.push_back(
                rec.at("battery_charge_micro_kwh").get<MicroKwh>());
        }
        ps.schedule.per_slot_cost.push_back(
            Money::from_micro(rec.at("cost_micro").get<std::int64_t>()));
        ps.schedule.per_slot_demand.push_back(rec.at("demand_micro_kwh").get<MicroKwh>());
        total += ps.schedule.per_slot_cost.back();
    }
    ps.schedule.total_cost =
        Money::from_micro(doc.at("totals").at("total_cost_micro").get<std::int64_t>());
    if (ps.schedule.total_cost != total)
        throw InputError(path.string() + ": totals.total_cost_micro does not match slot costs");
    return ps;
}

// ---------------------------------------------------------------------------

PowerTrace load_power_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    PowerTrace trace;
    trace.device_id = path.stem().string();
    std::string line;
    if (!std::getline(in, line)) throw InputError(path.string() + ": empty trace");
    const auto header = split_csv_line(line);
    if (header.size() != 2 || header[0] != "timestamp" || header[1] != "watts")
        throw InputError(path.string() + ": trace header must be timestamp,watts");
    int line_no = 1;
    std::time_t prev = 0;
    bool have_prev = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (f.size() != 2) throw InputError(where + ": expected 2 fields");
        const double watts = to_double(f[1], where);
        if (watts < 0) throw InputError(where + ": negative power");
        const std::time_t ts = parse_iso8601(f[0], where);
        if (have_prev && ts <= prev)
            throw InputError(where + ": timestamps must be strictly increasing");
        prev = ts;
        have_prev = true;
        trace.samples.emplace_back(f[0], watts);
    }
    return trace;
}

std::vector<DeviceState> cluster_power_states(const PowerTrace& trace, int k) {
    if (k < 1) throw InputError("k must be >= 1");
    std::vector<double> values;
    values.reserve(trace.samples.size());
    for (const auto& [ts, w] : trace.samples) values.push_back(w);
    std::sort(values.begin(), values.end());
    std::vector<double> distinct = values;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (static_cast<int>(distinct.size()) < k)
        throw InputError("trace has fewer distinct power values than k");

    // seed centers: min and max, interior ones quantile-spread
    std::vector<double> centers(k);
    if (k == 1) {
        centers[0] = values.front();
    } else {
        for (int i = 0; i < k; ++i) {
            const size_t pos =
                static_cast<size_t>(std::llround(static_cast<double>(i) * (values.size() - 1) /
                                                 (k - 1)));
            centers[i] = values[pos];
        }
    }

    std::vector<double> sums(k);
    std::vector<std::int64_t> counts(k);
    for (int round = 0; round < 500; ++round) {
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (double v : values) {
            int best = 0;
            double bestd = std::abs(v - centers[0]);
            for (int c = 1; c < k; ++c) {
                const double d = std::abs(v - centers[c]);
                if (d < bestd) {
                    bestd = d;
                    best = c;
                }
            }
            sums[best] += v;
            counts[best] += 1;
        }
        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) continue; // keep an empty cluster's center
            const double next = sums[c] / static_cast<double>(counts[c]);
            shift = std::max(shift, std::abs(next - centers[c]));
            centers[c] = next;
        }
        if (shift < 1e-6) break;
    }
    std::sort(centers.begin(), centers.end());

    std::vector<DeviceState> states;
    for (int c = 0; c < k; ++c) states.push_back({"S" + std::to_string(c), centers[c]});
    return states;
}

std::vector<double> cluster_boundaries(const std::vector<DeviceState>& states) {
    std::vector<double> out;
    for (size_t i = 0; i + 1 < states.size(); ++i)
        out.push_back(0.5 * (states[i].power_w + states[i + 1].power_w));
    return out;
}

} // namespace gridsched
