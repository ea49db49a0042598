#include "gridsched/domain.hpp"

#include <cstdio>
#include <set>
#include <stdexcept>

namespace gridsched {

std::string Money::str() const {
    const std::int64_t m = micro_ < 0 ? -micro_ : micro_;
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%s%lld.%06lld", micro_ < 0 ? "-" : "",
                  static_cast<long long>(m / 1000000), static_cast<long long>(m % 1000000));
    return buf;
}

Money cost_for_energy(Money price_per_kwh, MicroKwh energy) {
    // both operands are non-negative in every caller; round half-up
    __int128 p = static_cast<__int128>(price_per_kwh.micro()) * energy;
    return Money::from_micro(static_cast<std::int64_t>((p + 500000) / 1000000));
}

const char* to_string(SourceKind k) {
    switch (k) {
    case SourceKind::wind: return "wind";
    case SourceKind::pv: return "pv";
    case SourceKind::prosumer: return "prosumer";
    case SourceKind::grid: return "grid";
    case SourceKind::battery_internal: return "battery-internal";
    }
    return "?";
}

const char* to_string(BatteryAction a) {
    switch (a) {
    case BatteryAction::idle: return "idle";
    case BatteryAction::charge: return "charge";
    case BatteryAction::discharge: return "discharge";
    }
    return "?";
}

std::optional<BatteryAction> battery_action_from_string(const std::string& s) {
    if (s == "idle") return BatteryAction::idle;
    if (s == "charge") return BatteryAction::charge;
    if (s == "discharge") return BatteryAction::discharge;
    return std::nullopt;
}

const char* to_string(PolicyKind k) {
    switch (k) {
    case PolicyKind::total: return "total";
    case PolicyKind::continuous: return "continuous";
    case PolicyKind::repeat: return "repeat";
    case PolicyKind::multiple: return "multiple";
    case PolicyKind::strict: return "strict";
    case PolicyKind::pattern: return "pattern";
    case PolicyKind::sleep: return "sleep";
    case PolicyKind::battery: return "battery";
    }
    return "?";
}

int DeviceSpec::state_index(const std::string& state_id) const {
    for (size_t i = 0; i < states.size(); ++i)
        if (states[i].state_id == state_id) return static_cast<int>(i);
    return -1;
}

namespace {

void check_policy(const DeviceSpec& dev, const TimeGrid& grid, ValidationReport& rep) {
    const int h = grid.horizon_slots;
    auto add = [&](const std::string& msg) {
        rep.violations.push_back({"device " + dev.device_id + " policy", msg});
    };
    auto need_state = [&](const std::string& sid) {
        if (dev.state_index(sid) < 0) add("references unknown state_id '" + sid + "'");
    };
    auto need_controllable = [&]() {
        if (dev.states.size() < 2) add("controllable device needs at least 2 states");
    };

    switch (dev.policy.kind()) {
    case PolicyKind::total: {
        const auto& p = std::get<TotalPolicy>(dev.policy.params);
        need_state(p.target_state);
        need_controllable();
        if (p.slots_required < 0 || p.slots_required > h)
            add("slots_required out of [0, horizon]");
        break;
    }
    case PolicyKind::continuous: {
        const auto& p = std::get<ContinuousPolicy>(dev.policy.params);
        need_state(p.target_state);
        need_controllable();
        if (p.slots_required < 0 || p.slots_required > h)
            add("slots_required out of [0, horizon]");
        break;
    }
    case PolicyKind::repeat: {
        const auto& p = std::get<RepeatPolicy>(dev.policy.params);
        need_state(p.target_state);
        need_controllable();
        if (p.period_slots < 1 || p.period_slots > h) add("period_slots out of [1, horizon]");
        if (p.period_slots > 65) add("period_slots wider than 65 exceeds the window digest");
        if (p.slots_on < 0 || p.slots_on > p.period_slots)
            add("slots_on out of [0, period_slots]");
        break;
    }
    case PolicyKind::multiple: {
        const auto& p = std::get<MultiplePolicy>(dev.policy.params);
        need_state(p.target_state);
        need_controllable();
        if (p.job_count < 0) add("job_count negative");
        if (p.job_length_slots < 1 || p.job_length_slots > h)
            add("job_length_slots out of [1, horizon]");
        break;
    }
    case PolicyKind::strict:
    case PolicyKind::pattern: {
        const auto& col = dev.policy.kind() == PolicyKind::strict
                              ? std::get<StrictPolicy>(dev.policy.params).state_per_slot
                              : std::get<PatternPolicy>(dev.policy.params).state_per_slot;
        if (static_cast<int>(col.size()) != h)
            add("state_per_slot length != horizon_slots");
        for (const auto& sid : col)
            if (dev.state_index(sid) < 0) {
                add("state_per_slot references unknown state_id '" + sid + "'");
                break;
            }
        break;
    }
    case PolicyKind::sleep: {
        const auto& p = std::get<SleepPolicy>(dev.policy.params);
        need_state(p.target_state);
        if (p.window_start_slot < 0 || p.window_end_slot > h ||
            p.window_start_slot >= p.window_end_slot)
            add("sleep window not inside [0, horizon)");
        break;
    }
    case PolicyKind::battery:
        add("battery policy belongs on the problem battery, not a device column");
        break;
    }
}

void check_battery(const BatterySpec& b, const std::string& where, ValidationReport& rep) {
    auto add = [&](const std::string& msg) { rep.violations.push_back({where, msg}); };
    if (b.capacity_min_kwh < 0 || b.capacity_min_kwh > b.capacity_max_kwh)
        add("requires 0 <= capacity_min <= capacity_max");
    if (b.charge_rate_max_w <= 0 || b.discharge_rate_max_w <= 0)
        add("charge/discharge rates must be positive");
    if (b.efficiency <= 0 || b.efficiency > 1) add("efficiency must be in (0, 1]");
    if (b.initial_charge_kwh < b.capacity_min_kwh || b.initial_charge_kwh > b.capacity_max_kwh)
        add("initial_charge outside [capacity_min, capacity_max]");
}

} // namespace

ValidationReport validate_problem(const ScheduleProblem& problem) {
    ValidationReport rep;
    auto add = [&](std::string where, std::string msg) {
        rep.violations.push_back({std::move(where), std::move(msg)});
    };

    if (problem.grid.horizon_slots < 1) add("grid", "horizon_slots must be >= 1");
    if (problem.grid.slot_duration_hours <= 0) add("grid", "slot_duration must be > 0");

    std::set<std::string> ids;
    for (const auto& dev : problem.devices) {
        if (!ids.insert(dev.device_id).second)
            add("device " + dev.device_id, "duplicate device_id");
        if (dev.states.empty()) add("device " + dev.device_id, "needs at least one state");
        std::set<std::string> sids;
        for (const auto& st : dev.states) {
            if (st.power_w < 0)
                add("device " + dev.device_id, "state " + st.state_id + " has negative power");
            if (!sids.insert(st.state_id).second)
                add("device " + dev.device_id, "duplicate state_id " + st.state_id);
        }
        check_policy(dev, problem.grid, rep);
    }

    if (static_cast<int>(problem.sources_per_slot.size()) != problem.grid.horizon_slots)
        add("sources", "sources_per_slot length != horizon_slots");
    for (size_t t = 0; t < problem.sources_per_slot.size(); ++t) {
        int unbounded = 0;
        for (const auto& src : problem.sources_per_slot[t]) {
            if (src.cost_per_kwh < Money{})
                add("slot " + std::to_string(t) + " source " + src.source_id, "negative cost");
            if (src.energy < 0 && !src.unbounded)
                add("slot " + std::to_string(t) + " source " + src.source_id, "negative energy");
            if (src.unbounded) {
                ++unbounded;
                if (src.kind != SourceKind::grid)
                    add("slot " + std::to_string(t) + " source " + src.source_id,
                        "only grid sources may be unbounded");
            }
        }
        if (unbounded != 1)
            add("slot " + std::to_string(t),
                unbounded == 0 ? "no unbounded source at slot " + std::to_string(t)
                               : "more than one unbounded source");
    }

    if (problem.battery) check_battery(*problem.battery, "battery", rep);
    return rep;
}

std::vector<MicroKwh> schedule_energy(const Schedule& schedule, const TimeGrid& grid,
                                      std::span<const DeviceSpec> devices) {
    std::vector<MicroKwh> out;
    out.reserve(schedule.assignments.size());
    for (const auto& row : schedule.assignments) {
        if (row.size() != devices.size())
            throw std::invalid_argument("assignment row does not match device list");
        MicroKwh e = 0;
        for (size_t i = 0; i < row.size(); ++i) {
            const int si = devices[i].state_index(row[i]);
            if (si < 0)
                throw std::invalid_argument("unknown state_id '" + row[i] + "' for device " +
                                            devices[i].device_id);
            e += micro_kwh_from_power(devices[i].states[si].power_w, grid.slot_duration_hours);
        }
        out.push_back(e);
    }
    return out;
}

std::vector<double> schedule_energy_kwh(const Schedule& schedule, const TimeGrid& grid,
                                        std::span<const DeviceSpec> devices) {
    std::vector<double> out;
    for (MicroKwh e : schedule_energy(schedule, grid, devices)) out.push_back(kwh_from_micro(e));
    return out;
}

} // namespace gridsched
