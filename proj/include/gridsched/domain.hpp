#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gridsched/money.hpp"

namespace gridsched {

// Scheduling horizon: fixed-length slots, at most a day in bundled data.
// start_label is metadata only (used for slot timestamps in reports).
struct TimeGrid {
    int horizon_slots = 0;
    double slot_duration_hours = 0.25;
    std::string start_label; // ISO-8601 UTC, may be empty
};

struct DeviceState {
    std::string state_id;
    double power_w = 0.0;
};

enum class SourceKind { wind, pv, prosumer, grid, battery_internal };

const char* to_string(SourceKind k);

// Per-slot supply offer. A grid source is unbounded (the DSO always
// fulfils demand); everything else offers a finite amount for this slot.
struct EnergySource {
    std::string source_id;
    SourceKind kind = SourceKind::grid;
    Money cost_per_kwh;
    MicroKwh energy = 0;
    bool unbounded = false;
};

// How the charging efficiency enters the charge update. The published
// battery equations divide by eta in both directions; the physical variant
// multiplies on charge instead. Discharge divides by eta in both modes.
enum class EfficiencyMode { paper_literal, physical };

struct BatterySpec {
    double capacity_max_kwh = 0.0;
    double capacity_min_kwh = 0.0;
    double charge_rate_max_w = 0.0;
    double discharge_rate_max_w = 0.0;
    double efficiency = 1.0;
    double initial_charge_kwh = 0.0;
    bool enforce_end_equals_start = true;
    EfficiencyMode efficiency_mode = EfficiencyMode::paper_literal;
};

enum class BatteryAction : std::uint8_t { idle = 0, charge = 1, discharge = 2 };

const char* to_string(BatteryAction a);
std::optional<BatteryAction> battery_action_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Policies. Exactly one per device; the eight variants below are the full
// constraint vocabulary.

struct TotalPolicy {
    std::string target_state;
    int slots_required = 0;
};

struct ContinuousPolicy {
    std::string target_state;
    int slots_required = 0;
};

// Sliding-window duty cycle: every full window of period_slots consecutive
// slots must contain at least slots_on occurrences of target_state. Partial
// windows at the horizon tail are exempt.
struct RepeatPolicy {
    std::string target_state;
    int slots_on = 0;
    int period_slots = 1;
};

// job_count uninterruptible runs of exactly job_length_slots each,
// separated by at least one slot not in target_state.
struct MultiplePolicy {
    std::string target_state;
    int job_count = 0;
    int job_length_slots = 1;
};

struct StrictPolicy {
    std::vector<std::string> state_per_slot;
};

// Same shape as Strict; the device is not controllable, the vector is its
// expected usage.
struct PatternPolicy {
    std::vector<std::string> state_per_slot;
};

// Device pinned to target_state inside [window_start_slot, window_end_slot),
// free elsewhere.
struct SleepPolicy {
    std::string target_state;
    int window_start_slot = 0;
    int window_end_slot = 0;
};

struct BatteryPolicy {
    BatterySpec spec;
};

enum class PolicyKind { total, continuous, repeat, multiple, strict, pattern, sleep, battery };

const char* to_string(PolicyKind k);

struct Policy {
    std::string policy_id;
    std::variant<TotalPolicy, ContinuousPolicy, RepeatPolicy, MultiplePolicy,
                 StrictPolicy, PatternPolicy, SleepPolicy, BatteryPolicy>
        params;

    PolicyKind kind() const { return static_cast<PolicyKind>(params.index()); }

    template <class T> const T* get_if() const { return std::get_if<T>(&params); }
};

struct DeviceSpec {
    std::string device_id;
    std::vector<DeviceState> states;
    Policy policy;

    // Index of state_id within states, or -1.
    int state_index(const std::string& state_id) const;
};

// The full search input. The battery, when present, is scheduled as one
// extra conceptual device with the {idle, charge, discharge} alphabet.
struct ScheduleProblem {
    TimeGrid grid;
    std::vector<DeviceSpec> devices;
    std::vector<std::vector<EnergySource>> sources_per_slot;
    std::optional<BatterySpec> battery;
};

// Complete assignment plus the derived per-slot numbers. Self-contained
// (carries device ids) so it can be serialized without the problem.
struct Schedule {
    std::vector<std::string> device_ids;
    // [slot][device] -> state_id
    std::vector<std::vector<std::string>> assignments;
    // empty when the problem has no battery, else one action per slot
    std::vector<BatteryAction> battery_actions;
    std::vector<Money> per_slot_cost;
    Money total_cost;
    // gross demand e_t: device consumption plus battery charge draw
    std::vector<MicroKwh> per_slot_demand;
    // charge at slot boundaries, horizon+1 entries (empty without battery)
    std::vector<MicroKwh> battery_trajectory;
};

// ---------------------------------------------------------------------------

struct Violation {
    std::string where;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

// Report-style check of every structural invariant of the problem types.
ValidationReport validate_problem(const ScheduleProblem& problem);

// Per-slot device energy in micro-kWh: sum of assigned state powers times
// slot duration. Battery flows are not part of this sum; they are folded
// into demand by the dispatch rules (charge adds load, discharge offsets
// it). Throws std::invalid_argument on unknown state ids.
std::vector<MicroKwh> schedule_energy(const Schedule& schedule, const TimeGrid& grid,
                                      std::span<const DeviceSpec> devices);

std::vector<double> schedule_energy_kwh(const Schedule& schedule, const TimeGrid& grid,
                                        std::span<const DeviceSpec> devices);

} // namespace gridsched
